"""Core game representation: action spaces, bid bounds, games, allocations,
and tabulated bidding profiles.

A game has one agent (index 0) and n principals.  Principals commit to
bidding functions over the action space; the agent then picks an action.
Everything downstream works on a finite action grid, so the grid logic
(uniform sampling merged with declared breakpoints) lives here.

Conventions used throughout the package:

- actions are floats for 1-D spaces and tuples of floats otherwise; in
  vectorized paths the same shapes hold with numpy arrays in place of
  floats (a tuple of arrays for multi-D spaces),
- bids are sequences of n values, one per principal,
- utility vectors are numpy arrays of length n+1 with the agent first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

INCREASING = 1
DECREASING = -1

FEASIBILITY_TOL = 1e-9
GRID_DEDUP_TOL = 1e-12
ALLOCATION_CACHE_TOL = 1e-12
DEFAULT_RESOLUTION = 201

KNOWN_FLAGS = frozenset({
    "symmetric",
    "cumulative",
    "no_externalities",
    "private",
    "differentiable",
    "quasi_concave",
    "negative_externalities",
    "positive_externalities",
})


class GameError(ValueError):
    """Structural problem: malformed space, infeasible profile, bad input."""


# ---------------------------------------------------------------------------
# action spaces and grids

@dataclass(frozen=True)
class ActionSpace:
    """Interval, product-of-intervals, or explicit finite set of actions."""

    kind: str  # "interval" | "product" | "finite"
    bounds: tuple[tuple[float, float], ...] = ()
    points: tuple = ()  # finite kind: floats (1-D) or tuples
    breakpoints: tuple[tuple[float, ...], ...] = ()
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.kind not in ("interval", "product", "finite"):
            raise GameError(f"unknown action space kind {self.kind!r}")
        if self.kind == "finite":
            if len(self.points) == 0:
                raise GameError("finite action space needs at least one point")
        else:
            if len(self.bounds) == 0:
                raise GameError("interval action space needs bounds")
            if self.kind == "interval" and len(self.bounds) != 1:
                raise GameError("interval spaces are one-dimensional; use kind='product'")
            for lo, hi in self.bounds:
                if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                    raise GameError(f"bad action bounds ({lo}, {hi})")
            if self.breakpoints and len(self.breakpoints) != len(self.bounds):
                raise GameError("breakpoints must be given per dimension")
            for d, (lo, hi) in enumerate(self.bounds):
                for bp in (self.breakpoints[d] if self.breakpoints else ()):
                    if bp < lo - GRID_DEDUP_TOL or bp > hi + GRID_DEDUP_TOL:
                        raise GameError(f"breakpoint {bp} outside bounds of dimension {d}")
            if self.resolution < 2:
                raise GameError("resolution must be at least 2")

    @property
    def ndim(self) -> int:
        if self.kind == "finite":
            first = self.points[0]
            return len(first) if isinstance(first, tuple) else 1
        return len(self.bounds)

    @property
    def scalar(self) -> bool:
        return self.ndim == 1 and self.kind != "product"


def _axis_values(lo: float, hi: float, breakpoints: Sequence[float], resolution: int) -> np.ndarray:
    vals = np.linspace(lo, hi, resolution)
    extra = [bp for bp in breakpoints
             if np.min(np.abs(vals - bp)) > GRID_DEDUP_TOL]
    if extra:
        vals = np.sort(np.concatenate([vals, np.asarray(extra, dtype=float)]))
    # drop near-duplicates, keeping the first of each cluster
    keep = np.ones(len(vals), dtype=bool)
    keep[1:] = np.diff(vals) > GRID_DEDUP_TOL
    return vals[keep]


class Grid:
    """Finite set of actions, index-aligned with tabulated profiles.

    Product grids enumerate lazily in row-major order; ``columns()``
    materializes per-dimension coordinate arrays for vectorized work.
    """

    def __init__(self, *, axes: Sequence[np.ndarray] | None = None,
                 points: Sequence | None = None, scalar: bool = True,
                 interpolates: bool = True):
        self.axes = tuple(np.asarray(ax, dtype=float) for ax in axes) if axes is not None else None
        self.explicit = list(points) if points is not None else None
        self.scalar = scalar
        self.interpolates = interpolates and scalar and self.axes is not None
        self._columns: tuple[np.ndarray, ...] | None = None

    @property
    def ndim(self) -> int:
        if self.axes is not None:
            return len(self.axes)
        first = self.explicit[0]
        return len(first) if isinstance(first, tuple) else 1

    @property
    def shape(self) -> tuple[int, ...]:
        if self.axes is not None:
            return tuple(len(ax) for ax in self.axes)
        return (len(self.explicit),)

    def __len__(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    def __getitem__(self, g: int):
        if self.explicit is not None:
            return self.explicit[g]
        if self.scalar:
            return float(self.axes[0][g])
        idx = np.unravel_index(g, self.shape)
        return tuple(float(ax[i]) for ax, i in zip(self.axes, idx))

    def __iter__(self):
        if self.explicit is not None:
            yield from self.explicit
        elif self.scalar:
            yield from (float(v) for v in self.axes[0])
        else:
            for combo in itertools.product(*self.axes):
                yield tuple(float(v) for v in combo)

    def columns(self) -> tuple[np.ndarray, ...]:
        """Per-dimension coordinates of every grid point, flattened row-major."""
        if self._columns is None:
            if self.explicit is not None:
                arr = np.asarray([p if isinstance(p, tuple) else (p,) for p in self.explicit],
                                 dtype=float)
                self._columns = tuple(arr[:, d] for d in range(arr.shape[1]))
            elif self.scalar:
                self._columns = (self.axes[0],)
            else:
                mesh = np.meshgrid(*self.axes, indexing="ij")
                self._columns = tuple(m.ravel() for m in mesh)
        return self._columns

    def action_arg(self):
        """Grid actions in the shape utility callables expect."""
        cols = self.columns()
        return cols[0] if self.scalar else cols

    def nearest_index(self, action) -> int:
        cols = self.columns()
        if self.scalar:
            d = np.abs(cols[0] - float(action))
        else:
            pt = np.asarray(action, dtype=float)
            d = np.zeros(len(self))
            for dim in range(self.ndim):
                d = d + (cols[dim] - pt[dim]) ** 2
        return int(np.argmin(d))


def action_grid(space: ActionSpace, resolution: int | None = None) -> Grid:
    """Uniform grid merged with declared breakpoints (duplicates removed
    at 1e-12), or the explicit point list for finite spaces."""
    res = resolution if resolution is not None else space.resolution
    if space.kind == "finite":
        pts = sorted(space.points)
        return Grid(points=pts, scalar=space.scalar, interpolates=False)
    axes = []
    for d, (lo, hi) in enumerate(space.bounds):
        bps = space.breakpoints[d] if space.breakpoints else ()
        axes.append(_axis_values(lo, hi, bps, res))
    return Grid(axes=axes, scalar=space.scalar)


# ---------------------------------------------------------------------------
# bounds, game, allocations

@dataclass(frozen=True)
class BidBounds:
    """Action-dependent feasible bid interval for one principal, inside
    the game-wide envelope [global_min, global_max]."""

    lower: Callable
    upper: Callable
    global_min: float
    global_max: float


@dataclass(frozen=True)
class ActionSymmetry:
    """How swapping two principals relabels the action, for games whose
    action has principal-indexed components.

    kind "reflect": 1-D action mirrored about ``center`` (two principals).
    kind "zero_sum": the action holds the first n-1 entries of a zero-sum
    n-vector; swapping principals permutes the implied full vector.
    """

    kind: str
    center: float = 0.0

    def swap(self, action, i: int, j: int, n: int):
        if self.kind == "reflect":
            if n != 2:
                raise GameError("reflect symmetry only applies to two principals")
            return 2.0 * self.center - action
        if self.kind == "zero_sum":
            comps = list(action) if isinstance(action, (tuple, list)) else [action]
            last = -sum(comps[1:], start=comps[0] * 0) - comps[0]
            full = comps + [last]
            full[i], full[j] = full[j], full[i]
            out = full[:-1]
            return out[0] if len(out) == 1 else tuple(out)
        raise GameError(f"unknown action symmetry kind {self.kind!r}")


@dataclass(frozen=True)
class GameSpec:
    name: str
    n: int
    action_space: ActionSpace
    agent_utility: Callable
    principal_utilities: tuple[Callable, ...]
    bid_bounds: tuple[BidBounds, ...]
    own_bid_direction: tuple[int, ...]
    agent_bid_direction: int
    flags: frozenset[str] = frozenset()
    action_symmetry: ActionSymmetry | None = None

    def __post_init__(self):
        if self.n < 1:
            raise GameError("need at least one principal")
        if len(self.principal_utilities) != self.n or len(self.bid_bounds) != self.n:
            raise GameError("principal_utilities and bid_bounds must have length n")
        if len(self.own_bid_direction) != self.n:
            raise GameError("own_bid_direction must have length n")
        for d in (*self.own_bid_direction, self.agent_bid_direction):
            if d not in (INCREASING, DECREASING):
                raise GameError("directions must be +1 (increasing) or -1 (decreasing)")
        unknown = self.flags - KNOWN_FLAGS
        if unknown:
            raise GameError(f"unknown flags: {sorted(unknown)}")
        gm = {(b.global_min, b.global_max) for b in self.bid_bounds}
        for lo, hi in gm:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise GameError("global bid envelope must be a finite interval")

    def grid(self, resolution: int | None = None) -> Grid:
        return action_grid(self.action_space, resolution)

    def utilities(self, action, bids) -> list:
        u = [self.agent_utility(action, bids)]
        for i in range(self.n):
            u.append(self.principal_utilities[i](action, bids))
        return u


def evaluate(game: GameSpec, action, bids) -> np.ndarray:
    """Utility vector (agent first).  Rejects non-finite values."""
    bids = np.asarray(bids, dtype=float)
    if bids.shape != (game.n,):
        raise GameError(f"expected {game.n} bids, got shape {bids.shape}")
    u = np.asarray([float(v) for v in game.utilities(action, bids)])
    if not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero(~np.isfinite(u))[0])
        who = "agent" if bad == 0 else f"principal {bad}"
        raise GameError(f"non-finite utility for {who} at action {action!r}, bids {bids.tolist()}")
    return u


@dataclass(frozen=True)
class FeasibilityResult:
    ok: bool
    slacks: tuple[float, ...]  # per principal, min distance into the bid interval


def is_feasible_pair(game: GameSpec, action, bids, tol: float = FEASIBILITY_TOL) -> FeasibilityResult:
    """Signed slack per principal: negative slack measures the violation."""
    slacks = []
    for i in range(game.n):
        lo = float(game.bid_bounds[i].lower(action))
        hi = float(game.bid_bounds[i].upper(action))
        b = float(bids[i])
        slacks.append(min(b - lo, hi - b))
    return FeasibilityResult(ok=all(s >= -tol for s in slacks), slacks=tuple(slacks))


@dataclass(frozen=True)
class Allocation:
    """A point outcome: action, bid vector, and cached utility vector."""

    action: object
    bids: tuple[float, ...]
    utilities: tuple[float, ...]  # agent first, length n+1

    @property
    def u_agent(self) -> float:
        return self.utilities[0]

    @property
    def u_principals(self) -> tuple[float, ...]:
        return self.utilities[1:]


def make_allocation(game: GameSpec, action, bids, utilities=None) -> Allocation:
    computed = evaluate(game, action, bids)
    if utilities is not None:
        supplied = np.asarray(utilities, dtype=float)
        if supplied.shape != computed.shape or np.max(np.abs(supplied - computed)) > ALLOCATION_CACHE_TOL:
            raise GameError("cached utilities disagree with recomputation")
    if not game.action_space.scalar and not isinstance(action, tuple):
        action = tuple(float(x) for x in action)
    return Allocation(action=action if isinstance(action, tuple) else float(action),
                      bids=tuple(float(b) for b in bids),
                      utilities=tuple(float(v) for v in computed))


# ---------------------------------------------------------------------------
# bidding profiles

class BiddingProfile:
    """Per-principal bids tabulated over a grid.

    1-D interval grids interpolate linearly between grid actions; rows
    flagged as step profiles (and all rows on finite or product grids)
    use the nearest grid point instead.
    """

    def __init__(self, grid: Grid, values: np.ndarray, step: Sequence[bool] | None = None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(grid):
            raise GameError(f"profile values must be (n, {len(grid)}), got {values.shape}")
        self.grid = grid
        self.values = values
        self.step = tuple(bool(s) for s in (step if step is not None else [False] * values.shape[0]))
        if len(self.step) != values.shape[0]:
            raise GameError("step flags must match the number of principals")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def at_index(self, g: int) -> np.ndarray:
        return self.values[:, g]

    def at(self, action) -> np.ndarray:
        if self.grid.interpolates:
            a = float(action)
            ax = self.grid.axes[0]
            out = np.empty(self.n)
            for i in range(self.n):
                if self.step[i]:
                    out[i] = self.values[i, self.grid.nearest_index(a)]
                else:
                    out[i] = np.interp(a, ax, self.values[i])
            return out
        return self.values[:, self.grid.nearest_index(action)]

    def with_row(self, i: int, row: np.ndarray, step: bool | None = None) -> "BiddingProfile":
        values = self.values.copy()
        values[i] = row
        flags = list(self.step)
        if step is not None:
            flags[i] = step
        return BiddingProfile(self.grid, values, flags)


def bounds_on_grid(game: GameSpec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(lower, upper) arrays of shape (n, G) over the grid."""
    act = grid.action_arg()
    G = len(grid)
    lower = np.empty((game.n, G))
    upper = np.empty((game.n, G))
    for i in range(game.n):
        lower[i] = np.broadcast_to(np.asarray(game.bid_bounds[i].lower(act), dtype=float), (G,))
        upper[i] = np.broadcast_to(np.asarray(game.bid_bounds[i].upper(act), dtype=float), (G,))
    if np.any(lower > upper + GRID_DEDUP_TOL):
        i, g = np.unravel_index(int(np.argmax(lower - upper)), lower.shape)
        raise GameError(f"bid bounds cross for principal {i + 1} at action {grid[int(g)]!r}")
    return lower, upper


def build_profile(game: GameSpec, grid: Grid, values, step=None,
                  tol: float = FEASIBILITY_TOL) -> BiddingProfile:
    """Construct a profile, enforcing feasibility at every grid action."""
    profile = BiddingProfile(grid, np.asarray(values, dtype=float), step)
    lower, upper = bounds_on_grid(game, grid)
    viol = np.maximum(lower - profile.values, profile.values - upper)
    worst = float(np.max(viol))
    if worst > tol:
        i, g = np.unravel_index(int(np.argmax(viol)), viol.shape)
        raise GameError(
            f"infeasible profile: principal {i + 1} bids {profile.values[i, g]:.12g} "
            f"at action {grid[int(g)]!r} (violation {worst:.3g})")
    return profile


def profile_utilities(game: GameSpec, profile: BiddingProfile) -> np.ndarray:
    """(n+1, G) utilities along the profile, vectorized over the grid."""
    act = profile.grid.action_arg()
    bids = [profile.values[i] for i in range(game.n)]
    rows = game.utilities(act, bids)
    G = len(profile.grid)
    out = np.empty((game.n + 1, G))
    for k, row in enumerate(rows):
        out[k] = np.broadcast_to(np.asarray(row, dtype=float), (G,))
    if not np.all(np.isfinite(out)):
        k, g = np.unravel_index(int(np.argmax(~np.isfinite(out))), out.shape)
        who = "agent" if k == 0 else f"principal {k}"
        raise GameError(f"non-finite utility for {who} at grid action {profile.grid[int(g)]!r}")
    return out


# ---------------------------------------------------------------------------
# private common agency (per-principal actions, no bid externalities)

@dataclass
class PrivateView:
    """Product-space game where principal i's utility and bounds depend
    only on the i-th action component and own bid; profiles can then be
    stored per component and broadcast to the full grid."""

    game: GameSpec
    grid: Grid

    def component_axis(self, i: int) -> np.ndarray:
        return self.grid.axes[i]

    def profile_from_components(self, tables: Sequence[np.ndarray],
                                step: Sequence[bool] | None = None) -> BiddingProfile:
        if len(tables) != self.game.n:
            raise GameError("one component table per principal")
        shape = self.grid.shape
        values = np.empty((self.game.n, len(self.grid)))
        for i, table in enumerate(tables):
            table = np.asarray(table, dtype=float)
            if table.shape != (shape[i],):
                raise GameError(f"component table {i} must have length {shape[i]}")
            reshape = [1] * len(shape)
            reshape[i] = shape[i]
            values[i] = np.broadcast_to(table.reshape(reshape), shape).ravel()
        return build_profile(self.game, self.grid, values, step)

    def components_of(self, profile: BiddingProfile) -> list[np.ndarray]:
        """Per-principal tables, checking the profile is measurable in the
        own component (constant across the other dimensions)."""
        shape = self.grid.shape
        out = []
        for i in range(self.game.n):
            cube = profile.values[i].reshape(shape)
            axes = tuple(d for d in range(len(shape)) if d != i)
            lo = cube.min(axis=axes)
            hi = cube.max(axis=axes)
            if np.max(hi - lo) > 1e-9:
                raise GameError(f"principal {i + 1}'s bids vary with other action components")
            out.append(lo)
        return out


def adapt_private(game: GameSpec, samples: int = 64, seed: int = 0) -> PrivateView:
    """Check the private structure by sampling and return the view.

    Requires a product action space with one dimension per principal and
    utilities/bounds for principal i that ignore the other components and
    the other principals' bids.
    """
    if "private" not in game.flags:
        raise GameError("game is not flagged private")
    space = game.action_space
    if space.kind != "product" or space.ndim != game.n:
        raise GameError("private games need a product action space with one factor per principal")
    rng = np.random.default_rng(seed)
    lo = np.asarray([b[0] for b in space.bounds])
    hi = np.asarray([b[1] for b in space.bounds])
    for _ in range(samples):
        a = tuple(lo + rng.random(game.n) * (hi - lo))
        a2 = tuple(lo + rng.random(game.n) * (hi - lo))
        for i in range(game.n):
            mixed = tuple(a[d] if d == i else a2[d] for d in range(game.n))
            bl = float(game.bid_bounds[i].lower(a))
            bu = float(game.bid_bounds[i].upper(a))
            if abs(bl - float(game.bid_bounds[i].lower(mixed))) > 1e-9 or \
               abs(bu - float(game.bid_bounds[i].upper(mixed))) > 1e-9:
                raise GameError(f"bid bounds of principal {i + 1} depend on other action components")
            bids = [float(game.bid_bounds[k].lower(a)) +
                    rng.random() * (float(game.bid_bounds[k].upper(a)) - float(game.bid_bounds[k].lower(a)))
                    for k in range(game.n)]
            bids_mixed = list(bids)
            for k in range(game.n):
                if k != i:
                    bids_mixed[k] = float(game.bid_bounds[k].lower(a)) + \
                        rng.random() * (float(game.bid_bounds[k].upper(a)) - float(game.bid_bounds[k].lower(a)))
            u1 = float(game.principal_utilities[i](a, bids))
            # other action components first, then other principals' bids
            u_other_action = float(game.principal_utilities[i](mixed, bids))
            u_other_bids = float(game.principal_utilities[i](a, bids_mixed))
            if abs(u1 - u_other_action) > 1e-9:
                raise GameError(f"principal {i + 1}'s utility depends on other action components")
            if abs(u1 - u_other_bids) > 1e-9:
                raise GameError(f"principal {i + 1}'s utility depends on other principals' bids")
    return PrivateView(game=game, grid=game.grid())
