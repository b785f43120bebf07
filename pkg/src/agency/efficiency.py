"""Brute-force joint-improvement scans over action-and-bid grids.

An allocation is "efficient at resolution" when no feasible grid pair
weakly improves every utility (agent included) and strictly improves at
least one.  The same machinery samples the non-dominated utility set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import Allocation, GameError, GameSpec, evaluate
from .reports import CheckReport

EFFICIENCY_STRICT = 1e-6
EFFICIENCY_WEAK = 1e-9
DEFAULT_BID_RESOLUTION = 41
SCAN_GUARD = 10**8
FRONTIER_GUARD = 10**6


def bid_axes(game: GameSpec, action, resolution: int) -> list[np.ndarray]:
    axes = []
    for i in range(game.n):
        lo = float(game.bid_bounds[i].lower(action))
        hi = float(game.bid_bounds[i].upper(action))
        if hi < lo - 1e-12:
            raise GameError(f"inverted bid bounds for principal {i} at action {action!r}")
        axes.append(np.linspace(lo, max(lo, hi), resolution))
    return axes


def bid_mesh(game: GameSpec, action, resolution: int) -> np.ndarray:
    grids = np.meshgrid(*bid_axes(game, action, resolution), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def mesh_utilities(game: GameSpec, action, mesh: np.ndarray) -> np.ndarray:
    """(len(mesh), n+1) utilities, vectorized when the game's callables
    broadcast over bid arrays, one point at a time otherwise."""
    cols = [mesh[:, i] for i in range(game.n)]
    try:
        rows = game.utilities(action, cols)
        out = np.empty((len(mesh), game.n + 1))
        for k, row in enumerate(rows):
            out[:, k] = np.broadcast_to(np.asarray(row, dtype=float), (len(mesh),))
    except Exception:
        out = np.empty((len(mesh), game.n + 1))
        for g, row in enumerate(mesh):
            out[g] = evaluate(game, action, row)
        return out
    if not np.all(np.isfinite(out)):
        g = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise GameError(f"non-finite utility at action {action!r}, bids {mesh[g].tolist()}")
    return out


@dataclass(frozen=True)
class DominanceWitness:
    """A feasible pair that jointly improves on the reference allocation."""

    action: object
    bids: tuple
    utilities: tuple
    margins: tuple  # utility minus reference, agent first

    def to_jsonable(self):
        return {"action": self.action, "bids": list(self.bids),
                "utilities": list(self.utilities), "margins": list(self.margins)}


def _witness_key(margins: np.ndarray, g: int, h: int):
    # prefer the most clearly dominating pair; earliest indices break ties
    return (float(margins.min()), float(margins.max()), -g, -h)


def check_efficiency(game: GameSpec, alloc: Allocation, bid_resolution: int = DEFAULT_BID_RESOLUTION,
                     resolution: int | None = None, strict: float = EFFICIENCY_STRICT,
                     weak: float = EFFICIENCY_WEAK, guard: int = SCAN_GUARD) -> CheckReport:
    """Scan every grid action with a per-principal bid mesh for a pair
    dominating ``alloc``.  Passing certifies efficiency at this grid only;
    a failure carries the best dominating witness found."""
    ref = np.asarray(alloc.utilities, dtype=float)
    grid = game.grid(resolution)
    work = len(grid) * bid_resolution ** game.n
    if work > guard:
        raise GameError(f"efficiency scan of {work} pairs exceeds the guard ({guard})")

    details = {"bid_resolution": bid_resolution, "actions": len(grid),
               "strict": strict, "weak": weak}
    best = None
    best_key = None
    for g, act in enumerate(grid):
        mesh = bid_mesh(game, act, bid_resolution)
        mu = mesh_utilities(game, act, mesh)
        margins = mu - ref[None, :]
        dominating = (np.all(margins >= -weak, axis=1)
                      & np.any(margins > strict, axis=1))
        if not dominating.any():
            continue
        idx = np.flatnonzero(dominating)
        mn = margins[idx].min(axis=1)
        mx = margins[idx].max(axis=1)
        h = int(idx[np.lexsort((idx, -mx, -mn))[0]])
        key = _witness_key(margins[h], g, h)
        if best_key is None or key > best_key:
            best_key = key
            best = DominanceWitness(action=act, bids=tuple(mesh[h].tolist()),
                                    utilities=tuple(mu[h].tolist()),
                                    margins=tuple(margins[h].tolist()))
    if best is None:
        return CheckReport("efficiency", True, 0.0, None, details)
    return CheckReport("efficiency", False, float(min(best.margins)),
                       best.to_jsonable(), details)


def frontier_sample(game: GameSpec, resolution: int | None = None,
                    bid_resolution: int = 21, guard: int = FRONTIER_GUARD) -> list[dict]:
    """Non-dominated utility vectors over the sampling grid, each with the
    allocation realizing it.  Rows sorted by (action, bids)."""
    grid = game.grid(resolution)
    points = len(grid) * bid_resolution ** game.n
    if points > guard:
        raise GameError(f"frontier sample of {points} points exceeds the guard ({guard})")

    alloc_rows = []
    utils = []
    for act in grid:
        mesh = bid_mesh(game, act, bid_resolution)
        mu = mesh_utilities(game, act, mesh)
        a_row = np.atleast_1d(np.asarray(act, dtype=float))
        for h in range(len(mesh)):
            alloc_rows.append(np.concatenate([a_row, mesh[h]]))
            utils.append(mu[h])
    utils = np.asarray(utils)
    alloc_rows = np.asarray(alloc_rows)

    # dominators always sort ahead of what they dominate
    order = np.lexsort(tuple(utils[:, k] for k in range(utils.shape[1]))[::-1])[::-1]
    keep = []
    archive = np.empty((0, utils.shape[1]))
    for idx in order:
        u = utils[idx]
        if archive.size:
            beats = (np.all(archive >= u[None, :], axis=1)
                     & np.any(archive > u[None, :], axis=1))
            if beats.any():
                continue
        archive = np.vstack([archive, u[None, :]])
        keep.append(int(idx))

    rows = []
    for idx in keep:
        rows.append({"allocation": alloc_rows[idx].tolist(),
                     "utilities": utils[idx].tolist()})
    rows.sort(key=lambda r: tuple(r["allocation"]))
    return rows
