"""Construction of truthful bidding schedules.

A truthful schedule encodes a target utility level for its principal: at every
action the bid moves so the principal sits exactly at the target, clamped to
the feasible band where the target is out of reach.  The indifference bid is
found by bisection, which only needs the declared own-bid direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import (
    DECREASING,
    INCREASING,
    BiddingProfile,
    GameError,
    GameSpec,
    Grid,
    bounds_on_grid,
    build_profile,
)
from .reports import CheckReport

PHI_TOL = 1e-12
PHI_MAX_ITER = 100
FIXED_POINT_TOL = 1e-9
FIXED_POINT_MAX_ITER = 500
FIXED_POINT_DAMPING = 0.5
TRUTHFUL_TOL = 1e-8

# endpoint slack used when auditing the declared own-bid direction
_DIRECTION_SLACK = 1e-9


class MonotonicityViolation(GameError):
    """Utilities moved against the declared own-bid direction."""


def _own_utility(game: GameSpec, i: int, act, values: np.ndarray, opponents: np.ndarray) -> np.ndarray:
    bids = [np.asarray(opponents[j], dtype=float) for j in range(game.n)]
    bids[i] = values
    out = np.asarray(game.principal_utilities[i](act, bids), dtype=float)
    return np.broadcast_to(out, np.shape(values)).astype(float)


def _audit_direction(game: GameSpec, i: int, grid: Grid, u_lo: np.ndarray, u_hi: np.ndarray) -> None:
    slack = _DIRECTION_SLACK * np.maximum(1.0, np.maximum(np.abs(u_lo), np.abs(u_hi)))
    if game.own_bid_direction[i] == DECREASING:
        bad = u_lo < u_hi - slack
    else:
        bad = u_lo > u_hi + slack
    if np.any(bad):
        g = int(np.argmax(bad))
        raise MonotonicityViolation(
            "principal %d utility moves against its declared own-bid direction "
            "at action %r (endpoint utilities %.12g and %.12g)"
            % (i + 1, grid[g], float(u_lo[g]), float(u_hi[g]))
        )


@dataclass
class PhiSolve:
    """Vector bisection result for one principal over a whole grid.

    above_range marks actions where the target exceeds every reachable
    utility, below_range the opposite; values there sit at the nearest bound.
    """

    values: np.ndarray
    solvable: np.ndarray
    above_range: np.ndarray
    below_range: np.ndarray
    residual: np.ndarray


def solve_phi(game: GameSpec, i: int, target: float, opponents, grid: Grid,
              lo=None, hi=None) -> PhiSolve:
    """Solve u_i(a, phi, opponents(a)) = target for phi at every grid action."""
    act = grid.action_arg()
    opponents = np.asarray(opponents, dtype=float)
    if lo is None or hi is None:
        lower, upper = bounds_on_grid(game, grid)
        if lo is None:
            lo = lower[i]
        if hi is None:
            hi = upper[i]
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (len(grid),)).astype(float)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (len(grid),)).astype(float)
    target = float(target)

    u_lo = _own_utility(game, i, act, lo, opponents)
    u_hi = _own_utility(game, i, act, hi, opponents)
    _audit_direction(game, i, grid, u_lo, u_hi)

    if game.own_bid_direction[i] == DECREASING:
        u_best, u_worst = u_lo, u_hi
    else:
        u_best, u_worst = u_hi, u_lo
    above = target > u_best + PHI_TOL
    below = target < u_worst - PHI_TOL
    solvable = ~(above | below)

    # clamp the target into the reachable band so out-of-range entries park
    # at the corresponding bound instead of wandering
    t = np.clip(target, np.minimum(u_lo, u_hi), np.maximum(u_lo, u_hi))
    left = lo.copy()
    right = hi.copy()
    decreasing = game.own_bid_direction[i] == DECREASING
    mid = 0.5 * (left + right)
    for _ in range(PHI_MAX_ITER):
        mid = 0.5 * (left + right)
        u_mid = _own_utility(game, i, act, mid, opponents)
        res = np.abs(u_mid - t)
        if not solvable.any() or float(np.max(res[solvable])) <= PHI_TOL:
            break
        if decreasing:
            go_right = u_mid >= t
        else:
            go_right = u_mid <= t
        left = np.where(go_right, mid, left)
        right = np.where(go_right, right, mid)

    phi = np.clip(mid, lo, hi)
    u_phi = _own_utility(game, i, act, phi, opponents)
    return PhiSolve(
        values=phi,
        solvable=solvable,
        above_range=above,
        below_range=below,
        residual=np.abs(u_phi - t),
    )


def solve_phi_at(game: GameSpec, i: int, target: float, action, opponent_bids) -> tuple[str, float]:
    """Scalar convenience wrapper: returns (status, bid) at a single action."""
    if game.action_space.scalar:
        point = float(action)
    else:
        point = tuple(float(x) for x in action)
    grid = Grid(points=[point], scalar=game.action_space.scalar, interpolates=False)
    opp = np.zeros((game.n, 1))
    for j in range(game.n):
        if j != i:
            opp[j, 0] = float(opponent_bids[j])
    sol = solve_phi(game, i, target, opp, grid)
    if sol.above_range[0]:
        return "above-range", float(sol.values[0])
    if sol.below_range[0]:
        return "below-range", float(sol.values[0])
    return "ok", float(sol.values[0])


def truthful_response(game: GameSpec, i: int, target: float, opponents, grid: Grid,
                      bounds=None) -> np.ndarray:
    """Truthful bid row for principal i against fixed opponent schedules.

    Case split per action: park at the favorable bound when the target is
    unreachable, otherwise bid the indifference level.  Ties fall through to
    the indifference solve, which lands on the bound anyway.
    """
    if bounds is None:
        bounds = bounds_on_grid(game, grid)
    lower, upper = bounds
    lo = lower[i]
    hi = upper[i]
    act = grid.action_arg()
    opponents = np.asarray(opponents, dtype=float)
    target = float(target)

    u_lo = _own_utility(game, i, act, lo, opponents)
    u_hi = _own_utility(game, i, act, hi, opponents)
    _audit_direction(game, i, grid, u_lo, u_hi)

    if game.own_bid_direction[i] == DECREASING:
        at_lo = u_lo < target        # short even at the cheapest bid
        at_hi = target < u_hi        # above target even at the cap
    else:
        at_lo = target < u_lo
        at_hi = u_hi < target
    row = np.where(at_lo, lo, hi)
    mid = ~(at_lo | at_hi)
    if np.any(mid):
        phi = solve_phi(game, i, target, opponents, grid, lo=lo, hi=hi).values
        row = np.where(mid, phi, row)
    return row


@dataclass
class TruthfulBuild:
    """Joint truthful profile for a vector of targets, or a non-convergence note."""

    status: str                      # "converged" or "undetermined"
    profile: BiddingProfile | None
    iterations: int
    max_change: float
    targets: tuple[float, ...]

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def truthful_profile(game: GameSpec, targets, grid: Grid,
                     damping: float = FIXED_POINT_DAMPING,
                     tol: float = FIXED_POINT_TOL,
                     max_iter: int = FIXED_POINT_MAX_ITER) -> TruthfulBuild:
    """Build the joint truthful profile where every row answers the others.

    Without externalities one synchronous pass settles it.  Otherwise run a
    damped synchronous iteration started from the bound the race between
    principals drifts toward (lower bounds when the agent likes bids).
    """
    targets = tuple(float(t) for t in targets)
    if len(targets) != game.n:
        raise GameError("expected %d targets, got %d" % (game.n, len(targets)))
    bounds = bounds_on_grid(game, grid)
    lower, upper = bounds
    independent = (
        "no_externalities" in game.flags or "private" in game.flags or game.n == 1
    )
    current = (lower if game.agent_bid_direction == INCREASING else upper).copy()

    def respond(state: np.ndarray) -> np.ndarray:
        return np.vstack([
            truthful_response(game, i, targets[i], state, grid, bounds)
            for i in range(game.n)
        ])

    if independent:
        rows = respond(current)
        return TruthfulBuild("converged", build_profile(game, grid, rows), 1, 0.0, targets)

    iterations = 0
    max_change = float("inf")
    for iterations in range(1, max_iter + 1):
        rows = respond(current)
        nxt = damping * rows + (1.0 - damping) * current
        max_change = float(np.max(np.abs(nxt - current)))
        current = nxt
        if max_change <= tol:
            break
    if max_change > tol:
        return TruthfulBuild("undetermined", None, iterations, max_change, targets)
    rows = respond(current)
    return TruthfulBuild("converged", build_profile(game, grid, rows), iterations, max_change, targets)


def is_truthful(game: GameSpec, profile: BiddingProfile, targets,
                tol: float = TRUTHFUL_TOL) -> CheckReport:
    """Check every row of the profile against its own truthful rebuild."""
    targets = tuple(float(t) for t in targets)
    grid = profile.grid
    bounds = bounds_on_grid(game, grid)
    worst = 0.0
    witness = None
    for i in range(game.n):
        row = truthful_response(game, i, targets[i], profile.values, grid, bounds)
        dev = np.abs(row - profile.values[i])
        g = int(np.argmax(dev))
        if witness is None or float(dev[g]) > worst:
            worst = float(dev[g])
            witness = {
                "principal": i + 1,
                "action": grid[g],
                "bid": float(profile.values[i][g]),
                "truthful_bid": float(row[g]),
            }
    passed = worst <= tol
    return CheckReport(
        name="truthful",
        passed=passed,
        residual=worst,
        witness=None if passed else witness,
        details={"targets": list(targets)},
    )
