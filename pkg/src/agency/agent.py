"""Agent-side optimization: argmax sets over a profile and outside options."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import INCREASING, BiddingProfile, GameError, GameSpec, profile_utilities

# relative tolerance for membership in the argmax set
ARGMAX_TOL = 1e-9


@dataclass
class AgentChoice:
    """Agent values along a profile plus the near-argmax index set."""

    values: np.ndarray
    best: float
    indices: np.ndarray
    tol: float

    def __contains__(self, g: int) -> bool:
        return bool(self.values[g] >= self.best - self.tol)


def argmax_set(game: GameSpec, profile: BiddingProfile, values: np.ndarray | None = None) -> AgentChoice:
    """Grid indices whose agent utility is within 1e-9 (scaled) of the max."""
    if values is None:
        values = profile_utilities(game, profile)[0]
    best = float(np.max(values))
    tol = ARGMAX_TOL * max(1.0, abs(best))
    indices = np.flatnonzero(values >= best - tol)
    return AgentChoice(values=values, best=best, indices=indices, tol=tol)


@dataclass
class OutsideOption:
    """Best the agent can do once principal i's bid is pinned to the
    envelope bound the agent likes least."""

    principal: int
    value: float
    index: int
    pinned_bid: float


def outside_option(game: GameSpec, i: int, profile: BiddingProfile) -> OutsideOption:
    if game.agent_bid_direction == INCREASING:
        pin = game.bid_bounds[i].global_min
    else:
        pin = game.bid_bounds[i].global_max
    values = profile.values.copy()
    values[i, :] = pin
    act = profile.grid.action_arg()
    bids = [values[j] for j in range(game.n)]
    u0 = np.broadcast_to(np.asarray(game.agent_utility(act, bids), dtype=float),
                         (len(profile.grid),))
    if not np.all(np.isfinite(u0)):
        g = int(np.flatnonzero(~np.isfinite(u0))[0])
        raise GameError(f"non-finite agent utility at action {profile.grid[g]!r} "
                        f"with principal {i + 1} pinned to {pin}")
    g = int(np.argmax(u0))
    return OutsideOption(principal=i, value=float(u0[g]), index=g, pinned_bid=float(pin))
