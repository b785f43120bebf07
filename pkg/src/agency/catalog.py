"""Built-in example games.

Each entry is a JSON-able definition (expression strings throughout, so
the corpus files in games/ are a faithful export) plus whatever outcome
is known in closed form: a certified equilibrium, a profile kept around
because the certificate rejects it in an instructive way, or a reference
allocation for dominance work.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .equilibrium import Candidate, candidate_at
from .expr import evaluate_vec, parse
from .gamefile import _action_env, _action_vars, load_game, save_game
from .games import ActionSpace, GameError, GameSpec, build_profile


@dataclass(frozen=True)
class Benchmark:
    """A named allocation with its utility vector (agent first)."""

    action: object
    bids: tuple
    utilities: tuple


@dataclass(frozen=True)
class ClosedForm:
    """Known outcome of a builtin game.

    ``status`` is "equilibrium" when the certificate accepts the stored
    allocation, "rejected" when it is stored precisely because a named
    condition throws it out.  ``profile`` gives the bid schedules as
    expressions in the action variables.
    """

    action: object
    bids: tuple
    utilities: tuple
    targets: tuple
    profile: tuple
    status: str
    condition: str | None = None
    note: str = ""
    benchmarks: Mapping[str, Benchmark] = field(default_factory=dict)
    extras: Mapping[str, object] = field(default_factory=dict)

    def __call__(self, name: str) -> Benchmark:
        return self.benchmarks[name]


@dataclass(frozen=True)
class GameBundle:
    spec: GameSpec
    definition: dict
    closed_form: ClosedForm | None = None
    reference: Benchmark | None = None

    @property
    def name(self) -> str:
        return self.spec.name


def _named(defn: dict, base: str, params: dict, defaults: dict) -> dict:
    off = {k: v for k, v in sorted(params.items()) if v != defaults[k]}
    if off:
        inner = ",".join(f"{k}={v:g}" for k, v in off.items())
        defn["name"] = f"{base}[{inner}]"
    else:
        defn["name"] = base
    return defn


# ---------------------------------------------------------------------------
# builders

def _linear_cap() -> GameBundle:
    defn = {
        "name": "linear_cap",
        "n": 2,
        "action_space": {"kind": "interval", "bounds": [[0.0, 1.0]], "resolution": 201},
        "agent_utility": "bsum",
        "principals": [
            {"utility": "a - b1", "lower_bound": "0", "upper_bound": "a"},
            {"utility": "a - b2", "lower_bound": "0", "upper_bound": "a"},
        ],
        "bid_envelope": [0.0, 1.0],
        "own_bid_direction": [-1, -1],
        "agent_bid_direction": 1,
        "flags": ["symmetric", "cumulative", "no_externalities",
                  "differentiable", "quasi_concave"],
    }
    cf = ClosedForm(
        action=1.0, bids=(0.0, 0.0), utilities=(0.0, 1.0, 1.0),
        targets=(1.0, 1.0), profile=("0", "0"), status="equilibrium",
        note="zero bids at the top action: each principal keeps the full cap")
    return GameBundle(load_game(defn), defn, closed_form=cf)


def _kinked_cap() -> GameBundle:
    defn = {
        "name": "kinked_cap",
        "n": 2,
        "action_space": {"kind": "interval", "bounds": [[0.0, 1.0]],
                         "breakpoints": [[0.5]], "resolution": 201},
        "agent_utility": "if(a <= 0.5, bsum - 2*a, bsum - 1)",
        "principals": [
            {"utility": "a - b1", "lower_bound": "0", "upper_bound": "0.5"},
            {"utility": "a - b2", "lower_bound": "0", "upper_bound": "0.5"},
        ],
        "bid_envelope": [0.0, 0.5],
        "own_bid_direction": [-1, -1],
        "agent_bid_direction": 1,
        "flags": ["symmetric", "cumulative", "no_externalities",
                  "differentiable", "quasi_concave"],
    }
    cf = ClosedForm(
        action=0.0, bids=(0.0, 0.0), utilities=(0.0, 0.0, 0.0),
        targets=(0.0, 0.0), profile=("min(a, 0.5)", "min(a, 0.5)"),
        status="rejected", condition="Bii",
        note="level-matching schedule at zero reference; every action above "
             "the kink leaves both principals strictly better off")
    return GameBundle(load_game(defn), defn, closed_form=cf)


def _spillover(gamma: float = 2.0) -> GameBundle:
    gamma = float(gamma)
    if gamma > 0:
        ext = ["positive_externalities"]
    elif gamma < 0:
        ext = ["negative_externalities"]
    else:
        ext = ["no_externalities"]
    defn = _named({
        "n": 2,
        "params": {"gamma": gamma},
        "action_space": {"kind": "interval", "bounds": [[0.0, 1.0]], "resolution": 201},
        "agent_utility": "bsum",
        "principals": [
            {"utility": "a - b_self + gamma*bsum_others",
             "lower_bound": "0", "upper_bound": "a"},
        ] * 2,
        "bid_envelope": [0.0, 1.0],
        "own_bid_direction": [-1, -1],
        "agent_bid_direction": 1,
        "flags": ["symmetric", "cumulative", "differentiable", "quasi_concave"] + ext,
    }, "spillover", {"gamma": gamma}, {"gamma": 2.0})
    cf = ClosedForm(
        action=1.0, bids=(0.0, 0.0), utilities=(0.0, 1.0, 1.0),
        targets=(1.0, 1.0), profile=("0", "0"), status="equilibrium",
        note="bidding war collapses to zero bids at the top action",
        benchmarks={
            "A": Benchmark(1.0, (1.0, 1.0), (2.0, gamma, gamma)),
            "B": Benchmark(1.0, (0.0, 0.0), (0.0, 1.0, 1.0)),
        })
    return GameBundle(load_game(defn), defn, closed_form=cf)


def _spillover_averse() -> GameBundle:
    defn = {
        "name": "spillover_averse",
        "n": 2,
        "action_space": {"kind": "interval", "bounds": [[0.0, 1.0]], "resolution": 201},
        "agent_utility": "-bsum",
        "principals": [
            {"utility": "a - b_self + 2*bsum_others",
             "lower_bound": "0", "upper_bound": "a"},
        ] * 2,
        "bid_envelope": [0.0, 1.0],
        "own_bid_direction": [-1, -1],
        "agent_bid_direction": -1,
        "flags": ["symmetric", "cumulative", "differentiable", "quasi_concave",
                  "positive_externalities"],
    }
    cf = ClosedForm(
        action=1.0, bids=(0.0, 0.0), utilities=(0.0, 1.0, 1.0),
        targets=(1.0, 1.0), profile=("0", "0"),
        status="rejected", condition="Aii",
        note="a plain equilibrium (and efficient), but with the agent paying "
             "for bids the outside-option equality cannot hold",
        benchmarks={"B": Benchmark(1.0, (0.0, 0.0), (0.0, 1.0, 1.0))})
    return GameBundle(load_game(defn), defn, closed_form=cf)


def _split_market(c: float = 1.0, qbar: float = 2.0, pbar: float = 7.0) -> GameBundle:
    c, qbar, pbar = float(c), float(qbar), float(pbar)
    if c <= 0 or qbar <= 0:
        raise GameError("split_market needs c > 0 and qbar > 0")
    if pbar <= 3 * c * qbar:
        raise GameError("split_market needs pbar > 3*c*qbar")
    defn = _named({
        "n": 2,
        "params": {"c": c, "qbar": qbar, "pbar": pbar},
        "action_space": {"kind": "interval", "bounds": [[0.0, qbar]], "resolution": 201},
        "agent_utility": "-(b1*a + b2*(qbar - a))",
        "principals": [
            {"utility": "(b1 - c*a)*a",
             "lower_bound": "c*a", "upper_bound": "pbar"},
            {"utility": "(b2 - c*(qbar - a))*(qbar - a)",
             "lower_bound": "c*(qbar - a)", "upper_bound": "pbar"},
        ],
        "bid_envelope": [0.0, pbar],
        "own_bid_direction": [1, 1],
        "agent_bid_direction": -1,
        "flags": ["symmetric", "no_externalities", "differentiable"],
        "action_symmetry": {"kind": "reflect", "center": qbar / 2},
    }, "split_market", {"c": c, "qbar": qbar, "pbar": pbar},
        {"c": 1.0, "qbar": 2.0, "pbar": 7.0})
    profit = c * qbar ** 2 / 2
    price = 3 * c * qbar / 2
    knee = (pbar - math.sqrt(pbar ** 2 - 2 * (c * qbar) ** 2)) / (2 * c)

    def schedule(q_expr: str) -> str:
        safe = f"max({q_expr}, 1e-12)"
        return f"min({pbar!r}, ({profit!r} + {c!r}*pow({safe}, 2))/{safe})"

    cf = ClosedForm(
        action=qbar / 2, bids=(price, price),
        utilities=(-price * qbar, profit, profit),
        targets=(profit, profit),
        profile=(schedule("a"), schedule(f"{qbar!r} - a")),
        status="equilibrium",
        note="even split at one-and-a-half times marginal cost; the price "
             "schedule caps at the ceiling below the knee quantity",
        extras={"knee": knee, "price": price, "quantity": qbar / 2,
                "profit": profit})
    return GameBundle(load_game(defn), defn, closed_form=cf)


def _public_goods_lobby(n: int = 2, e: float = 1.0) -> GameBundle:
    n = int(n)
    e = float(e)
    if n not in (2, 3):
        raise GameError("public_goods_lobby supports n = 2 or 3 at desk scale")
    if e <= 0:
        raise GameError("public_goods_lobby needs e > 0")
    if n == 2:
        space = {"kind": "interval", "bounds": [[-e, e]], "resolution": 201}
        uppers = ["max(0, e + a)", "max(0, e - a)"]
        symmetry = {"kind": "zero_sum"}
    else:
        space = {"kind": "product", "bounds": [[-e, e], [-e, e]], "resolution": 41}
        uppers = ["max(0, e + a1)", "max(0, e + a2)", "max(0, e - (a1 + a2))"]
        symmetry = {"kind": "zero_sum"}
    principals = [{"utility": "pow((ne - bsum)/k, 2)",
                   "lower_bound": "0", "upper_bound": up} for up in uppers]
    defn = _named({
        "n": n,
        "params": {"e": e, "ne": n * e, "k": n + 1},
        "action_space": space,
        "agent_utility": "bsum",
        "principals": principals,
        "bid_envelope": [0.0, n * e],
        "own_bid_direction": [-1] * n,
        "agent_bid_direction": 1,
        "flags": ["symmetric", "cumulative", "differentiable", "quasi_concave",
                  "negative_externalities"],
        "action_symmetry": symmetry,
    }, "public_goods_lobby", {"n": n, "e": e}, {"n": 2, "e": 1.0})
    g, G = public_good_stage(n, (e,) * n)
    level = G * G
    action = 0.0 if n == 2 else (0.0,) * (n - 1)
    cf = ClosedForm(
        action=action, bids=(0.0,) * n,
        utilities=(0.0,) + (level,) * n,
        targets=(level,) * n, profile=("0",) * n,
        status="equilibrium",
        note="no bribes at any transfer vector; the donation stage alone "
             "pins every principal's value",
        extras={"g": g, "G": G})
    return GameBundle(load_game(defn), defn, closed_form=cf)


def _cross_game(name: str, principals: list, cap: float, flags: list,
                reference: Benchmark) -> GameBundle:
    defn = {
        "name": name,
        "n": 2,
        "action_space": {"kind": "interval", "bounds": [[0.0, 1.0]], "resolution": 201},
        "agent_utility": "bsum",
        "principals": [dict(p, lower_bound="0", upper_bound=f"{cap!r}")
                       for p in principals],
        "bid_envelope": [0.0, cap],
        "own_bid_direction": [-1, -1],
        "agent_bid_direction": 1,
        "flags": flags,
    }
    return GameBundle(load_game(defn), defn, reference=reference)


def _cross_linear() -> GameBundle:
    return _cross_game(
        "cross_linear",
        [{"utility": "a - b_self - 2*bsum_others"}] * 2, 5.0,
        ["symmetric", "cumulative", "differentiable", "quasi_concave",
         "negative_externalities"],
        Benchmark(0.0, (1.0, 1.0), (2.0, -3.0, -3.0)))


def _cross_linear_skew() -> GameBundle:
    return _cross_game(
        "cross_linear_skew",
        [{"utility": "a - b1 - 2*b2"}, {"utility": "a - b1 - 4*b2"}], 5.0,
        ["cumulative", "differentiable", "quasi_concave",
         "negative_externalities"],
        Benchmark(0.0, (1.0, 1.0), (2.0, -3.0, -5.0)))


def _cross_quadratic() -> GameBundle:
    return _cross_game(
        "cross_quadratic",
        [{"utility": "a - b_self - pow(bsum_others, 2)"}] * 2, 3.0,
        ["symmetric", "cumulative", "differentiable", "quasi_concave",
         "negative_externalities"],
        Benchmark(0.0, (1.0, 1.0), (2.0, -2.0, -2.0)))


def _cross_sqrt() -> GameBundle:
    return _cross_game(
        "cross_sqrt",
        [{"utility": "a - b_self - 2*sqrt(bsum_others)"}] * 2, 3.0,
        ["symmetric", "cumulative", "differentiable",
         "negative_externalities"],
        Benchmark(0.0, (1.0, 1.0), (2.0, -3.0, -3.0)))


# ---------------------------------------------------------------------------
# public surface

CATALOG = {
    "linear_cap": _linear_cap,
    "kinked_cap": _kinked_cap,
    "spillover": _spillover,
    "spillover_averse": _spillover_averse,
    "split_market": _split_market,
    "public_goods_lobby": _public_goods_lobby,
    "cross_linear": _cross_linear,
    "cross_linear_skew": _cross_linear_skew,
    "cross_quadratic": _cross_quadratic,
    "cross_sqrt": _cross_sqrt,
}

ALIASES = {
    "market": "split_market",
    "lobbying": "public_goods_lobby",
}

# canonical audit set: one row per headline verdict table entry
BATTERY = (
    ("linear_cap", {}),
    ("kinked_cap", {}),
    ("spillover", {"gamma": 2.0}),
    ("spillover", {"gamma": 0.5}),
    ("spillover_averse", {}),
    ("split_market", {}),
    ("public_goods_lobby", {}),
    ("cross_linear", {}),
)


def names() -> list[str]:
    return list(CATALOG)


def get_game(name: str, **params) -> GameBundle:
    key = ALIASES.get(name, name)
    try:
        builder = CATALOG[key]
    except KeyError:
        known = ", ".join(sorted(set(CATALOG) | set(ALIASES)))
        raise GameError(f"unknown game {name!r}; available: {known}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise GameError(f"bad parameters for {key}: {exc}") from None


def battery_games() -> list[GameBundle]:
    return [get_game(nm, **ps) for nm, ps in BATTERY]


def closed_form_candidate(bundle: GameBundle, resolution: int | None = None) -> Candidate:
    """Materialize the stored outcome as a grid candidate for the verifier."""
    cf = bundle.closed_form
    if cf is None:
        raise GameError(f"{bundle.name} has no closed form on record")
    game = bundle.spec
    grid = game.grid(resolution)
    space = game.action_space
    env = _action_env(space, grid.action_arg())
    allowed = _action_vars(space)
    G = len(grid)
    values = np.empty((game.n, G))
    for i, source in enumerate(cf.profile):
        node = parse(source, allowed)
        values[i] = np.broadcast_to(np.asarray(evaluate_vec(node, env), float), (G,))
    profile = build_profile(game, grid, values)
    return candidate_at(game, profile, cf.targets, cf.action,
                        meta={"source": "closed_form", "status": cf.status})


DESCRIPTIONS = {
    "linear_cap": "two principals value the action one-for-one, bids capped by the action",
    "kinked_cap": "linear_cap with a kinked agent cost and bids capped at the kink",
    "spillover": "a principal gains gamma per unit of the rival's bid",
    "spillover_averse": "spillover with gamma=2 and an agent who dislikes money",
    "split_market": "two buyers post price schedules for shares of a fixed supply",
    "public_goods_lobby": "transfer-then-donate stage game; bids sway the transfer split",
    "cross_linear": "bids hurt the rival twice as much as the bidder",
    "cross_linear_skew": "cross_linear with asymmetric damage rates",
    "cross_quadratic": "rival damage grows with the square of the bid",
    "cross_sqrt": "rival damage grows with the square root of the bid",
}


def public_good_stage(n: int, endowments) -> tuple[tuple, float]:
    """Donation-stage split for given endowments: each member keeps
    everything above the common pool share, the pool gets the rest.
    Negative keeps are allowed (and meaningful) for skewed endowments."""
    n = int(n)
    if n < 2:
        raise GameError("public_good_stage needs n >= 2")
    e = tuple(float(x) for x in endowments)
    if len(e) != n:
        raise GameError(f"need {n} endowments, got {len(e)}")
    pool = sum(e) / (n + 1)
    return tuple(x - pool for x in e), pool


def finite_variant(spec: GameSpec, points) -> GameSpec:
    """Same game on an explicit finite action set (for enumeration work)."""
    pts = tuple(tuple(p) if isinstance(p, (list, tuple)) else float(p)
                for p in points)
    return dataclasses.replace(spec, action_space=ActionSpace(kind="finite", points=pts))


def export_corpus(dest) -> list[str]:
    """Write every catalogue entry (canonical parameters) as a game file."""
    os.makedirs(dest, exist_ok=True)
    written = []
    for name in CATALOG:
        bundle = get_game(name)
        path = os.path.join(dest, f"{name}.json")
        save_game(bundle.definition, path)
        written.append(path)
    return written
