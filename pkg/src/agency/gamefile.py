"""JSON game definitions and candidate files.

A game definition stores utilities, bid bounds, and schedules as
expression strings (see docs/expression-grammar.md), so a game is fully
described by one JSON document.  Candidates store a proposed action,
per-principal bid schedules as knot lists, and the reference utility
levels the schedules answer to.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .equilibrium import Candidate, candidate_at
from .expr import free_names, parse, substitute_params
from .expr import evaluate_vec as _eval
from .games import (
    ActionSpace,
    ActionSymmetry,
    BidBounds,
    GameError,
    GameSpec,
    build_profile,
)

GAME_SCHEMA_VERSION = 1
CANDIDATE_SCHEMA_VERSION = 1


def _action_space(raw) -> ActionSpace:
    kind = raw.get("kind", "interval")
    if kind == "finite":
        pts = [tuple(p) if isinstance(p, (list, tuple)) else float(p)
               for p in raw["points"]]
        return ActionSpace(kind="finite", points=tuple(pts))
    bounds = tuple((float(lo), float(hi)) for lo, hi in raw["bounds"])
    breakpoints = tuple(tuple(float(x) for x in dim)
                        for dim in raw.get("breakpoints", ()))
    return ActionSpace(kind=kind, bounds=bounds, breakpoints=breakpoints,
                       resolution=int(raw.get("resolution", 201)))


def _action_vars(space: ActionSpace) -> frozenset[str]:
    names = {f"a{d + 1}" for d in range(space.ndim)}
    if space.ndim == 1:
        names.add("a")
    return frozenset(names)


def _action_env(space: ActionSpace, action) -> dict:
    if space.ndim == 1:
        return {"a": action, "a1": action}
    return {f"a{d + 1}": action[d] for d in range(space.ndim)}


def _bid_env(n: int, bids, i: int | None) -> dict:
    env = {f"b{j + 1}": bids[j] for j in range(n)}
    total = bids[0]
    for j in range(1, n):
        total = total + bids[j]
    env["bsum"] = total
    if i is not None:
        env["b_self"] = bids[i]
        env["bsum_others"] = total - bids[i]
    return env


def _compile(source: str, params, allowed, where: str):
    text = substitute_params(source, params) if params else source
    try:
        tree = parse(text, allowed)
    except Exception as exc:
        raise GameError(f"bad expression for {where}: {exc}") from exc
    return tree


def load_game(defn) -> GameSpec:
    """Build a GameSpec from a definition mapping (parsed JSON)."""
    try:
        n = int(defn["n"])
        space = _action_space(defn["action_space"])
        raw_principals = list(defn["principals"])
        agent_src = defn["agent_utility"]
    except KeyError as exc:
        raise GameError(f"game definition missing {exc.args[0]!r}") from None
    if len(raw_principals) != n:
        raise GameError(f"need {n} principal entries, got {len(raw_principals)}")

    params = dict(defn.get("params") or {})
    action_vars = _action_vars(space)
    bid_vars = frozenset({f"b{j + 1}" for j in range(n)}
                         | {"bsum", "bsum_others", "b_self"})
    full_vars = action_vars | bid_vars

    agent_tree = _compile(agent_src, params, full_vars, "agent_utility")

    envelope = defn.get("bid_envelope")
    if envelope is None:
        raise GameError("game definition missing 'bid_envelope'")
    if envelope and not isinstance(envelope[0], (list, tuple)):
        envelope = [envelope] * n
    if len(envelope) != n:
        raise GameError("bid_envelope must be one [lo, hi] pair or one per principal")

    def agent_utility(action, bids, _tree=agent_tree):
        env = _action_env(space, action)
        env.update(_bid_env(n, bids, None))
        return _eval(_tree, env)

    principal_fns = []
    bounds = []
    for i, raw in enumerate(raw_principals):
        u_tree = _compile(raw["utility"], params, full_vars, f"principal {i + 1} utility")
        lo_tree = _compile(raw["lower_bound"], params, action_vars,
                           f"principal {i + 1} lower_bound")
        hi_tree = _compile(raw["upper_bound"], params, action_vars,
                           f"principal {i + 1} upper_bound")
        for tree, label in ((lo_tree, "lower_bound"), (hi_tree, "upper_bound")):
            stray = free_names(tree) - action_vars
            if stray:
                raise GameError(f"principal {i + 1} {label} uses non-action names {sorted(stray)}")

        def utility(action, bids, _tree=u_tree, _i=i):
            env = _action_env(space, action)
            env.update(_bid_env(n, bids, _i))
            return _eval(_tree, env)

        def lower(action, _tree=lo_tree):
            return _eval(_tree, _action_env(space, action))

        def upper(action, _tree=hi_tree):
            return _eval(_tree, _action_env(space, action))

        principal_fns.append(utility)
        gmin, gmax = envelope[i]
        bounds.append(BidBounds(lower=lower, upper=upper,
                                global_min=float(gmin), global_max=float(gmax)))

    symmetry = None
    if defn.get("action_symmetry"):
        raw_sym = defn["action_symmetry"]
        symmetry = ActionSymmetry(kind=raw_sym["kind"],
                                  center=float(raw_sym.get("center", 0.0)))

    return GameSpec(
        name=str(defn.get("name", "game")),
        n=n,
        action_space=space,
        agent_utility=agent_utility,
        principal_utilities=tuple(principal_fns),
        bid_bounds=tuple(bounds),
        own_bid_direction=tuple(int(d) for d in defn["own_bid_direction"]),
        agent_bid_direction=int(defn["agent_bid_direction"]),
        flags=frozenset(defn.get("flags", ())),
        action_symmetry=symmetry,
    )


def load_game_file(path) -> tuple[GameSpec, dict]:
    with open(path) as fh:
        defn = json.load(fh)
    version = defn.get("schema_version", GAME_SCHEMA_VERSION)
    if version != GAME_SCHEMA_VERSION:
        raise GameError(f"unsupported game schema_version {version!r}")
    return load_game(defn), defn


def save_game(defn, path) -> None:
    doc = {"schema_version": GAME_SCHEMA_VERSION}
    doc.update(defn)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# candidates

def _interp_knots(entry, xs: np.ndarray) -> np.ndarray:
    if "constant" in entry:
        return np.full(len(xs), float(entry["constant"]))
    knots = sorted((float(a), float(b)) for a, b in entry["knots"])
    ka = np.asarray([a for a, _ in knots])
    kb = np.asarray([b for _, b in knots])
    if entry.get("step"):
        idx = np.clip(np.searchsorted(ka, xs, side="right") - 1, 0, len(ka) - 1)
        return kb[idx]
    return np.interp(xs, ka, kb)


def load_candidate(data, game: GameSpec, resolution: int | None = None) -> Candidate:
    grid = game.grid(resolution)
    values = np.empty((game.n, len(grid)))
    steps = []
    entries = list(data["profile"])
    if len(entries) != game.n:
        raise GameError(f"candidate needs {game.n} profile entries, got {len(entries)}")
    if any("knots" in e for e in entries) and not game.action_space.scalar:
        raise GameError("knot schedules only apply to one-dimensional actions")
    xs = (grid.axes[0] if grid.axes is not None
          else np.asarray([float(p) for p in grid]))
    for i, entry in enumerate(entries):
        values[i] = _interp_knots(entry, xs)
        steps.append(bool(entry.get("step")))
    profile = build_profile(game, grid, values, steps)
    action = data["action"]
    if isinstance(action, list):
        action = tuple(action)
    targets = np.asarray(data["u_star"], dtype=float)
    if targets.shape != (game.n,):
        raise GameError(f"u_star must list {game.n} levels")
    return candidate_at(game, profile, targets, action,
                        meta={"schema_version": int(data.get("schema_version", 1))})


def load_candidate_file(path, game: GameSpec, resolution: int | None = None) -> Candidate:
    with open(path) as fh:
        data = json.load(fh)
    version = data.get("schema_version", CANDIDATE_SCHEMA_VERSION)
    if version != CANDIDATE_SCHEMA_VERSION:
        raise GameError(f"unsupported candidate schema_version {version!r}")
    return load_candidate(data, game, resolution)


def save_candidate(cand: Candidate, path) -> None:
    profile = cand.profile
    grid = profile.grid
    if grid.axes is not None and grid.scalar:
        xs = grid.axes[0]
    elif grid.explicit is not None and grid.scalar:
        xs = np.asarray([float(p) for p in grid])
    else:
        raise GameError("candidate files need a one-dimensional action grid")
    entries = []
    for i in range(profile.n):
        entries.append({"knots": [[float(x), float(b)] for x, b in zip(xs, profile.values[i])],
                        "step": bool(profile.step[i])})
    action = cand.action
    if isinstance(action, tuple):
        action = list(action)
    doc = {"schema_version": CANDIDATE_SCHEMA_VERSION,
           "action": action,
           "u_star": [float(t) for t in cand.targets],
           "profile": entries}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
