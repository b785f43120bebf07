"""Sampled audits of the structural conditions the certificates lean on.

Every condition checked here quantifies over a continuum (all feasible
bids, all actions, all pairs), so the verdicts are produced by seeded
sampling and finite differencing.  A passing report means "no violation
found at sample size N with this seed", never a proof; a failing report
always carries a concrete witness.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .games import (
    DECREASING,
    INCREASING,
    GameError,
    GameSpec,
    bounds_on_grid,
    evaluate,
    profile_utilities,
)
from .reports import CheckReport

DEFAULT_SAMPLES = 10_000

# sign-definite finite differences: plateaus count as violations
FD_SIGN_MARGIN = 1e-12
# dominance margin for the small-externalities inequality
SMALL_EXT_MARGIN = 1e-9
# functional identities (cumulative, symmetric, no-externalities)
IDENTITY_TOL = 1e-9
QC_SLACK = 1e-9
CONFLICT_STRICT = 1e-6
CONFLICT_WEAK = 1e-9
BOUND_SHAPE_TOL = 1e-12
PAIR_GUARD = 10**7


# ---------------------------------------------------------------------------
# feasible sampling

def _sample_actions(game: GameSpec, count: int, rng) -> list:
    space = game.action_space
    if space.kind == "finite":
        idx = rng.integers(0, len(space.points), size=count)
        return [space.points[int(k)] for k in idx]
    lows = np.asarray([lo for lo, _ in space.bounds], dtype=float)
    highs = np.asarray([hi for _, hi in space.bounds], dtype=float)
    pts = lows + rng.random((count, lows.size)) * (highs - lows)
    if space.scalar:
        return [float(p[0]) for p in pts]
    return [tuple(float(x) for x in p) for p in pts]


def _interval(game: GameSpec, i: int, action) -> tuple[float, float]:
    lo = float(game.bid_bounds[i].lower(action))
    hi = float(game.bid_bounds[i].upper(action))
    if hi < lo - 1e-12:
        raise GameError(f"inverted bid bounds for principal {i} at action {action!r}")
    return lo, max(lo, hi)


class FeasibleSamples:
    """Random feasible (action, bids) pairs, with the per-sample bid
    intervals kept around for finite-difference stencils."""

    def __init__(self, game: GameSpec, count: int, seed: int):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.actions = _sample_actions(game, count, rng)
        mix = rng.random((count, game.n))
        self.lo = np.empty((count, game.n))
        self.hi = np.empty((count, game.n))
        for k, act in enumerate(self.actions):
            for i in range(game.n):
                self.lo[k, i], self.hi[k, i] = _interval(game, i, act)
        self.bids = self.lo + mix * (self.hi - self.lo)

    def __len__(self):
        return len(self.actions)


def sample_feasible(game: GameSpec, count: int = DEFAULT_SAMPLES, seed: int = 0) -> FeasibleSamples:
    return FeasibleSamples(game, count, seed)


# ---------------------------------------------------------------------------
# finite differences

def _fd_step(game: GameSpec, i: int) -> float:
    bb = game.bid_bounds[i]
    return 1e-6 * (bb.global_max - bb.global_min)


def _stencil(game: GameSpec, act, bids, i: int, lo: float, hi: float):
    """Utility vectors at b_i +/- h (one-sided at the interval edge) and
    the step actually taken.  None when the interval cannot separate the
    two stencil points."""
    h = _fd_step(game, i)
    b = float(bids[i])
    up, dn = min(b + h, hi), max(b - h, lo)
    if up - dn < 0.5 * h:
        return None
    row = np.array(bids, dtype=float)
    row[i] = up
    u_up = evaluate(game, act, row)
    row[i] = dn
    u_dn = evaluate(game, act, row)
    return u_up, u_dn, up - dn


# ---------------------------------------------------------------------------
# A1 / A2

def check_monotonicity(game: GameSpec, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                       grid=None) -> dict[str, CheckReport]:
    """Sign audit of the two opposing-monotonicity patterns.

    A1: every principal strictly worse off in her own bid, the agent
    strictly better off in every bid, and the lower bid bound pinned at
    the envelope floor.  A2 is the mirror (principals up, agent down,
    upper bound pinned at the ceiling).  Derivatives are two-sided
    finite differences at sampled feasible points; a plateau fails.
    """
    draws = sample_feasible(game, samples, seed)
    if grid is None:
        grid = game.grid()

    lower, upper = bounds_on_grid(game, grid)
    shape = {"A1": None, "A2": None}
    for i in range(game.n):
        bb = game.bid_bounds[i]
        off_lo = np.abs(lower[i] - bb.global_min) > BOUND_SHAPE_TOL
        off_hi = np.abs(upper[i] - bb.global_max) > BOUND_SHAPE_TOL
        if shape["A1"] is None and off_lo.any():
            g = int(np.argmax(off_lo))
            shape["A1"] = {"kind": "lower-bound-shape", "principal": i,
                           "action": grid[g], "bound": float(lower[i, g]),
                           "floor": bb.global_min}
        if shape["A2"] is None and off_hi.any():
            g = int(np.argmax(off_hi))
            shape["A2"] = {"kind": "upper-bound-shape", "principal": i,
                           "action": grid[g], "bound": float(upper[i, g]),
                           "ceiling": bb.global_max}

    count = len(draws)
    own = np.full((count, game.n), np.nan)
    agent = np.full((count, game.n), np.nan)
    for k in range(count):
        act, b = draws.actions[k], draws.bids[k]
        for i in range(game.n):
            st = _stencil(game, act, b, i, draws.lo[k, i], draws.hi[k, i])
            if st is None:
                continue
            u_up, u_dn, dh = st
            own[k, i] = (u_up[1 + i] - u_dn[1 + i]) / dh
            agent[k, i] = (u_up[0] - u_dn[0]) / dh
    skipped = int(np.isnan(own).sum())

    def verdict(name: str, own_sign: int, agent_sign: int) -> CheckReport:
        details = {"samples": count, "seed": seed, "skipped": skipped,
                   "margin": FD_SIGN_MARGIN}
        if shape[name] is not None:
            return CheckReport(name, False, 0.0, shape[name], details)
        for k in range(count):
            for i in range(game.n):
                for kind, val, sign in (("own-bid", own[k, i], own_sign),
                                        ("agent", agent[k, i], agent_sign)):
                    if math.isnan(val):
                        continue
                    gap = sign * val - FD_SIGN_MARGIN
                    if gap <= 0:
                        witness = {"kind": f"{kind}-sign", "sample": k,
                                   "principal": i,
                                   "action": draws.actions[k],
                                   "bids": draws.bids[k].tolist(),
                                   "derivative": float(val)}
                        return CheckReport(name, False, float(-gap), witness, details)
        return CheckReport(name, True, 0.0, None, details)

    return {"A1": verdict("A1", -1, +1), "A2": verdict("A2", +1, -1)}


# ---------------------------------------------------------------------------
# conflict of interests

def _bid_mesh(game: GameSpec, act, resolution: int) -> np.ndarray:
    axes = []
    for i in range(game.n):
        lo, hi = _interval(game, i, act)
        axes.append(np.linspace(lo, hi, resolution))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _mesh_utilities(game: GameSpec, act, mesh: np.ndarray) -> np.ndarray:
    out = np.empty((len(mesh), game.n + 1))
    for g, row in enumerate(mesh):
        out[g] = evaluate(game, act, row)
    return out


def check_conflict(game: GameSpec, actions=8, bid_resolution: int = 21,
                   symmetric: bool | None = None, seed: int = 0,
                   strict: float = CONFLICT_STRICT, weak: float = CONFLICT_WEAK,
                   guard: int = PAIR_GUARD) -> CheckReport:
    """Look for bid pairs at a fixed action where either the agent gains
    with no principal strictly losing, or every principal gains with the
    agent not strictly losing.  Either pattern defeats the no-mutual-gain
    condition and is returned as a witness.

    ``actions`` is a sample count or an explicit list of actions.  When
    ``symmetric`` (default: the game's flag), reference bids are
    restricted to equal-bid profiles on the common feasible interval;
    comparison bids always range over the full product mesh.
    """
    if symmetric is None:
        symmetric = "symmetric" in game.flags
    if isinstance(actions, int):
        rng = np.random.default_rng(seed)
        action_list = _sample_actions(game, actions, rng)
    else:
        action_list = list(actions)

    details = {"actions": len(action_list), "bid_resolution": bid_resolution,
               "symmetric_references": bool(symmetric), "seed": seed,
               "strict": strict, "weak": weak}
    for act in action_list:
        mesh = _bid_mesh(game, act, bid_resolution)
        if symmetric:
            lo = max(_interval(game, i, act)[0] for i in range(game.n))
            hi = min(_interval(game, i, act)[1] for i in range(game.n))
            if hi < lo:
                continue
            levels = np.linspace(lo, hi, bid_resolution)
            refs = np.repeat(levels[:, None], game.n, axis=1)
        else:
            refs = mesh
        if len(refs) * len(mesh) > guard:
            raise GameError("conflict scan exceeds the pair guard; "
                            "lower bid_resolution or the action count")
        mu = _mesh_utilities(game, act, mesh)
        ru = mu if refs is mesh else _mesh_utilities(game, act, refs)

        du0 = mu[None, :, 0] - ru[:, None, 0]
        dup = mu[None, :, 1:] - ru[:, None, 1:]
        agent_gain = (du0 > strict) & np.all(dup >= -weak, axis=2)
        principal_gain = np.all(dup > strict, axis=2) & (du0 >= -weak)
        viol = agent_gain | principal_gain
        if viol.any():
            flat = int(np.argmax(viol))
            r, g = divmod(flat, len(mesh))
            direction = "agent-gain" if agent_gain[r, g] else "principal-gain"
            gain = du0[r, g] if direction == "agent-gain" else float(dup[r, g].min())
            witness = {"action": act, "direction": direction,
                       "reference_bids": refs[r].tolist(),
                       "bids": mesh[g].tolist(),
                       "agent_delta": float(du0[r, g]),
                       "principal_deltas": dup[r, g].tolist()}
            return CheckReport("C", False, float(gain), witness, details)
    return CheckReport("C", True, 0.0, None, details)


# ---------------------------------------------------------------------------
# deep pockets

def _pin_side(game: GameSpec, i: int):
    """The bound whose bid wipes out principal i's leverage: the upper
    bound when her utility falls in her own bid, else the lower."""
    if game.own_bid_direction[i] == DECREASING:
        return lambda act: _interval(game, i, act)[1]
    return lambda act: _interval(game, i, act)[0]


def check_deep_pockets(game: GameSpec, cand=None, samples: int = 2000, seed: int = 0,
                       opponent_draws: int = 16, bid_resolution: int = 21,
                       grid=None) -> dict[str, CheckReport | None]:
    """D2 (uniform subsistence level): pinning a principal's bid at the
    exhausting bound yields a constant utility floor.  Tried first with
    each principal pinned alone against random feasible opponents, then
    with every bid pinned jointly; the certifying form is reported.

    D1 (reference dominance, needs ``cand``): no feasible pair may beat
    the candidate's utility vector for everyone while some action breaks
    the candidate's pointwise-dominance conclusion.
    """
    if grid is None:
        grid = game.grid()
    acts = list(grid)
    draws = sample_feasible(game, samples, seed)
    rng = np.random.default_rng(seed + 1)

    def constancy(values: np.ndarray):
        ref = float(values.flat[0])
        scale = max(1.0, abs(ref))
        spread = float(np.max(np.abs(values - ref)))
        return ref, spread, spread <= IDENTITY_TOL * scale

    def floor_holds(i: int, floor: float):
        scale = max(1.0, abs(floor))
        for k in range(len(draws)):
            u = evaluate(game, draws.actions[k], draws.bids[k])[1 + i]
            if u < floor - IDENTITY_TOL * scale:
                return {"kind": "floor", "principal": i, "sample": k,
                        "action": draws.actions[k],
                        "bids": draws.bids[k].tolist(),
                        "utility": float(u), "floor": floor}
        return None

    pins = [_pin_side(game, i) for i in range(game.n)]
    d2_details = {"samples": len(draws), "seed": seed,
                  "opponent_draws": opponent_draws}

    def per_principal():
        floors = []
        for i in range(game.n):
            vals = np.empty((len(acts), opponent_draws))
            for g, act in enumerate(acts):
                pinned = pins[i](act)
                for d in range(opponent_draws):
                    row = np.empty(game.n)
                    for j in range(game.n):
                        lo, hi = _interval(game, j, act)
                        row[j] = lo + rng.random() * (hi - lo)
                    row[i] = pinned
                    vals[g, d] = evaluate(game, act, row)[1 + i]
            ref, spread, const = constancy(vals)
            if not const:
                return None, {"kind": "not-constant", "principal": i,
                              "spread": spread, "value": ref}
            bad = floor_holds(i, ref)
            if bad is not None:
                return None, bad
            floors.append(ref)
        return floors, None

    def joint():
        floors = []
        for i in range(game.n):
            vals = np.empty(len(acts))
            for g, act in enumerate(acts):
                row = np.array([pins[j](act) for j in range(game.n)])
                vals[g] = evaluate(game, act, row)[1 + i]
            ref, spread, const = constancy(vals)
            if not const:
                return None, {"kind": "not-constant", "principal": i,
                              "spread": spread, "value": ref, "form": "joint"}
            bad = floor_holds(i, ref)
            if bad is not None:
                return None, bad
            floors.append(ref)
        return floors, None

    floors, fail = per_principal()
    if floors is not None:
        d2 = CheckReport("D2", True, 0.0, None,
                         dict(d2_details, form="per-principal", u_floor=floors))
    else:
        strict_fail = fail
        floors, fail = joint()
        if floors is not None:
            d2 = CheckReport("D2", True, 0.0, None,
                             dict(d2_details, form="joint-pinned", u_floor=floors,
                                  per_principal_failure=strict_fail))
        else:
            d2 = CheckReport("D2", False, 0.0, fail,
                             dict(d2_details, per_principal_failure=strict_fail))

    d1 = None
    if cand is not None:
        d1 = _check_reference_dominance(game, cand, bid_resolution)
    return {"D2": d2, "D1": d1}


def _check_reference_dominance(game: GameSpec, cand, bid_resolution: int,
                               guard: int = PAIR_GUARD) -> CheckReport:
    profile = cand.profile
    grid = profile.grid
    u0_ref = float(cand.utilities[0])
    up_ref = np.asarray(cand.utilities[1:], dtype=float)

    cu = profile_utilities(game, profile)  # utilities along the candidate profile
    breach = np.any(cu[1:, :] > up_ref[:, None] + CONFLICT_WEAK, axis=0)
    details = {"bid_resolution": bid_resolution,
               "actions_scanned": int(breach.sum())}
    if not breach.any():
        return CheckReport("D1", True, 0.0, None, details)

    work = int(breach.sum()) * bid_resolution ** game.n
    if work > guard:
        raise GameError("reference-dominance scan exceeds the pair guard")
    for g in np.flatnonzero(breach):
        act = grid[int(g)]
        mesh = _bid_mesh(game, act, bid_resolution)
        mu = _mesh_utilities(game, act, mesh)
        weakly_up = ((mu[:, 0] >= u0_ref - CONFLICT_WEAK)
                     & np.all(mu[:, 1:] >= up_ref[None, :] - CONFLICT_WEAK, axis=1))
        strict = ((mu[:, 0] > u0_ref + CONFLICT_STRICT)
                  | np.any(mu[:, 1:] > up_ref[None, :] + CONFLICT_STRICT, axis=1))
        premise = weakly_up & strict
        if premise.any():
            h = int(np.argmax(premise))
            along = cu[1:, int(g)]
            worst = int(np.argmax(along - up_ref))
            witness = {"action": act, "bids": mesh[h].tolist(),
                       "utilities": mu[h].tolist(),
                       "profile_utilities": along.tolist(),
                       "principal": worst}
            residual = float(along[worst] - up_ref[worst])
            return CheckReport("D1", False, residual, witness, details)
    return CheckReport("D1", True, 0.0, None, details)


# ---------------------------------------------------------------------------
# small externalities

def check_small_externalities(game: GameSpec, samples: int = DEFAULT_SAMPLES,
                              seed: int = 0) -> CheckReport:
    """Own-bid sensitivity must strictly dominate cross-bid sensitivity:
    |d u_i / d b_i| > |d u_i / d b_j| under negative cross effects, or
    > (n-1) times it under positive ones.  Applies only to games whose
    utilities run through own bid plus the others' total.
    """
    details = {"samples": samples, "seed": seed, "margin": SMALL_EXT_MARGIN}
    if not {"cumulative", "differentiable"} <= game.flags:
        missing = sorted({"cumulative", "differentiable"} - game.flags)
        return CheckReport("E", False, 0.0, None,
                           dict(details, verdict="not-applicable",
                                reason=f"needs flags {missing}"))
    if game.n < 2:
        return CheckReport("E", False, 0.0, None,
                           dict(details, verdict="not-applicable",
                                reason="single principal"))

    draws = sample_feasible(game, samples, seed)
    count = len(draws)
    own = np.full((count, game.n), np.nan)
    cross = np.full((count, game.n), np.nan)  # max |d u_i / d b_j| over j != i
    cross_sign = np.full((count, game.n), np.nan)
    for k in range(count):
        act, b = draws.actions[k], draws.bids[k]
        partials = np.full((game.n + 1, game.n), np.nan)
        for j in range(game.n):
            st = _stencil(game, act, b, j, draws.lo[k, j], draws.hi[k, j])
            if st is None:
                continue
            u_up, u_dn, dh = st
            partials[:, j] = (u_up - u_dn) / dh
        for i in range(game.n):
            own[k, i] = partials[1 + i, i]
            others = np.delete(partials[1 + i], i)
            if np.isnan(others).any():
                continue
            worst = int(np.argmax(np.abs(others)))
            cross[k, i] = abs(others[worst])
            cross_sign[k, i] = math.copysign(1.0, others[worst]) if others[worst] != 0 else 0.0

    valid = ~np.isnan(cross)
    details["skipped"] = int((~valid).sum())
    if not valid.any():
        return CheckReport("E", False, 0.0, None,
                           dict(details, verdict="not-applicable",
                                reason="bid intervals too thin to difference"))

    signs = cross_sign[valid & (cross > FD_SIGN_MARGIN)]
    if signs.size == 0:
        return CheckReport("E", False, 0.0, None,
                           dict(details, verdict="not-applicable",
                                reason="no cross-bid effect detected"))
    if np.all(signs < 0):
        case, factor = "negative", 1.0
    elif np.all(signs > 0):
        case, factor = "positive", float(game.n - 1)
    else:
        k, i = map(int, np.argwhere(valid & (cross > FD_SIGN_MARGIN))[0])
        witness = {"kind": "mixed-cross-signs", "sample": k, "principal": i,
                   "action": draws.actions[k]}
        return CheckReport("E", False, 0.0, witness, dict(details, verdict="fail"))

    details["case"] = case
    gaps = np.abs(own) - factor * cross - SMALL_EXT_MARGIN
    bad = valid & ~(gaps > 0)
    if bad.any():
        k, i = map(int, np.argwhere(bad)[0])
        witness = {"kind": "dominance", "sample": k, "principal": i,
                   "action": draws.actions[k], "bids": draws.bids[k].tolist(),
                   "own": float(own[k, i]), "cross": float(cross[k, i])}
        return CheckReport("E", False, float(-gaps[k, i]), witness, details)
    return CheckReport("E", True, 0.0, None, details)


# ---------------------------------------------------------------------------
# structure classification

class StructureProfile:
    """Named structural verdicts for one game.  Mapping-like: profile["F"]."""

    def __init__(self, name: str, checks: dict[str, CheckReport]):
        self.name = name
        self.checks = checks

    def __getitem__(self, key: str) -> CheckReport:
        return self.checks[key]

    def __contains__(self, key):
        return key in self.checks

    def verdicts(self) -> dict[str, bool]:
        return {k: bool(v) for k, v in self.checks.items()}

    def to_jsonable(self):
        return {"name": self.name,
                "checks": {k: v.to_jsonable() for k, v in self.checks.items()}}


def _redraw_bids(game: GameSpec, act, rng) -> np.ndarray:
    row = np.empty(game.n)
    for j in range(game.n):
        lo, hi = _interval(game, j, act)
        row[j] = lo + rng.random() * (hi - lo)
    return row


def classify_structure(game: GameSpec, samples: int = DEFAULT_SAMPLES,
                       seed: int = 0) -> StructureProfile:
    """Sampled functional identities behind the named game classes:
    differentiable, cumulative, no-externalities, externality signs,
    symmetric, quasi-concave, and their conjunction F."""
    per = max(200, samples // 5)
    rng = np.random.default_rng(seed)
    draws = sample_feasible(game, per, seed)
    checks: dict[str, CheckReport] = {}

    # differentiable: central and one-sided differences must agree
    mismatches = 0
    first_bad = None
    tested = 0
    for k in range(len(draws)):
        act, b = draws.actions[k], draws.bids[k]
        i = int(rng.integers(game.n))
        comp = int(rng.integers(game.n + 1))
        st = _stencil(game, act, b, i, draws.lo[k, i], draws.hi[k, i])
        if st is None:
            continue
        u_up, u_dn, dh = st
        central = (u_up[comp] - u_dn[comp]) / dh
        u_mid = evaluate(game, act, b)[comp]
        h_up = min(b[i] + _fd_step(game, i), draws.hi[k, i]) - b[i]
        if h_up < 0.25 * _fd_step(game, i):
            continue
        row = np.array(b, dtype=float)
        row[i] = b[i] + h_up
        forward = (evaluate(game, act, row)[comp] - u_mid) / h_up
        tested += 1
        if abs(forward - central) > 0.05 * max(1.0, abs(central)):
            mismatches += 1
            if first_bad is None:
                first_bad = {"sample": k, "principal": i, "component": comp,
                             "action": act, "central": float(central),
                             "forward": float(forward)}
    frac = mismatches / tested if tested else 0.0
    checks["differentiable"] = CheckReport(
        "differentiable", frac <= 0.005, frac, first_bad,
        {"tested": tested, "mismatches": mismatches, "seed": seed})

    # cumulative: utilities see the others' bids only through their total
    cum_witness = None
    for k in range(len(draws)):
        if game.n < 2:
            break
        act, b = draws.actions[k], draws.bids[k]
        j, l = rng.permutation(game.n)[:2]
        room_up = draws.hi[k, j] - b[j]
        room_dn = b[l] - draws.lo[k, l]
        delta = min(room_up, room_dn) * rng.random()
        if delta <= 0:
            continue
        moved = np.array(b, dtype=float)
        moved[j] += delta
        moved[l] -= delta
        u0 = evaluate(game, act, b)
        u1 = evaluate(game, act, moved)
        bad = [0] + [1 + i for i in range(game.n) if i not in (j, l)]
        for comp in bad:
            scale = max(1.0, abs(u0[comp]))
            if abs(u1[comp] - u0[comp]) > IDENTITY_TOL * scale:
                cum_witness = {"sample": k, "component": comp, "action": act,
                               "bids": b.tolist(), "moved": moved.tolist(),
                               "before": float(u0[comp]), "after": float(u1[comp])}
                break
        if cum_witness:
            break
    checks["cumulative"] = CheckReport(
        "cumulative", cum_witness is None, 0.0, cum_witness,
        {"samples": len(draws), "seed": seed})

    # no externalities: principal utilities ignore the others' bids entirely
    b_witness = None
    for k in range(len(draws)):
        if game.n < 2:
            break
        act, b = draws.actions[k], draws.bids[k]
        redraw = _redraw_bids(game, act, rng)
        for i in range(game.n):
            mixed = np.array(redraw)
            mixed[i] = b[i]
            u_ref = evaluate(game, act, b)[1 + i]
            u_mix = evaluate(game, act, mixed)[1 + i]
            if abs(u_mix - u_ref) > IDENTITY_TOL * max(1.0, abs(u_ref)):
                b_witness = {"sample": k, "principal": i, "action": act,
                             "bids": b.tolist(), "others_redrawn": mixed.tolist(),
                             "before": float(u_ref), "after": float(u_mix)}
                break
        if b_witness:
            break
    checks["no_externalities"] = CheckReport(
        "no_externalities", b_witness is None, 0.0, b_witness,
        {"samples": len(draws), "seed": seed})

    # externality signs (need smooth cumulative structure to read a slope)
    if checks["differentiable"].passed and checks["cumulative"].passed and game.n >= 2:
        neg_ok, pos_ok = True, True
        sign_witness = None
        seen = False
        for k in range(len(draws)):
            act, b = draws.actions[k], draws.bids[k]
            for i in range(game.n):
                j = (i + 1) % game.n
                st = _stencil(game, act, b, j, draws.lo[k, j], draws.hi[k, j])
                if st is None:
                    continue
                u_up, u_dn, dh = st
                slope = (u_up[1 + i] - u_dn[1 + i]) / dh
                seen = True
                if not slope < -FD_SIGN_MARGIN:
                    if neg_ok:
                        sign_witness = {"sample": k, "principal": i,
                                        "versus": int(j), "slope": float(slope),
                                        "action": act}
                    neg_ok = False
                if not slope > FD_SIGN_MARGIN:
                    pos_ok = False
        checks["negative_externalities"] = CheckReport(
            "negative_externalities", seen and neg_ok, 0.0,
            None if neg_ok else sign_witness, {"samples": len(draws), "seed": seed})
        checks["positive_externalities"] = CheckReport(
            "positive_externalities", seen and pos_ok, 0.0, None,
            {"samples": len(draws), "seed": seed})
    else:
        na = {"verdict": "not-applicable",
              "reason": "needs differentiable + cumulative, two principals"}
        checks["negative_externalities"] = CheckReport(
            "negative_externalities", False, 0.0, None, dict(na))
        checks["positive_externalities"] = CheckReport(
            "positive_externalities", False, 0.0, None, dict(na))

    # symmetric: swapping two principals (with the action relabeled) is invisible
    sym_witness = None
    for k in range(len(draws)):
        if game.n < 2:
            break
        act, b = draws.actions[k], draws.bids[k]
        i, j = sorted(map(int, rng.permutation(game.n)[:2]))
        act2 = (game.action_symmetry.swap(act, i, j, game.n)
                if game.action_symmetry is not None else act)
        b2 = np.array(b, dtype=float)
        b2[i], b2[j] = b[j], b[i]
        lo_i, hi_i = _interval(game, i, act)
        lo_j2, hi_j2 = _interval(game, j, act2)
        if abs(lo_i - lo_j2) > IDENTITY_TOL or abs(hi_i - hi_j2) > IDENTITY_TOL:
            sym_witness = {"kind": "bounds", "sample": k, "pair": (i, j),
                           "action": act, "swapped_action": act2,
                           "interval_i": (lo_i, hi_i), "interval_j": (lo_j2, hi_j2)}
            break
        u1 = evaluate(game, act, b)
        u2 = evaluate(game, act2, b2)
        perm = list(range(game.n + 1))
        perm[1 + i], perm[1 + j] = perm[1 + j], perm[1 + i]
        for comp in range(game.n + 1):
            ref = u1[comp]
            got = u2[perm[comp]]
            if abs(got - ref) > IDENTITY_TOL * max(1.0, abs(ref)):
                sym_witness = {"kind": "utilities", "sample": k, "pair": (i, j),
                               "component": comp, "action": act,
                               "bids": b.tolist(), "before": float(ref),
                               "after": float(got)}
                break
        if sym_witness:
            break
    checks["symmetric"] = CheckReport(
        "symmetric", sym_witness is None and game.n >= 2, 0.0, sym_witness,
        {"samples": len(draws), "seed": seed})

    # quasi-concave principals: no midpoint may undercut both segment ends
    if checks["cumulative"].passed:
        qc_witness = None
        for k in range(len(draws)):
            act = draws.actions[k]
            x = draws.bids[k]
            y = np.empty(game.n)
            for i in range(game.n):
                lo, hi = _interval(game, i, act)
                y[i] = lo + rng.random() * (hi - lo)
            mid = 0.5 * (x + y)
            ux = evaluate(game, act, x)
            uy = evaluate(game, act, y)
            um = evaluate(game, act, mid)
            for i in range(game.n):
                floor = min(ux[1 + i], uy[1 + i])
                if um[1 + i] < floor - QC_SLACK:
                    qc_witness = {"sample": k, "principal": i, "action": act,
                                  "ends": (x.tolist(), y.tolist()),
                                  "midpoint": mid.tolist(),
                                  "mid_utility": float(um[1 + i]),
                                  "end_floor": float(floor)}
                    break
            if qc_witness:
                break
        checks["quasi_concave"] = CheckReport(
            "quasi_concave", qc_witness is None, 0.0, qc_witness,
            {"samples": per, "seed": seed})
    else:
        checks["quasi_concave"] = CheckReport(
            "quasi_concave", False, 0.0, None,
            {"verdict": "not-applicable", "reason": "not cumulative"})

    f_parts = ("symmetric", "quasi_concave", "negative_externalities")
    f_pass = all(checks[p].passed for p in f_parts)
    checks["F"] = CheckReport(
        "F", f_pass, 0.0, None,
        {p: checks[p].passed for p in f_parts})
    return StructureProfile(game.name, checks)


# ---------------------------------------------------------------------------
# validity routing

ROUTE_ORDER = ("a-i", "a-ii", "a-iii", "b", "private", "direct")

ROUTE_SCOPES = {
    "a-i": "all truthful equilibria",
    "a-ii": "all truthful equilibria",
    "a-iii": "all truthful equilibria",
    "b": "symmetric truthful equilibria only",
    "private": "all truthful equilibria (per-component bids)",
    "direct": "the supplied candidate",
}


class ValidityReport:
    def __init__(self, name: str, route, routes: dict, checks: dict):
        self.name = name
        self.route = route
        self.scope = ROUTE_SCOPES.get(route, "none")
        self.routes = routes
        self.checks = checks

    @property
    def valid(self) -> bool:
        return self.route is not None

    def to_jsonable(self):
        return {"name": self.name, "route": self.route, "scope": self.scope,
                "routes": self.routes,
                "checks": {k: v.to_jsonable() for k, v in self.checks.items()}}


def validity_report(game: GameSpec, cand=None, samples: int = DEFAULT_SAMPLES,
                    seed: int = 0) -> ValidityReport:
    """Route to the cheapest structural guarantee that certified truthful
    equilibria cannot be jointly improved on, or fall back to the direct
    pair of checks at a supplied candidate."""
    mono = check_monotonicity(game, samples, seed)
    prof = classify_structure(game, samples, seed)
    ext = check_small_externalities(game, samples, seed)
    checks = {"A1": mono["A1"], "A2": mono["A2"],
              "B": prof["no_externalities"], "E": ext, "F": prof["F"]}

    routes = {
        "a-i": mono["A1"].passed and prof["no_externalities"].passed,
        "a-ii": mono["A2"].passed and prof["no_externalities"].passed,
        "a-iii": mono["A1"].passed and ext.passed,
        "b": mono["A1"].passed and prof["F"].passed,
    }
    routes["private"] = ("private" in game.flags
                         and (mono["A1"].passed or mono["A2"].passed))
    if cand is not None:
        conflict = check_conflict(game, seed=seed)
        dp = check_deep_pockets(game, cand, seed=seed)
        checks["C"] = conflict
        checks["D1"] = dp["D1"]
        routes["direct"] = conflict.passed and dp["D1"].passed
    else:
        routes["direct"] = False

    route = next((r for r in ROUTE_ORDER if routes[r]), None)
    return ValidityReport(game.name, route, routes, checks)


# ---------------------------------------------------------------------------
# battery

class BatteryRow:
    def __init__(self, name: str, checks: dict[str, CheckReport]):
        self.name = name
        self.checks = checks

    def __getitem__(self, key):
        return self.checks[key]

    def verdicts(self) -> dict[str, bool]:
        return {k: bool(v) for k, v in self.checks.items()}

    def to_jsonable(self):
        return {"name": self.name,
                "checks": {k: v.to_jsonable() for k, v in self.checks.items()}}


def audit_game(game: GameSpec, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> BatteryRow:
    """All structural verdicts for one game at one seed."""
    mono = check_monotonicity(game, samples, seed)
    prof = classify_structure(game, samples, seed)
    conflict = check_conflict(game, seed=seed)
    dp = check_deep_pockets(game, None, samples=min(samples, 2000), seed=seed)
    ext = check_small_externalities(game, samples, seed)
    checks = {"A1": mono["A1"], "A2": mono["A2"],
              "B": prof["no_externalities"], "C": conflict,
              "D2": dp["D2"], "E": ext, "F": prof["F"]}
    for extra in ("differentiable", "cumulative", "symmetric", "quasi_concave",
                  "negative_externalities", "positive_externalities"):
        checks[extra] = prof[extra]
    return BatteryRow(game.name, checks)


def assumption_battery(games, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                       workers: int = 1) -> list[BatteryRow]:
    """Audit a collection of games.  Rows come back in input order and are
    bit-identical for a fixed seed no matter the worker count, because
    each row is a pure function of (game, samples, seed)."""
    specs = list(games)

    def run(game: GameSpec) -> BatteryRow:
        return audit_game(game, samples=samples, seed=seed)

    if workers <= 1 or len(specs) <= 1:
        return [run(g) for g in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, specs))
