"""Finding and certifying truthful equilibria.

The certificate for a candidate (action, profile, targets) has five clauses:

- Ai: the action maximizes the agent's utility along the profile,
- Aii: the agent's value matches every principal's pinned-bid outside option,
- Bi: the targets equal the utilities delivered at the candidate action,
- Bii: no other action passing Ai and Aii hands every principal at least as
  much and someone strictly more,
- truthful: each bid row rebuilds from its own target.

The solver scans target vectors, scores each by how far the certificate is
from holding, refines around the minima, and verifies the survivors.  The
oracle enumerates step profiles over tiny finite grids and applies the raw
deviation definition, which is slow but assumption-free.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agent import argmax_set, outside_option
from .games import (
    BiddingProfile,
    GameError,
    GameSpec,
    Grid,
    bounds_on_grid,
    profile_utilities,
)
from .reports import CheckReport, jsonable
from .truthful import is_truthful, truthful_profile, truthful_response

VERIFY_TOL = 1e-6
WEAK_SLACK = 1e-9
TARGET_SCAN = 101
ORACLE_GUARD = 10 ** 7


@dataclass
class Candidate:
    """A proposed truthful equilibrium: grid action, profile, targets."""

    action: object
    action_index: int
    profile: BiddingProfile
    targets: tuple[float, ...]
    utilities: tuple[float, ...]
    meta: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "action": jsonable(self.action),
            "targets": list(self.targets),
            "utilities": list(self.utilities),
            "meta": jsonable(self.meta),
        }


def candidate_at(game: GameSpec, profile: BiddingProfile, targets, action,
                 meta: dict | None = None) -> Candidate:
    """Snap the action to the profile's grid and package a candidate."""
    grid = profile.grid
    g = grid.nearest_index(action)
    snapped = grid[g]
    utils = profile_utilities(game, profile)[:, g]
    meta = dict(meta or {})
    if game.action_space.scalar:
        moved = abs(float(action) - float(snapped))
    else:
        moved = max(abs(float(x) - float(y)) for x, y in zip(action, snapped))
    if moved > 1e-12:
        meta["snapped_from"] = jsonable(action)
    return Candidate(
        action=snapped,
        action_index=g,
        profile=profile,
        targets=tuple(float(t) for t in targets),
        utilities=tuple(float(v) for v in utils),
        meta=meta,
    )


@dataclass
class VerifyReport:
    passed: bool
    conditions: dict[str, CheckReport]
    equilibrium_actions: list
    candidate: Candidate

    def failing(self) -> list[str]:
        return [name for name, rep in self.conditions.items() if not rep.passed]

    def to_jsonable(self) -> dict:
        return {
            "passed": bool(self.passed),
            "conditions": {k: v.to_jsonable() for k, v in self.conditions.items()},
            "failing": self.failing(),
            "equilibrium_actions": jsonable(self.equilibrium_actions),
            "candidate": self.candidate.to_jsonable(),
        }


def _dominance_key(du: np.ndarray, g: int) -> tuple:
    # rank witnesses by worst-coordinate gain, then best-coordinate gain,
    # then earliest grid position
    return (float(np.min(du)), float(np.max(du)), -g)


def verify_truthful_equilibrium(game: GameSpec, candidate: Candidate,
                                tol: float = VERIFY_TOL) -> VerifyReport:
    profile = candidate.profile
    grid = profile.grid
    targets = np.asarray(candidate.targets, dtype=float)
    utils = profile_utilities(game, profile)
    u0 = utils[0]
    choice = argmax_set(game, profile, u0)
    g0 = candidate.action_index
    u_here = utils[:, g0]
    scale = max(1.0, float(np.max(u0) - np.min(u0)))
    conditions: dict[str, CheckReport] = {}

    # Ai: candidate action attains the agent's maximum along the profile
    ai_res = max(0.0, (choice.best - float(u_here[0])) / scale)
    ai_pass = ai_res <= tol
    conditions["Ai"] = CheckReport(
        name="Ai", passed=ai_pass, residual=ai_res,
        witness=None if ai_pass else {
            "action": grid[int(choice.indices[0])],
            "agent_value": choice.best,
            "candidate_value": float(u_here[0]),
        },
        details={"agent_value": float(u_here[0]), "max_agent_value": choice.best},
    )

    # Aii: agent value equals each pinned outside option
    outs = [outside_option(game, i, profile) for i in range(game.n)]
    aii_res = 0.0
    aii_witness = None
    aii_details = {}
    for i, ob in enumerate(outs):
        res_i = abs(float(u_here[0]) - ob.value) / scale
        aii_details[f"principal_{i + 1}"] = {
            "outside_value": ob.value,
            "pinned_bid": ob.pinned_bid,
            "residual": res_i,
        }
        if res_i > aii_res:
            aii_res = res_i
            aii_witness = {
                "principal": i + 1,
                "outside_value": ob.value,
                "agent_value": float(u_here[0]),
                "outside_action": grid[ob.index],
            }
    aii_pass = aii_res <= tol
    conditions["Aii"] = CheckReport(
        name="Aii", passed=aii_pass, residual=aii_res,
        witness=None if aii_pass else aii_witness, details=aii_details,
    )

    # Bi: targets are delivered at the candidate action
    bi_res = float(np.max(np.abs(utils[1:, g0] - targets))) if game.n else 0.0
    bi_pass = bi_res <= tol
    conditions["Bi"] = CheckReport(
        name="Bi", passed=bi_pass, residual=bi_res,
        witness=None if bi_pass else {
            "action": candidate.action,
            "delivered": [float(v) for v in utils[1:, g0]],
            "targets": list(candidate.targets),
        },
    )

    # Bii: scan the argmax actions that also clear Aii for a dominating one
    outside_vals = np.asarray([ob.value for ob in outs])
    best_key = None
    bii_witness = None
    eligible = []
    for g in choice.indices:
        g = int(g)
        if float(np.max(np.abs(u0[g] - outside_vals))) / scale > tol:
            continue
        eligible.append(g)
        du = utils[1:, g] - targets
        if np.all(du >= -WEAK_SLACK) and np.any(du > tol):
            key = _dominance_key(du, g)
            if best_key is None or key > best_key:
                best_key = key
                bii_witness = {
                    "action": grid[g],
                    "utilities": [float(v) for v in utils[1:, g]],
                    "gain": float(np.min(du)),
                }
    bii_pass = bii_witness is None
    conditions["Bii"] = CheckReport(
        name="Bii", passed=bii_pass,
        residual=0.0 if bii_pass else float(bii_witness["gain"]),
        witness=bii_witness,
        details={"actions_scanned": len(eligible)},
    )

    conditions["truthful"] = is_truthful(game, profile, candidate.targets)

    # alternate actions delivering the same targets (ties that stay equilibria)
    eq_actions = [
        grid[g] for g in eligible
        if float(np.max(np.abs(utils[1:, g] - targets))) <= tol
    ]

    passed = all(rep.passed for rep in conditions.values())
    return VerifyReport(passed=passed, conditions=conditions,
                        equilibrium_actions=eq_actions, candidate=candidate)


# ---------------------------------------------------------------------------
# solver

@dataclass
class SolvePoint:
    targets: tuple[float, ...]
    residual: float
    status: str

    def to_jsonable(self) -> dict:
        return {"targets": list(self.targets), "residual": self.residual,
                "status": self.status}


@dataclass
class SolveResult:
    candidates: list[Candidate]
    reports: list[VerifyReport]
    landscape: list[SolvePoint]
    scanned: int
    grid: Grid

    def to_jsonable(self) -> dict:
        return {
            "candidates": [c.to_jsonable() for c in self.candidates],
            "reports": [r.to_jsonable() for r in self.reports],
            "landscape": [p.to_jsonable() for p in self.landscape],
            "scanned": self.scanned,
        }


def target_ranges(game: GameSpec, grid: Grid, mesh: int = 21) -> list[tuple[float, float]]:
    """Achievable utility range per principal over a coarse feasible mesh."""
    lower, upper = bounds_on_grid(game, grid)
    act = grid.action_arg()
    G = len(grid)
    fracs = np.linspace(0.0, 1.0, mesh)
    out = []
    lo_vals = np.full(game.n, np.inf)
    hi_vals = np.full(game.n, -np.inf)
    for combo in itertools.product(range(mesh), repeat=game.n):
        bids = [lower[j] + fracs[combo[j]] * (upper[j] - lower[j]) for j in range(game.n)]
        for i in range(game.n):
            vals = np.broadcast_to(
                np.asarray(game.principal_utilities[i](act, bids), dtype=float), (G,))
            lo_vals[i] = min(lo_vals[i], float(np.min(vals)))
            hi_vals[i] = max(hi_vals[i], float(np.max(vals)))
    for i in range(game.n):
        if not (math.isfinite(lo_vals[i]) and math.isfinite(hi_vals[i])):
            raise GameError(f"could not bracket achievable utilities for principal {i + 1}")
        out.append((float(lo_vals[i]), float(hi_vals[i])))
    return out


class _TargetScorer:
    """Certificate residual as a function of the target vector, cached."""

    def __init__(self, game: GameSpec, grid: Grid, tol: float):
        self.game = game
        self.grid = grid
        self.tol = tol
        self.cache: dict[tuple, tuple] = {}

    def __call__(self, targets: tuple[float, ...]) -> tuple[float, str]:
        key = tuple(round(t, 12) for t in targets)
        hit = self.cache.get(key)
        if hit is not None:
            return hit[0], hit[1]
        residual, status, _ = self.evaluate(targets)
        self.cache[key] = (residual, status, None)
        return residual, status

    def evaluate(self, targets: tuple[float, ...]):
        game = self.game
        build = truthful_profile(game, targets, self.grid)
        if not build.converged:
            return float("inf"), "undetermined", None
        profile = build.profile
        utils = profile_utilities(game, profile)
        choice = argmax_set(game, profile, utils[0])
        scale = max(1.0, float(np.max(utils[0]) - np.min(utils[0])))
        aii = 0.0
        for i in range(game.n):
            ob = outside_option(game, i, profile)
            aii = max(aii, abs(choice.best - ob.value) / scale)
        t = np.asarray(targets)
        bi_best = float("inf")
        g_best = int(choice.indices[0])
        for g in choice.indices:
            g = int(g)
            r = float(np.max(np.abs(utils[1:, g] - t)))
            if r < bi_best - 1e-15:
                bi_best = r
                g_best = g
        residual = max(aii, bi_best)
        return residual, "ok", (profile, g_best)


def _scan_axis(lo: float, hi: float, count: int) -> np.ndarray:
    if hi <= lo:
        return np.asarray([lo])
    return np.linspace(lo, hi, count)


def _local_minima(res: np.ndarray, shape: tuple[int, ...]) -> list[int]:
    cube = res.reshape(shape)
    flat_idx = []
    it = np.ndindex(*shape)
    for idx in it:
        v = cube[idx]
        if not math.isfinite(v):
            continue
        is_min = True
        for d in range(len(shape)):
            for delta in (-1, 1):
                j = idx[d] + delta
                if 0 <= j < shape[d]:
                    nb = list(idx)
                    nb[d] = j
                    if cube[tuple(nb)] < v:
                        is_min = False
                        break
            if not is_min:
                break
        if is_min:
            flat_idx.append(int(np.ravel_multi_index(idx, shape)))
    return flat_idx


def _ternary_polish(score, center: tuple[float, ...], half_width: float,
                    ranges, iters: int = 35) -> tuple[float, ...]:
    """Cyclic per-coordinate ternary search on the certificate residual."""
    point = list(center)
    dims = len(point)
    sweeps = 1 if dims == 1 else 2
    for _ in range(sweeps):
        for d in range(dims):
            lo = max(ranges[d][0], point[d] - half_width)
            hi = min(ranges[d][1], point[d] + half_width)
            for _ in range(iters):
                if hi - lo < 1e-12:
                    break
                m1 = lo + (hi - lo) / 3.0
                m2 = hi - (hi - lo) / 3.0
                p1 = tuple(point[:d] + [m1] + point[d + 1:])
                p2 = tuple(point[:d] + [m2] + point[d + 1:])
                if score(p1)[0] <= score(p2)[0]:
                    hi = m2
                else:
                    lo = m1
            point[d] = 0.5 * (lo + hi)
    return tuple(point)


def solve_truthful(game: GameSpec, resolution: int | None = None,
                   scan: int = TARGET_SCAN, tol: float = VERIFY_TOL,
                   refine: bool = True, max_candidates: int = 8,
                   workers: int = 1) -> SolveResult:
    """Scan target vectors, verify the best, and return certified candidates.

    Symmetric games scan the diagonal; otherwise the scan is a product
    lattice with ``scan`` points per principal.  Non-convergent fixed points
    are recorded in the landscape and skipped.
    """
    grid = game.grid(resolution)
    ranges = target_ranges(game, grid)
    symmetric = "symmetric" in game.flags and game.n > 1
    scorer = _TargetScorer(game, grid, tol)

    if symmetric:
        lo = min(r[0] for r in ranges)
        hi = max(r[1] for r in ranges)
        axis = _scan_axis(lo, hi, scan)
        points = [tuple([float(t)] * game.n) for t in axis]
        shape = (len(axis),)
        diag_range = [(lo, hi)]
        step = float(axis[1] - axis[0]) if len(axis) > 1 else 0.0
    else:
        axes = [_scan_axis(r[0], r[1], scan) for r in ranges]
        total = 1
        for ax in axes:
            total *= len(ax)
        if total > 10 ** 6:
            raise GameError(
                "target scan of %d points is above the desk-scale budget; "
                "lower `scan` or mark the game symmetric" % total)
        points = [tuple(float(v) for v in combo) for combo in itertools.product(*axes)]
        shape = tuple(len(ax) for ax in axes)
        step = max((float(ax[1] - ax[0]) if len(ax) > 1 else 0.0) for ax in axes)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(scorer, points))
    else:
        scored = [scorer(p) for p in points]
    landscape = [SolvePoint(targets=p, residual=r, status=s)
                 for p, (r, s) in zip(points, scored)]
    res_flat = np.asarray([r for r, _ in scored])

    candidates: list[Candidate] = []
    reports: list[VerifyReport] = []
    seen: set[tuple] = set()

    def consider(targets: tuple[float, ...], origin: str) -> None:
        residual, status, extra = scorer.evaluate(targets)
        if status != "ok" or extra is None or residual > 10.0 * tol:
            return
        profile, g_best = extra
        cand = candidate_at(game, profile, targets, profile.grid[g_best],
                            meta={"origin": origin, "scan_residual": residual})
        report = verify_truthful_equilibrium(game, cand, tol=tol)
        if not report.passed:
            return
        key = (cand.action_index,) + tuple(round(t, 7) for t in cand.targets)
        if key in seen:
            return
        seen.add(key)
        candidates.append(cand)
        reports.append(report)

    for p, (r, s) in zip(points, scored):
        if s == "ok" and r <= 10.0 * tol:
            consider(p, "scan")

    if refine and step > 0.0:
        minima = _local_minima(res_flat, shape)
        minima.sort(key=lambda k: res_flat[k])
        search_ranges = diag_range if symmetric else ranges
        for k in minima[:max_candidates]:
            base = points[k]
            center = (base[0],) if symmetric else base
            # tenfold refinement around the lattice minimum
            fine_axes = [
                np.linspace(max(search_ranges[d][0], center[d] - step),
                            min(search_ranges[d][1], center[d] + step), 21)
                for d in range(len(center))
            ]
            best_fine = center
            best_val = scorer(tuple([center[0]] * game.n) if symmetric else center)[0]
            for combo in itertools.product(*fine_axes):
                full = tuple([float(combo[0])] * game.n) if symmetric else tuple(map(float, combo))
                v = scorer(full)[0]
                if v < best_val:
                    best_val = v
                    best_fine = tuple(map(float, combo))
            if symmetric:
                polish_score = lambda p: scorer(tuple([p[0]] * game.n))
                polished = _ternary_polish(polish_score, best_fine, step / 10.0, search_ranges)
                consider(tuple([polished[0]] * game.n), "polish")
            else:
                polished = _ternary_polish(scorer, best_fine, step / 10.0, search_ranges)
                consider(polished, "polish")

    order = np.argsort([c.action_index for c in candidates], kind="stable")
    candidates = [candidates[int(k)] for k in order]
    reports = [reports[int(k)] for k in order]
    return SolveResult(candidates=candidates, reports=reports,
                       landscape=landscape, scanned=len(points), grid=grid)


# ---------------------------------------------------------------------------
# best-response plausibility on tiny grids

def _favorable_value(game: GameSpec, profile: BiddingProfile, i: int) -> float:
    """Principal i's value under the agent's most favorable optimal action."""
    utils = profile_utilities(game, profile)
    choice = argmax_set(game, profile, utils[0])
    return float(np.max(utils[i + 1, choice.indices]))


def truthful_in_best_response(game: GameSpec, i: int, opponents: BiddingProfile,
                              bid_set, tol: float = 1e-9,
                              guard: int = ORACLE_GUARD) -> CheckReport:
    """Compare the best step-menu deviation against the truthful response
    built relative to that best value.  Finite action grids only."""
    grid = opponents.grid
    lower, upper = bounds_on_grid(game, grid)
    choices_per_action = []
    for g in range(len(grid)):
        vals = [float(v) for v in bid_set
                if lower[i, g] - tol <= v <= upper[i, g] + tol]
        if not vals:
            raise GameError(f"no feasible bid for principal {i + 1} at action {grid[g]!r}")
        choices_per_action.append(vals)
    total = 1
    for vals in choices_per_action:
        total *= len(vals)
    if total > guard:
        raise GameError(f"{total} deviation menus exceed the enumeration guard")

    best = -float("inf")
    best_menu = None
    for menu in itertools.product(*choices_per_action):
        row = np.asarray(menu, dtype=float)
        joint = opponents.with_row(i, row, step=True)
        val = _favorable_value(game, joint, i)
        if val > best + tol:
            best = val
            best_menu = menu
    row_t = truthful_response(game, i, best, opponents.values, grid)
    truthful_joint = opponents.with_row(i, row_t, step=False)
    val_t = _favorable_value(game, truthful_joint, i)
    passed = val_t >= best - tol
    return CheckReport(
        name="truthful-in-best-response",
        passed=passed,
        residual=max(0.0, best - val_t),
        witness=None if passed else {"best_menu": list(best_menu), "best": best,
                                     "truthful_value": val_t},
        details={"best": best, "truthful_value": val_t,
                 "menus_checked": total},
    )


# ---------------------------------------------------------------------------
# brute-force oracle on tiny grids

@dataclass
class OracleEquilibrium:
    action: object
    action_index: int
    rows: tuple[tuple[float, ...], ...]
    bids: tuple[float, ...]
    utilities: tuple[float, ...]
    tie_break_dependent: bool

    def to_jsonable(self) -> dict:
        return {
            "action": jsonable(self.action),
            "rows": jsonable(self.rows),
            "bids": list(self.bids),
            "utilities": list(self.utilities),
            "tie_break_dependent": self.tie_break_dependent,
        }


@dataclass
class OracleResult:
    equilibria: list[OracleEquilibrium]
    actions: list
    profiles_checked: int
    work: int

    def to_jsonable(self) -> dict:
        return {
            "equilibria": [e.to_jsonable() for e in self.equilibria],
            "actions": jsonable(self.actions),
            "profiles_checked": self.profiles_checked,
            "work": self.work,
        }


def enumerate_equilibria_small(game: GameSpec, bid_set, grid: Grid | None = None,
                               tol: float = 1e-9,
                               guard: int = ORACLE_GUARD) -> OracleResult:
    """Enumerate step-profile equilibria under the raw deviation definition.

    A deviation succeeds when any action the agent then weakly prefers
    strictly improves the deviator; profiles with agent ties are flagged
    tie_break_dependent.
    """
    grid = grid if grid is not None else game.grid()
    G = len(grid)
    lower, upper = bounds_on_grid(game, grid)
    act = grid.action_arg()
    feas = []
    for i in range(game.n):
        per_action = []
        for g in range(G):
            vals = [float(v) for v in bid_set
                    if lower[i, g] - tol <= v <= upper[i, g] + tol]
            if not vals:
                raise GameError(f"no feasible bid for principal {i + 1} at action {grid[g]!r}")
            per_action.append(vals)
        feas.append(per_action)

    counts = []
    for i in range(game.n):
        c = 1
        for vals in feas[i]:
            c *= len(vals)
        counts.append(c)
    joints = 1
    for c in counts:
        joints *= c
    work = joints * (sum(counts) + 1) * G
    if work > guard:
        raise GameError(f"oracle workload {work} exceeds the guard {guard}")

    menus = [
        [np.asarray(menu, dtype=float) for menu in itertools.product(*feas[i])]
        for i in range(game.n)
    ]

    def agent_row(rows) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(game.agent_utility(act, list(rows)), dtype=float), (G,))

    equilibria: list[OracleEquilibrium] = []
    for combo in itertools.product(*(range(c) for c in counts)):
        rows = [menus[i][combo[i]] for i in range(game.n)]
        utils = np.empty((game.n + 1, G))
        utils[0] = agent_row(rows)
        for i in range(game.n):
            utils[i + 1] = np.broadcast_to(
                np.asarray(game.principal_utilities[i](act, rows), dtype=float), (G,))
        best = float(np.max(utils[0]))
        amax_tol = tol * max(1.0, abs(best))
        argmax = np.flatnonzero(utils[0] >= best - amax_tol)
        tie = len(argmax) > 1

        # best favorable value each principal can reach by swapping menus
        dev_best = np.full(game.n, -np.inf)
        for i in range(game.n):
            for alt in menus[i]:
                dev_rows = list(rows)
                dev_rows[i] = alt
                u0 = agent_row(dev_rows)
                b = float(np.max(u0))
                da = np.flatnonzero(u0 >= b - tol * max(1.0, abs(b)))
                ui = np.broadcast_to(
                    np.asarray(game.principal_utilities[i](act, dev_rows), dtype=float), (G,))
                dev_best[i] = max(dev_best[i], float(np.max(ui[da])))

        for g in argmax:
            g = int(g)
            base = utils[1:, g]
            if np.all(dev_best <= base + tol):
                equilibria.append(OracleEquilibrium(
                    action=grid[g],
                    action_index=g,
                    rows=tuple(tuple(float(v) for v in r) for r in rows),
                    bids=tuple(float(r[g]) for r in rows),
                    utilities=tuple(float(v) for v in utils[:, g]),
                    tie_break_dependent=tie,
                ))
    return OracleResult(equilibria=equilibria, actions=list(grid),
                        profiles_checked=joints, work=work)
