"""End-to-end acceptance battery.

Each test prints one verdict line (run with ``pytest -v -s`` to see them
inline); the test name doubles as the criterion label.  These runs use the
full desk-scale grids, so the module takes a few minutes.
"""

import math

import numpy as np
import pytest

from agency import (
    assumption_battery,
    audit_game,
    battery_games,
    build_profile,
    check_conflict,
    check_deep_pockets,
    check_efficiency,
    check_monotonicity,
    check_small_externalities,
    classify_structure,
    closed_form_candidate,
    enumerate_equilibria_small,
    finite_variant,
    get_game,
    make_allocation,
    solve_truthful,
    truthful_in_best_response,
    validity_report,
    verify_truthful_equilibrium,
)
from agency.cli import run
from agency.games import bounds_on_grid

SAMPLES = 10_000
BATTERY_COLS = ("A1", "A2", "B", "C", "D2", "E", "F")

# structural verdicts for the builtin battery, frozen from audited runs
BATTERY_TABLE = {
    "linear_cap": "+-+++--",
    "kinked_cap": "+-++---",
    "spillover": "+------",
    "spillover[gamma=0.5]": "+--+-+-",
    "spillover_averse": "---+---",
    "split_market": "-++++--",
    "public_goods_lobby": "+--++-+",
    "cross_linear": "+--+--+",
}

EXTRA_GAMES = ("cross_linear_skew", "cross_quadratic", "cross_sqrt")


def _bundle(name: str):
    if name == "spillover[gamma=0.5]":
        return get_game("spillover", gamma=0.5)
    return get_game(name)


def _verdict(num: int, label: str) -> None:
    print(f"criterion {num}: PASS - {label}")


@pytest.fixture(scope="module")
def linear_solved():
    return solve_truthful(get_game("linear_cap").spec, resolution=201)


@pytest.fixture(scope="module")
def market_solved():
    return solve_truthful(get_game("split_market").spec, resolution=201)


@pytest.fixture(scope="module")
def lobby_solved():
    return solve_truthful(get_game("public_goods_lobby").spec, resolution=201)


@pytest.fixture(scope="module")
def battery5():
    specs = [b.spec for b in battery_games()]
    return {
        seed: assumption_battery(specs, samples=SAMPLES, seed=seed)
        for seed in (0, 1, 2, 3, 4)
    }


@pytest.fixture(scope="module")
def audits(battery5):
    rows = {row.name: row for row in battery5[0]}
    for name in EXTRA_GAMES:
        rows[name] = audit_game(get_game(name).spec, samples=SAMPLES, seed=0)
    return rows


def test_criterion_01_linear_cap_certificate(linear_solved):
    res = linear_solved
    assert len(res.candidates) == 1
    cand = res.candidates[0]
    assert res.reports[0].passed
    assert cand.action == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(cand.profile.at(cand.action), [0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(cand.targets, [1.0, 1.0], atol=1e-6)
    _verdict(1, "linear cap solve certifies a=1, zero bids, utilities (1, 1)")


def test_criterion_02_kinked_cap_rejection():
    bundle = get_game("kinked_cap")
    cand = closed_form_candidate(bundle, resolution=201)
    report = verify_truthful_equilibrium(bundle.spec, cand)
    assert not report.passed
    assert report.failing() == ["Bii"]
    wit = report.conditions["Bii"].witness
    assert wit["action"] == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(wit["utilities"], [0.5, 0.5], atol=1e-6)
    _verdict(2, "kinked cap candidate fails only the dominating-action check")


def test_criterion_03_split_market_certificate(market_solved):
    bundle = get_game("split_market")
    res = market_solved
    assert len(res.candidates) == 1
    cand = res.candidates[0]
    assert res.reports[0].passed
    qbar = 2.0
    quantities = (float(cand.action), qbar - float(cand.action))
    np.testing.assert_allclose(quantities, [1.0, 1.0], atol=1e-4)
    np.testing.assert_allclose(cand.profile.at(cand.action), [3.0, 3.0], atol=1e-4)
    np.testing.assert_allclose(cand.targets, [2.0, 2.0], atol=1e-4)
    knee = bundle.closed_form.extras["knee"]
    assert knee == pytest.approx((7.0 - math.sqrt(41.0)) / 2.0, abs=1e-9)
    vr = validity_report(bundle.spec)
    assert vr.valid and vr.route == "a-ii"
    assert vr.scope == "all truthful equilibria"
    _verdict(3, "split market certifies q=(1,1), p=(3,3), profits (2,2); route a-ii")


def test_criterion_04_lobby_zero_bid_split(lobby_solved):
    bundle = get_game("public_goods_lobby")
    res = lobby_solved
    pool = [
        k for k, c in enumerate(res.candidates)
        if np.allclose(c.targets, [4.0 / 9.0, 4.0 / 9.0], atol=1e-6)
        and np.max(np.abs(c.profile.values)) <= 1e-6
    ]
    assert pool, "no zero-bid candidate with the even split"
    k = pool[0]
    assert res.reports[k].passed
    eq_actions = np.asarray(res.reports[k].equilibrium_actions, dtype=float)
    for t in (-1.0, -0.5, 0.0, 0.5, 1.0):
        assert np.min(np.abs(eq_actions - t)) <= 1e-9
    prof = classify_structure(bundle.spec, samples=SAMPLES)
    assert prof["F"].passed
    assert not check_small_externalities(bundle.spec, samples=SAMPLES).passed
    vr = validity_report(bundle.spec)
    assert vr.valid and vr.route == "b"
    assert vr.scope == "symmetric truthful equilibria only"
    _verdict(4, "lobby zero bids split the pool (4/9, 4/9) at every transfer; route b")


def test_criterion_05_spillover_efficiency_flip():
    strong = get_game("spillover")
    bench = strong.closed_form("B")
    alloc = make_allocation(strong.spec, bench.action, list(bench.bids))
    report = check_efficiency(strong.spec, alloc, bid_resolution=41)
    assert not report.passed
    wit = np.asarray(report.witness["utilities"], dtype=float)
    assert np.all(wit >= np.asarray([2.0, 2.0, 2.0]) - 1e-6)

    mild = get_game("spillover", gamma=0.5)
    bench = mild.closed_form("B")
    alloc = make_allocation(mild.spec, bench.action, list(bench.bids))
    assert check_efficiency(mild.spec, alloc, bid_resolution=41).passed
    _verdict(5, "strong spillover zero bids dominated by (2,2,2); mild ones efficient")


def test_criterion_06_enumeration_oracle():
    spec = finite_variant(get_game("spillover").spec, (0.0, 0.2, 1.0))
    res = enumerate_equilibria_small(spec, (0.0, 0.2, 0.5, 1.0))
    found = {(eq.action, eq.bids) for eq in res.equilibria}
    assert (1.0, (0.0, 0.0)) in found

    asym = [eq for eq in res.equilibria if eq.bids in ((0.2, 0.0), (0.0, 0.2))]
    assert len(asym) == 2
    for eq in asym:
        assert eq.utilities[0] == pytest.approx(0.2, abs=1e-9)
        assert sorted(eq.utilities[1:]) == pytest.approx([0.8, 1.4], abs=1e-9)

    # the high-bid profile is defeated by dropping principal 1's top bid to 0.5
    assert (1.0, (1.0, 1.0)) not in found
    grid = spec.grid()
    a = np.asarray([0.0, 0.2, 1.0])
    dev = build_profile(spec, grid, np.vstack([[0.0, 0.2, 0.5], a]), step=[True, True])
    u0 = [float(spec.agent_utility(p, list(dev.at_index(g)))) for g, p in enumerate(grid)]
    g_best = int(np.argmax(u0))
    gained = float(spec.principal_utilities[0](grid[g_best], list(dev.at_index(g_best))))
    stayed = float(spec.principal_utilities[0](1.0, [1.0, 1.0]))
    assert gained == pytest.approx(2.5, abs=1e-9) and gained > stayed
    _verdict(6, "oracle keeps zero/asymmetric rest points, drops the high-bid profile")


def test_criterion_07_battery_verdicts_stable(battery5):
    for seed, rows in battery5.items():
        got = {
            row.name: "".join("+" if row.checks[c].passed else "-" for c in BATTERY_COLS)
            for row in rows
        }
        assert got == BATTERY_TABLE, f"verdict drift at seed {seed}"
    _verdict(7, "all 8 battery rows match the frozen verdicts at 5 seeds, N=10000")


def test_criterion_08_structure_implications(audits):
    names = list(BATTERY_TABLE) + list(EXTRA_GAMES)
    bundles = {name: _bundle(name) for name in names}
    certified = {
        name: b for name, b in bundles.items()
        if b.closed_form is not None and b.closed_form.status == "equilibrium"
    }

    # constant pinned utilities imply the candidate-level floor check
    strong_dp = []
    for name, b in bundles.items():
        if check_deep_pockets(b.spec, samples=SAMPLES)["D2"].passed:
            strong_dp.append(name)
            if name in certified:
                cand = closed_form_candidate(b, resolution=201)
                d1 = check_deep_pockets(b.spec, cand, samples=SAMPLES)["D1"]
                assert d1 is not None and d1.passed, name
    assert {"linear_cap", "split_market", "public_goods_lobby"} <= set(strong_dp)

    # opposing monotonicity without externalities rules out mutual gains
    pairwise = [
        name for name in names
        if (audits[name]["A1"].passed or audits[name]["A2"].passed)
        and audits[name]["B"].passed
    ]
    assert {"linear_cap", "kinked_cap", "split_market"} <= set(pairwise)
    for name in pairwise:
        b = bundles[name]
        assert check_conflict(b.spec, symmetric=False).passed, name
        if name in certified:
            cand = closed_form_candidate(b, resolution=201)
            d1 = check_deep_pockets(b.spec, cand, samples=SAMPLES)["D1"]
            assert d1 is not None and d1.passed, name

    # small externalities restore the same conclusions
    damped = [
        name for name in names
        if audits[name]["A1"].passed and audits[name]["E"].passed
    ]
    assert "spillover[gamma=0.5]" in damped
    for name in damped:
        b = bundles[name]
        assert check_conflict(b.spec, symmetric=False).passed, name
        if name in certified:
            cand = closed_form_candidate(b, resolution=201)
            d1 = check_deep_pockets(b.spec, cand, samples=SAMPLES)["D1"]
            assert d1 is not None and d1.passed, name

    # the symmetric cumulative class is safe on the diagonal
    diag = [
        name for name in names
        if audits[name]["A1"].passed and audits[name]["F"].passed
    ]
    assert {"public_goods_lobby", "cross_linear", "cross_quadratic"} <= set(diag)
    d1_hits = 0
    for name in diag:
        b = bundles[name]
        assert check_conflict(b.spec, symmetric=True).passed, name
        if name in certified and len(set(b.closed_form.targets)) == 1:
            cand = closed_form_candidate(b, resolution=201)
            d1 = check_deep_pockets(b.spec, cand, samples=SAMPLES)["D1"]
            assert d1 is not None and d1.passed, name
            d1_hits += 1
    assert d1_hits >= 1
    _verdict(8, "all four structure-to-guarantee implications hold at N=10000")


def test_criterion_09_truthful_among_best_responses(audits):
    names = [
        name for name in list(BATTERY_TABLE) + list(EXTRA_GAMES)
        if audits[name]["A1"].passed or audits[name]["A2"].passed
    ]
    assert sorted(names) == sorted(
        n for n in list(BATTERY_TABLE) + list(EXTRA_GAMES) if n != "spillover_averse"
    )
    for gi, name in enumerate(names):
        spec0 = _bundle(name).spec
        lo, hi = spec0.action_space.bounds[0]
        tiny = finite_variant(spec0, (lo, (lo + hi) / 2.0, hi))
        grid = tiny.grid()
        lower, upper = bounds_on_grid(tiny, grid)
        gmin = tiny.bid_bounds[0].global_min
        gmax = tiny.bid_bounds[0].global_max
        bid_set = (gmin, (gmin + gmax) / 2.0, gmax)
        rng = np.random.default_rng(1000 + gi)
        for k in range(50):
            vals = np.empty((tiny.n, len(grid)))
            for i in range(tiny.n):
                for g in range(len(grid)):
                    feas = [v for v in bid_set
                            if lower[i, g] - 1e-9 <= v <= upper[i, g] + 1e-9]
                    assert feas, (name, i, g)
                    vals[i, g] = rng.choice(feas)
            opp = build_profile(tiny, grid, vals, step=[True] * tiny.n)
            rep = truthful_in_best_response(tiny, k % tiny.n, opp, bid_set, tol=1e-9)
            assert rep.passed, (name, k, rep.witness)
    _verdict(9, "truthful menus tie the enumerated best response, 50 draws x 10 games")


def test_criterion_10_certified_candidates_efficient(linear_solved, market_solved,
                                                     lobby_solved):
    sets = [
        ("linear_cap", linear_solved),
        ("split_market", market_solved),
        ("public_goods_lobby", lobby_solved),
    ]
    total = 0
    for name, res in sets:
        spec = get_game(name).spec
        for cand in res.candidates:
            alloc = make_allocation(spec, cand.action, cand.profile.at(cand.action))
            rep = check_efficiency(spec, alloc, bid_resolution=41)
            assert rep.passed, (name, cand.action, cand.targets, rep.witness)
            total += 1
    assert total >= 3
    _verdict(10, f"all {total} certified candidates pass the dominance scan")


def test_criterion_11_battery_report_workers_identical(tmp_path):
    blobs = {}
    for w in (1, 4, 8):
        out = tmp_path / f"w{w}"
        code = run(["check-assumptions", "--battery", "--samples", str(SAMPLES),
                    "--seed", "0", "--workers", str(w), "--out", str(out)])
        assert code == 0
        blobs[w] = ((out / "report.json").read_bytes(),
                    (out / "battery.csv").read_bytes())
    assert blobs[1] == blobs[4] == blobs[8]
    _verdict(11, "battery reports byte-identical under 1, 4 and 8 workers")
