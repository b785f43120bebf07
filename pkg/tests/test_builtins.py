"""The builtin game catalogue and its stored closed forms."""

import json
import os

import numpy as np
import pytest

from agency import (
    closed_form_candidate,
    evaluate,
    get_game,
    names,
    verify_truthful_equilibrium,
)
from agency.catalog import (
    ALIASES,
    BATTERY,
    DESCRIPTIONS,
    export_corpus,
    finite_variant,
    public_good_stage,
)
from agency.expr import evaluate as expr_eval
from agency.expr import parse
from agency.games import GameError
from agency.gamefile import load_game_file


class TestCatalogue:
    def test_names_complete(self):
        got = set(names())
        assert {
            "linear_cap",
            "kinked_cap",
            "spillover",
            "spillover_averse",
            "split_market",
            "public_goods_lobby",
            "cross_linear",
            "cross_linear_skew",
            "cross_quadratic",
            "cross_sqrt",
        } <= got

    def test_descriptions_cover_catalogue(self):
        for name in names():
            assert name in DESCRIPTIONS and DESCRIPTIONS[name]

    def test_aliases(self):
        assert get_game("market").name == "split_market"
        assert get_game("lobbying").name == "public_goods_lobby"
        assert set(ALIASES) == {"market", "lobbying"}

    def test_unknown_game(self):
        with pytest.raises(GameError, match="unknown"):
            get_game("nonesuch")

    def test_unknown_param(self):
        with pytest.raises(GameError):
            get_game("spillover", flavor=3)

    def test_bad_param_value(self):
        with pytest.raises(GameError):
            get_game("split_market", pbar=1.0)  # must exceed 3*c*qbar

    def test_param_suffix_in_name(self):
        assert get_game("spillover", gamma=0.5).name == "spillover[gamma=0.5]"
        assert get_game("spillover", gamma=2.0).name == "spillover"
        assert get_game("public_goods_lobby", n=3).name == "public_goods_lobby[n=3]"

    def test_battery_is_eight_rows(self):
        assert len(BATTERY) == 8


class TestClosedForms:
    @pytest.mark.parametrize("name", [n for n in (
        "linear_cap", "kinked_cap", "spillover", "spillover_averse",
        "split_market", "public_goods_lobby")])
    def test_utilities_recompute(self, name):
        bundle = get_game(name)
        cf = bundle.closed_form
        u = evaluate(bundle.spec, cf.action, list(cf.bids))
        np.testing.assert_allclose(u, cf.utilities, atol=1e-9)

    @pytest.mark.parametrize("name,status", [
        ("linear_cap", "equilibrium"),
        ("spillover", "equilibrium"),
        ("split_market", "equilibrium"),
        ("public_goods_lobby", "equilibrium"),
        ("kinked_cap", "rejected"),
        ("spillover_averse", "rejected"),
    ])
    def test_certificate_agrees_with_status(self, name, status):
        bundle = get_game(name)
        cand = closed_form_candidate(bundle, resolution=101)
        report = verify_truthful_equilibrium(bundle.spec, cand)
        if status == "equilibrium":
            assert report.passed, report.failing()
        else:
            assert not report.passed
            assert report.failing() == [bundle.closed_form.condition]

    def test_benchmark_lookup(self):
        cf = get_game("spillover").closed_form
        bench = cf("A")
        assert bench.bids == (1.0, 1.0)
        np.testing.assert_allclose(bench.utilities, [2.0, 2.0, 2.0])
        np.testing.assert_allclose(cf("B").utilities, [0.0, 1.0, 1.0])

    def test_benchmarks_recompute(self):
        for name in ("spillover", "spillover_averse"):
            bundle = get_game(name)
            for bench in bundle.closed_form.benchmarks.values():
                u = evaluate(bundle.spec, bench.action, list(bench.bids))
                np.testing.assert_allclose(u, bench.utilities, atol=1e-12)

    def test_cross_games_store_references(self):
        ref = get_game("cross_linear").reference
        u = evaluate(get_game("cross_linear").spec, ref.action, list(ref.bids))
        np.testing.assert_allclose(u, ref.utilities, atol=1e-12)
        np.testing.assert_allclose(u, [2.0, -3.0, -3.0])
        skew = get_game("cross_linear_skew").reference
        u2 = evaluate(get_game("cross_linear_skew").spec, skew.action, list(skew.bids))
        np.testing.assert_allclose(u2, [2.0, -3.0, -5.0])


class TestMarket:
    def test_schedule_exprs_trace_the_profit_curve(self):
        bundle = get_game("split_market")
        cf = bundle.closed_form
        grid = bundle.spec.grid(81)
        a = grid.columns()[0]
        tree = parse(cf.profile[0], variables={"a", "a1"})
        vals = np.asarray([expr_eval(tree, {"a": float(x), "a1": float(x)}) for x in a])
        want = np.minimum(7.0, (2.0 + a**2) / np.maximum(a, 1e-12))
        np.testing.assert_allclose(vals, want, atol=1e-9)

    def test_knee_root(self):
        knee = get_game("split_market").closed_form.extras["knee"]
        assert knee == pytest.approx((7.0 - np.sqrt(41.0)) / 2.0, abs=1e-12)
        # below the knee the cap binds, above it the profit curve rules
        assert knee**2 - 7.0 * knee + 2.0 == pytest.approx(0.0, abs=1e-9)

    def test_schedule_sits_between_cost_and_cap(self):
        bundle = get_game("split_market")
        grid = bundle.spec.grid(81)
        a = grid.columns()[0]
        tree = parse(bundle.closed_form.profile[0], variables={"a", "a1"})
        vals = np.asarray([expr_eval(tree, {"a": float(x), "a1": float(x)}) for x in a])
        assert (vals <= 7.0 + 1e-12).all()
        assert (vals >= a - 1e-12).all()  # price covers marginal cost c*q

    def test_reflection_symmetry(self):
        spec = get_game("split_market").spec
        sym = spec.action_symmetry
        assert sym.kind == "reflect"
        # swapping the principals mirrors the action around qbar/2
        assert sym.swap(0.5, 0, 1, 2) == pytest.approx(1.5)
        u = evaluate(spec, 0.5, [4.0, 3.0])
        v = evaluate(spec, 1.5, [3.0, 4.0])
        np.testing.assert_allclose(u[0], v[0], atol=1e-12)
        np.testing.assert_allclose(u[1:], v[1:][::-1], atol=1e-12)


class TestLobby:
    def test_stage_split_n2(self):
        keeps, pool = public_good_stage(2, (1.0, 1.0))
        assert pool == pytest.approx(2.0 / 3.0)
        np.testing.assert_allclose(keeps, [1.0 / 3.0] * 2)
        # reduced utility is the squared pool share
        assert pool**2 == pytest.approx(4.0 / 9.0)

    def test_stage_split_n3(self):
        keeps, pool = public_good_stage(3, (1.0, 1.0, 1.0))
        assert pool == pytest.approx(0.75)
        assert pool**2 == pytest.approx(9.0 / 16.0)

    def test_stage_split_skewed(self):
        keeps, pool = public_good_stage(2, (2.0, 0.0))
        assert pool == pytest.approx(2.0 / 3.0)
        np.testing.assert_allclose(keeps, [4.0 / 3.0, -2.0 / 3.0])

    def test_stage_split_errors(self):
        with pytest.raises(GameError):
            public_good_stage(1, (1.0,))
        with pytest.raises(GameError):
            public_good_stage(2, (1.0,))

    def test_transfer_neutrality(self):
        # shifting endowment between members moves the keeps, not the pool
        spec = get_game("public_goods_lobby").spec
        for t in (-1.0, -0.5, 0.0, 0.5, 1.0):
            u = evaluate(spec, t, [0.0, 0.0])
            np.testing.assert_allclose(u[1:], [4.0 / 9.0] * 2, atol=1e-12)

    def test_zero_sum_symmetry(self):
        spec = get_game("public_goods_lobby").spec
        sym = spec.action_symmetry
        assert sym.kind == "zero_sum"
        assert sym.swap(0.4, 0, 1, 2) == pytest.approx(-0.4)

    def test_n3_variant(self):
        bundle = get_game("public_goods_lobby", n=3)
        assert bundle.spec.n == 3
        assert bundle.spec.action_space.ndim == 2
        u = evaluate(bundle.spec, (0.0, 0.0), [0.0, 0.0, 0.0])
        np.testing.assert_allclose(u[1:], [9.0 / 16.0] * 3, atol=1e-12)

    def test_n_guard(self):
        with pytest.raises(GameError):
            get_game("public_goods_lobby", n=4)


class TestCorpus:
    def test_shipped_files_match_builders(self):
        root = os.path.join(os.path.dirname(__file__), "..", "games")
        rng = np.random.default_rng(2)
        for name in names():
            path = os.path.join(root, name + ".json")
            assert os.path.exists(path), path
            game, _ = load_game_file(path)
            spec = get_game(name).spec
            grid = spec.grid(11)
            for _ in range(5):
                g = int(rng.integers(len(grid)))
                act = grid[g]
                bids = []
                for i in range(spec.n):
                    lo = float(spec.bid_bounds[i].lower(act))
                    hi = float(spec.bid_bounds[i].upper(act))
                    bids.append(lo + float(rng.random()) * (hi - lo))
                np.testing.assert_allclose(
                    evaluate(game, act, bids), evaluate(spec, act, bids), atol=1e-12
                )

    def test_export_round_trip(self, tmp_path):
        written = export_corpus(tmp_path)
        assert sorted(os.path.basename(p) for p in written) == sorted(
            n + ".json" for n in names()
        )
        with open(os.path.join(tmp_path, "linear_cap.json")) as fh:
            doc = json.load(fh)
        assert doc["schema_version"] == 1
        assert doc["name"] == "linear_cap"


def test_finite_variant_keeps_everything_but_the_action_set():
    spec = get_game("spillover").spec
    tiny = finite_variant(spec, (0.0, 0.5, 1.0))
    assert tiny.action_space.kind == "finite"
    assert len(tiny.grid()) == 3
    np.testing.assert_allclose(
        evaluate(tiny, 0.5, [0.1, 0.2]), evaluate(spec, 0.5, [0.1, 0.2])
    )
