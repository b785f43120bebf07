"""Dominance scans and the sampled utility frontier."""

import numpy as np
import pytest

from agency import check_efficiency, frontier_sample, get_game
from agency.games import GameError, make_allocation
from agency.gamefile import load_game


class TestCheckEfficiency:
    def test_strong_spillover_zero_bids_dominated(self):
        spec = get_game("spillover").spec
        alloc = make_allocation(spec, 1.0, [0.0, 0.0])
        report = check_efficiency(spec, alloc, bid_resolution=21, resolution=101)
        assert not report.passed
        wit = report.witness
        assert wit["action"] == pytest.approx(1.0)
        np.testing.assert_allclose(wit["bids"], [1.0, 1.0], atol=1e-9)
        np.testing.assert_allclose(wit["utilities"], [2.0, 2.0, 2.0], atol=1e-9)

    def test_mild_spillover_zero_bids_efficient(self):
        spec = get_game("spillover", gamma=0.5).spec
        alloc = make_allocation(spec, 1.0, [0.0, 0.0])
        report = check_efficiency(spec, alloc, bid_resolution=41, resolution=101)
        assert report.passed

    def test_witness_margins_consistent(self):
        spec = get_game("spillover").spec
        alloc = make_allocation(spec, 1.0, [0.0, 0.0])
        report = check_efficiency(spec, alloc, bid_resolution=21, resolution=101)
        wit = report.witness
        np.testing.assert_allclose(
            wit["margins"],
            np.asarray(wit["utilities"]) - np.asarray(alloc.utilities),
            atol=1e-12,
        )
        assert max(wit["margins"]) > 1e-6

    def test_widest_dominating_margin_preferred(self):
        # every positive bid dominates the zero reference here; the scan
        # must report the one with the largest worst-coordinate gain, not
        # the first mesh point it stumbles on
        defn = {
            "name": "ramp",
            "n": 1,
            "action_space": {"kind": "finite", "points": [0.0]},
            "agent_utility": "bsum",
            "principals": [{"utility": "b1", "lower_bound": "0", "upper_bound": "1"}],
            "bid_envelope": [0.0, 1.0],
            "own_bid_direction": [1],
            "agent_bid_direction": 1,
        }
        spec = load_game(defn)
        alloc = make_allocation(spec, 0.0, [0.0])
        report = check_efficiency(spec, alloc, bid_resolution=41)
        assert not report.passed
        assert report.witness["bids"] == pytest.approx([1.0])

    def test_scan_guard(self):
        spec = get_game("spillover").spec
        alloc = make_allocation(spec, 1.0, [0.0, 0.0])
        with pytest.raises(GameError, match="guard"):
            check_efficiency(spec, alloc, bid_resolution=100000)


class TestFrontier:
    def test_linear_cap_frontier(self):
        spec = get_game("linear_cap").spec
        rows = frontier_sample(spec, resolution=21, bid_resolution=11)
        assert rows
        utils = np.asarray([r["utilities"] for r in rows])
        actions = np.asarray([r["allocation"][0] for r in rows])
        # u_i = a - b_i rises with a at fixed bids, so the top action hosts
        # the whole frontier
        np.testing.assert_allclose(actions, 1.0)
        # extremes: all-cap bids hand the agent 2, zero bids hand each
        # principal 1
        assert any(np.allclose(u, [2.0, 0.0, 0.0], atol=1e-9) for u in utils)
        assert any(np.allclose(u, [0.0, 1.0, 1.0], atol=1e-9) for u in utils)

    def test_no_pairwise_domination(self):
        spec = get_game("linear_cap").spec
        rows = frontier_sample(spec, resolution=11, bid_resolution=7)
        utils = np.asarray([r["utilities"] for r in rows])
        for i in range(len(utils)):
            beats = np.all(utils >= utils[i] - 1e-12, axis=1) & np.any(
                utils > utils[i] + 1e-12, axis=1
            )
            assert not beats.any()

    def test_dominated_allocation_absent(self):
        spec = get_game("spillover").spec
        rows = frontier_sample(spec, resolution=21, bid_resolution=11)
        utils = np.asarray([r["utilities"] for r in rows])
        # zero bids at the top action yield (0, 1, 1), beaten by all-cap
        # bids at (2, 2, 2)
        assert not any(np.allclose(u, [0.0, 1.0, 1.0], atol=1e-9) for u in utils)
        assert any(np.allclose(u, [2.0, 2.0, 2.0], atol=1e-9) for u in utils)

    def test_rows_sorted_by_allocation(self):
        spec = get_game("linear_cap").spec
        rows = frontier_sample(spec, resolution=11, bid_resolution=7)
        keys = [tuple(r["allocation"]) for r in rows]
        assert keys == sorted(keys)

    def test_frontier_guard(self):
        spec = get_game("spillover").spec
        with pytest.raises(GameError, match="guard"):
            frontier_sample(spec, resolution=201, bid_resolution=201)


def test_certified_equilibria_pass_efficiency():
    # grid-scale restatement of the efficiency theorem on two fast builtins
    from agency import solve_truthful

    for name in ("linear_cap", "split_market"):
        spec = get_game(name).spec
        sol = solve_truthful(spec, resolution=101, scan=41)
        assert sol.candidates
        for cand in sol.candidates:
            alloc = make_allocation(
                spec, cand.action, cand.profile.at(cand.action)
            )
            report = check_efficiency(spec, alloc, bid_resolution=41, resolution=101)
            assert report.passed, (name, cand.action, report.witness)
