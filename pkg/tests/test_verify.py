import math

import pytest

from fairplace.errors import InvalidArgument
from fairplace.instances import line_instance
from fairplace.objective import Solution, nearest_assignment
from fairplace.portfolio import build_portfolio
from fairplace.refine import RefinementChain, chain_from_sets, discounted_lookahead, refine_pipeline
from fairplace.solver import approx_solve, brute_force_opt
from fairplace.verify import (
    block_violations,
    check_strong,
    check_weak,
    measure_ratios,
    ratio_rows_for_csv,
)

from helpers import NORMS, P1, P2, PINF, small_random


def abc():
    return line_instance(
        [("A", 0.0, 1.0), ("B", 4.0, 1.0), ("C", 9.0, 1.0)],
        [("x", 1.0, 0), ("y", 5.0, 1), ("z", 8.0, 0)],
    )


def test_weak_valid_single_and_reversed():
    inst = abc()
    chain = chain_from_sets(inst, [[0, 1, 2], [1, 2], [2]], ["1", "2", "3"])
    assert check_weak(chain) == []
    assert check_weak(RefinementChain(["1"], chain.levels[:1])) == []
    flipped = RefinementChain(chain.norms, chain.levels[::-1], "decreasing")
    bad = check_weak(flipped)
    assert len(bad) == 3 and {v.check for v in bad} == {"weak.nesting"}
    assert check_weak(chain.reversed()) == []


def test_strong_identical_and_split():
    inst = abc()
    sol = nearest_assignment(inst, ["A", "B", "C"])
    assert check_strong(RefinementChain(["1", "2"], [sol, sol])) == []
    fine = Solution(("A", "B", "C"), {"x": "A", "y": "B", "z": "B"})
    coarse = Solution(("B", "C"), {"x": "B", "y": "B", "z": "C"})
    bad = check_strong(RefinementChain(["1", "2"], [fine, coarse]))
    assert [v.check for v in bad] == ["strong.block"]
    assert "facility B" in bad[0].location
    assert block_violations(fine, fine, "w") == []


def test_strong_flags_closed_targets():
    bad = Solution(("A",), {"x": "B"})
    assert [v.check for v in check_strong(RefinementChain(["1"], [bad]))] == ["chain.assignment"]


@pytest.mark.parametrize("seed", range(6))
def test_lookahead_outputs_pass(seed):
    inst = small_random(seed, metric="explicit", nf=6, nc=7, r=2)
    chain = chain_from_sets(inst, [[0, 1, 2, 3, 4, 5], [0, 2, 4], [4]], ["1", "2", "3"])
    assert check_strong(discounted_lookahead(inst, chain)) == []


def test_measure_optimal_solution():
    inst = small_random(2, nf=4, nc=6)
    opt_sol, _ = brute_force_opt(inst, P2)
    table = measure_ratios(inst, opt_sol, [P2])
    assert table.oracle_available and table.rows[0].ratio == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(InvalidArgument):
        measure_ratios(inst, opt_sol)


@pytest.mark.parametrize("seed", range(6))
def test_measure_approx_and_portfolio(seed):
    inst = small_random(seed, metric="euclidean", nf=5, nc=7, r=3)
    for q in NORMS:
        assert measure_ratios(inst, approx_solve(inst, q), [q]).max_ratio <= 4 * (1 + 1e-9)
    port = build_portfolio(inst, grid_size=9, mode="oracle")
    assert measure_ratios(inst, port, list(NORMS)).max_ratio <= 8 * (1 + 1e-9)


def test_measure_chain_blowups():
    inst = small_random(1, nf=5, nc=7, r=2)
    chain = refine_pipeline(inst, list(NORMS))
    table = measure_ratios(inst, chain)
    assert [r.level for r in table.rows] == [1, 2, 3]
    assert table.blowup["max"] <= chain.meta["u_max"] * (1 + 1e-9)
    assert len(table.blowup["per_level_max"]) == 3
    assert len(ratio_rows_for_csv(table)) == 3


def test_measure_over_cap(monkeypatch):
    inst = small_random(1, nf=5, nc=7, r=2)
    monkeypatch.setenv("FAIRPLACE_BF_CAP", "3")
    table = measure_ratios(inst, approx_solve(inst, P1), [P1, PINF])
    assert not table.oracle_available
    assert all(r.opt is None and r.ratio is None and math.isfinite(r.cost) for r in table.rows)
    assert table.max_ratio is None
    assert ratio_rows_for_csv(table)[0][3:] == ["", ""]
