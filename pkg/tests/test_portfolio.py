import math

import pytest

from fairplace.errors import InvalidArgument
from fairplace.instances import NormParam, gen_star_lower_bound, line_instance
from fairplace.objective import total_cost
from fairplace.portfolio import (
    _pick,
    build_portfolio,
    cover_lookup,
    default_grid_size,
    lookup_entry,
    norm_grid,
    representative_norms,
    transfer_ratio,
)
from fairplace.solver import approx_solve, brute_force_opt

from helpers import NORMS, P1, PINF, close, small_random


def log_bound(r):
    return max(1, math.ceil(math.log2(r)))


def test_zero_opt_instance_single_norm():
    inst = line_instance([("a", 0.0, 0.0)], [("c0", 0.0, 0), ("c1", 0.0, 1)])
    assert representative_norms(inst, grid_size=9) == [P1]


def test_single_group_single_norm():
    inst = small_random(3, r=1)
    assert representative_norms(inst, grid_size=9) == [P1]
    assert len(build_portfolio(inst, grid_size=9)) == 1


def test_star_norms():
    inst = gen_star_lower_bound(4, 2)
    for mode in ("approx", "oracle", "relaxation"):
        qs = representative_norms(inst, grid_size=17, mode=mode)
        assert qs[0] == P1
        assert 1 <= len(qs) <= math.ceil(math.log2(32 / 12)) + 1
    assert len(build_portfolio(inst, grid_size=17)) <= math.ceil(math.log2(16))


def test_pick_halving_rule():
    assert _pick([8, 7, 3.9, 3.5, 1.9, 2.5]) == [0, 2, 4]
    assert _pick([4, 4, 4]) == [0]
    # a non-monotone bump never re-triggers the envelope
    assert _pick([8, 9, 3, 10, 1]) == [0, 2, 4]


def test_grid():
    g = norm_grid(5)
    assert g[0] == P1 and g[-1] == PINF
    assert [q.inv_p for q in g] == sorted((q.inv_p for q in g), reverse=True)
    assert default_grid_size(1) == 2 and default_grid_size(16) == 18
    with pytest.raises(InvalidArgument):
        norm_grid(1)


@pytest.mark.parametrize("model", ["standard", "normalized"])
@pytest.mark.parametrize("seed", range(6))
def test_covers_tile_unit_interval(model, seed):
    port = build_portfolio(small_random(seed, nf=5, nc=8, r=4), model, grid_size=17)
    covers = sorted(e.cover for e in port.entries)
    assert covers[0][0] == 0.0 and covers[-1][1] == 1.0
    assert all(a[1] == b[0] for a, b in zip(covers, covers[1:]))
    for e in port.entries:
        assert lookup_entry(port, e.q) is e
        assert e.cover[0] <= e.q.inv_p <= e.cover[1]


def test_lookup_endpoints():
    inst = gen_star_lower_bound(4, 2)
    port = build_portfolio(inst, grid_size=17, mode="oracle")
    assert lookup_entry(port, P1) is port.entries[0]
    assert lookup_entry(port, PINF) is port.entries[-1]
    if len(port) > 1:
        shared = NormParam(port.entries[1].cover[1])
        # standard model: a shared endpoint belongs to the entry whose q sits there (smaller p side)
        assert lookup_entry(port, shared) is port.entries[1]


@pytest.mark.parametrize("model", ["standard", "normalized"])
@pytest.mark.parametrize("seed", range(8))
def test_oracle_portfolio_covers_within_eight(model, seed):
    inst = small_random(seed, metric="explicit", nf=5, nc=8, r=4)
    port = build_portfolio(inst, model, grid_size=17, mode="oracle")
    assert len(port) <= log_bound(inst.r)
    for q in norm_grid(17):
        cost = total_cost(inst, cover_lookup(port, q), q, model).total
        assert cost <= 8 * brute_force_opt(inst, q, model)[1] * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_relaxation_mode_size_bound(seed):
    inst = small_random(seed, metric="tree", nf=5, nc=8, r=4)
    assert len(build_portfolio(inst, grid_size=17, mode="relaxation")) <= log_bound(inst.r)


def test_transfer_ratio_examples():
    assert transfer_ratio(4, 16, P1, PINF) == 64
    assert transfer_ratio(3.5, 9, NormParam(0.4), NormParam(0.4)) == 3.5
    assert close(transfer_ratio(1, 4, NormParam(0.5), NormParam(0.25)), 2**0.5)
    with pytest.raises(InvalidArgument):
        transfer_ratio(0.5, 4, P1, PINF)


@pytest.mark.parametrize("seed", range(6))
def test_transfer_ratio_holds_both_directions(seed):
    inst = small_random(seed, metric="euclidean", nf=5, nc=8, r=4)
    opt = {q: brute_force_opt(inst, q) for q in NORMS}
    for p in NORMS:
        sol = approx_solve(inst, p)
        alpha = max(1.0, total_cost(inst, sol, p).total / opt[p][1])
        for q in NORMS:
            bound = transfer_ratio(alpha, inst.r, p, q) * opt[q][1]
            assert total_cost(inst, sol, q).total <= bound * (1 + 1e-9)
