import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from fairplace.errors import InvalidArgument, RangeError
from fairplace.formats import dumps, instance_to_json
from fairplace.instances import (
    Client,
    Facility,
    Instance,
    MetricSpace,
    NormParam,
    RandomParams,
    SplitMix64,
    distance,
    gen_greedy_adversarial,
    gen_random,
    gen_star_lower_bound,
    line_instance,
    validate_instance,
)
from fairplace.objective import nearest_assignment, total_cost

from helpers import close


# --- distance -------------------------------------------------------------


def test_line_distance():
    m = MetricSpace.line([0.0, 1.0], ["u", "v"])
    assert distance(m, "u", "v") == 1.0


@pytest.mark.parametrize(
    "m",
    [
        MetricSpace.line([3.0, -1.0]),
        MetricSpace.euclidean([[0, 0], [3, 4]]),
        MetricSpace.explicit([[0, 2], [2, 0]]),
        MetricSpace.tree(["a", "b"], [("a", "b", 2.5)]),
    ],
)
def test_self_distance_is_zero(m):
    for u in range(m.n):
        assert distance(m, u, u) == 0.0


def test_tree_path_sum():
    m = MetricSpace.tree(["0", "1", "2"], [("0", "1", 2.0), ("1", "2", 3.0)])
    assert distance(m, "0", "2") == 5.0


def test_euclidean_distance():
    m = MetricSpace.euclidean([[0, 0], [3, 4]], ["a", "b"])
    assert distance(m, "a", "b") == 5.0


def test_unknown_point():
    m = MetricSpace.line([0.0, 1.0], ["u", "v"])
    with pytest.raises(InvalidArgument):
        distance(m, "w", "u")
    with pytest.raises(InvalidArgument):
        distance(m, 7, "u")


@pytest.mark.parametrize("metric", ["line", "euclidean", "explicit", "tree"])
@given(seed=st.integers(0, 2**32), triple=st.tuples(*[st.integers(0, 100)] * 3))
@example(seed=102139, triple=(0, 41, 0))  # tree distances once differed by direction
def test_metric_axioms_on_random_points(metric, seed, triple):
    inst = gen_random(RandomParams(6, 6, 2, metric=metric), seed)
    m = inst.metric
    u, v, w = (i % m.n for i in triple)
    duv, dvw, duw = distance(m, u, v), distance(m, v, w), distance(m, u, w)
    assert duv == distance(m, v, u) >= 0
    assert duw <= duv + dvw + 1e-9


# --- NormParam --------------------------------------------------------------


def test_norm_param_encoding():
    assert NormParam.from_p(1).inv_p == 1.0
    assert NormParam.from_p("inf").is_inf
    assert NormParam.from_p(math.inf) == NormParam(0.0)
    assert NormParam.from_p(4).p == 4.0
    assert NormParam.from_p(2).label() == "2"
    with pytest.raises(InvalidArgument):
        NormParam(1.5)
    with pytest.raises(InvalidArgument):
        NormParam.from_p(0.5)


# --- validation -------------------------------------------------------------


def test_valid_two_facility_line():
    inst = line_instance([("a", 0.0, 1.0), ("b", 5.0, 2.0)], [("c", 1.0, 0)])
    assert validate_instance(inst) == []


def test_triangle_violation_listed():
    d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    m = MetricSpace.explicit(d, ["0", "1", "2"])
    inst = Instance(m, (Facility("f", 0, 1.0),), (Client("c", 2, 0),))
    checks = {v.check for v in validate_instance(inst)}
    assert "metric.triangle" in checks


def test_group_out_of_range_listed():
    inst = line_instance([("a", 0.0, 1.0)], [("c0", 1.0, 0), ("c1", 2.0, 3)])
    assert inst.r == 2
    bad = validate_instance(inst)
    assert [v.check for v in bad] == ["instance.partition"]
    assert "c1" in bad[0].location


def test_other_violations():
    cyc = MetricSpace.tree(["a", "b", "c"], [("a", "b", 1), ("b", "c", 1), ("c", "a", 1)])
    inst = Instance(cyc, (Facility("f", 0, -1.0),), ())
    checks = {v.check for v in validate_instance(inst)}
    assert {"metric.tree_acyclic", "instance.cost", "instance.groups"} <= checks
    split = MetricSpace.tree(["a", "b", "c", "d"], [("a", "b", 1), ("c", "d", 1), ("d", "c", 1)])
    assert "metric.tree_connected" in {v.check for v in validate_instance(Instance(split, (), ()))}
    asym = MetricSpace.explicit([[0, 1], [2, 0]])
    assert "metric.symmetry" in {v.check for v in validate_instance(Instance(asym, (Facility("f", 0, 0.0),), ()))}


# --- star construction -------------------------------------------------------


def test_star_4_2():
    inst = gen_star_lower_bound(4, 2)
    assert inst.n_clients == 16 and inst.r == 16
    f1, f2 = inst.facility_index["f1"], inst.facility_index["f2"]
    assert list(inst.costs[[f1, f2]]) == [4.0, 16.0]
    assert inst.cf[0, f1] == 2.0 and inst.cf[0, f2] == 1.0


def test_star_2_1():
    inst = gen_star_lower_bound(2, 1)
    assert inst.n_clients == 2
    assert inst.n_facilities == 1
    assert inst.costs[0] == 2.0 and inst.cf[0, 0] == 1.0


def test_star_3_3():
    inst = gen_star_lower_bound(3, 3)
    assert inst.n_clients == 27
    assert list(inst.costs) == [3.0, 9.0, 27.0]
    want = [3 ** (2 / 3), 3 ** (1 / 3), 1.0]
    assert all(close(a, b) for a, b in zip(inst.cf[0], want))


def test_star_overflow():
    with pytest.raises(RangeError):
        gen_star_lower_bound(2**20, 3)
    with pytest.raises(InvalidArgument):
        gen_star_lower_bound(1, 2)


@pytest.mark.parametrize("t,k", [(4, 2), (3, 3), (8, 3)])
def test_star_closed_form_costs(t, k):
    # opening only leaf j: t^j + r^(1/p) * t^((k-j)/k), with all r singleton groups at the same distance
    inst = gen_star_lower_bound(t, k)
    r = t**k
    for j in range(1, k + 1):
        fid = inst.facility_ids[j - 1]
        sol = nearest_assignment(inst, [fid])
        for i in range(1, k + 1):
            p = NormParam.from_p(k / i)
            want = t**j + r ** (i / k) * t ** ((k - j) / k)
            assert close(total_cost(inst, sol, p).total, want)


# --- adversarial construction ------------------------------------------------


def _xs(inst, ids):
    m = inst.metric
    return sorted(float(m.coords[inst.facilities[inst.facility_index[f]].point]) for f in ids)


def test_adversarial_l2():
    inst = gen_greedy_adversarial(2, 0.1)
    c = float(inst.metric.coords[inst.clients[0].point])
    assert c == 0.0
    assert _xs(inst, inst.facility_ids) == [-1.1, 1.0, 3.0]
    chain = inst.meta["chain"]
    assert [_xs(inst, g) for g in chain] == [[-1.1, 1.0, 3.0], [-1.1, 3.0]]


def test_adversarial_l1():
    inst = gen_greedy_adversarial(1, 0.5)
    assert [_xs(inst, g) for g in inst.meta["chain"]] == [[-1.5, 1.0]]


def test_adversarial_chain_nested():
    inst = gen_greedy_adversarial(5, 0.01)
    chain = [set(g) for g in inst.meta["chain"]]
    assert all(a >= b for a, b in zip(chain, chain[1:]))
    assert validate_instance(inst) == []


# --- random generator ---------------------------------------------------------


def test_random_deterministic():
    p = RandomParams(5, 8, 3, metric="tree")
    assert dumps(instance_to_json(gen_random(p, 11))) == dumps(instance_to_json(gen_random(p, 11)))
    assert dumps(instance_to_json(gen_random(p, 11))) != dumps(instance_to_json(gen_random(p, 12)))


def test_random_valid():
    inst = gen_random(RandomParams(5, 8, 3, metric="line"), 1)
    assert validate_instance(inst) == []
    assert inst.r == 3


def test_random_rejects_bad_sizes():
    with pytest.raises(InvalidArgument):
        gen_random(RandomParams(5, 0, 1), 1)
    with pytest.raises(InvalidArgument):
        gen_random(RandomParams(5, 2, 3), 1)


@pytest.mark.parametrize("metric", ["line", "euclidean", "explicit", "tree"])
@given(seed=st.integers(0, 2**64 - 1), nf=st.integers(1, 7), nc=st.integers(1, 9), r=st.integers(1, 4))
def test_generated_instances_validate(metric, seed, nf, nc, r):
    r = min(r, nc)
    inst = gen_random(RandomParams(nf, nc, r, metric=metric), seed)
    assert validate_instance(inst) == []
    assert inst.r == r
    assert np.all(inst.group_sizes >= 1)


def test_splitmix_reference_values():
    # first outputs for seed 0, from the published SplitMix64 reference
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]
    rng = SplitMix64(5)
    draws = [rng.randbelow(7) for _ in range(200)]
    assert set(draws) == set(range(7))


def test_with_costs_uniform():
    inst = gen_random(RandomParams(4, 5, 2), 3).with_costs(2.5)
    assert list(inst.costs) == [2.5] * 4
