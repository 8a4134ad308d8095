import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairplace.errors import InvalidArgument, RangeError
from fairplace.formats import (
    chain_from_json,
    chain_to_json,
    dumps,
    instance_from_json,
    instance_to_json,
    instances_equal,
    load_instance,
    norm_from_json,
    norm_to_json,
    parse_norm,
    portfolio_from_json,
    portfolio_to_json,
    save_instance,
    solution_from_json,
    solution_to_json,
)
from fairplace.instances import NormParam, gen_greedy_adversarial, gen_star_lower_bound
from fairplace.objective import total_cost
from fairplace.portfolio import build_portfolio, lookup_entry, norm_grid
from fairplace.refine import refine_pipeline
from fairplace.solver import approx_solve

from helpers import NORMS, P2, PINF, small_random


def roundtrip(obj):
    return json.loads(dumps(obj))


@pytest.mark.parametrize("metric", ["line", "euclidean", "explicit", "tree"])
@pytest.mark.parametrize("seed", range(3))
def test_instance_roundtrip(metric, seed):
    inst = small_random(seed, metric=metric, nf=4, nc=6, r=3)
    back = instance_from_json(roundtrip(instance_to_json(inst)))
    assert instances_equal(inst, back)
    assert dumps(instance_to_json(back)) == dumps(instance_to_json(inst))


def test_generated_instances_roundtrip(tmp_path):
    for inst in (gen_star_lower_bound(4, 2), gen_greedy_adversarial(3, 0.01)):
        path = tmp_path / "i.json"
        save_instance(path, inst)
        assert instances_equal(load_instance(path), inst)


def test_instance_unknown_keys_rejected():
    obj = instance_to_json(small_random(0))
    with pytest.raises(InvalidArgument):
        instance_from_json({**obj, "extra": 1})
    obj2 = roundtrip(obj)
    obj2["clients"][0]["weight"] = 2
    with pytest.raises(InvalidArgument):
        instance_from_json(obj2)
    obj3 = roundtrip(obj)
    obj3["metric"]["type"] = "sphere"
    with pytest.raises(InvalidArgument):
        instance_from_json(obj3)


def test_instance_bad_values_rejected():
    obj = roundtrip(instance_to_json(small_random(0)))
    obj["clients"][0]["group"] = 1.5
    with pytest.raises(InvalidArgument):
        instance_from_json(obj)
    obj = roundtrip(instance_to_json(small_random(0)))
    obj["facilities"][0]["cost"] = "cheap"
    with pytest.raises(InvalidArgument):
        instance_from_json(obj)


def test_dumps_is_stable_and_strict():
    text = dumps({"b": 1, "a": [1.5]})
    assert text.endswith("\n") and json.loads(text) == {"b": 1, "a": [1.5]}
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


def test_norm_encoding():
    assert norm_to_json(PINF) == "inf"
    assert norm_from_json("inf") == PINF
    assert norm_to_json(P2) == 2.0
    assert parse_norm("2") == P2 and parse_norm("inf") == PINF
    with pytest.raises(InvalidArgument):
        parse_norm("abc")
    with pytest.raises(InvalidArgument):
        norm_from_json(0.5)


def test_subnormal_inv_p_has_no_exponent():
    with pytest.raises(RangeError):
        norm_to_json(NormParam(1e-310))


@given(st.one_of(st.just(0.0), st.floats(1e-300, 1.0)))
def test_norm_roundtrip_close(inv):
    # not every inv_p has an exact float preimage p, so allow a few ulps
    q = NormParam(inv)
    back = norm_from_json(roundtrip({"p": norm_to_json(q)})["p"])
    assert abs(back.inv_p - q.inv_p) <= 4 * np.spacing(max(q.inv_p, 1e-300))


def test_grid_norms_roundtrip_exact():
    for n in (2, 3, 9, 17, 33, 100):
        for q in norm_grid(n):
            assert norm_from_json(roundtrip([norm_to_json(q)])[0]) == q


def test_solution_roundtrip():
    inst = small_random(4, nf=5, nc=7, r=2)
    sol = approx_solve(inst, P2)
    obj = roundtrip(solution_to_json(inst, sol, P2, "normalized"))
    back, p, model, cost = solution_from_json(obj)
    assert back == sol and p == P2 and model == "normalized"
    assert cost["total"] == pytest.approx(total_cost(inst, sol, P2, "normalized").total)
    del obj["cost"]
    assert solution_from_json(obj)[0] == sol
    with pytest.raises(InvalidArgument):
        solution_from_json({**obj, "bonus": 1})


def test_portfolio_roundtrip():
    inst = small_random(2, nf=5, nc=8, r=4)
    port = build_portfolio(inst, grid_size=17)
    back = portfolio_from_json(roundtrip(portfolio_to_json(inst, port)), inst.r)
    assert len(back) == len(port)
    for a, b in zip(port.entries, back.entries):
        assert a.q == b.q and a.solution == b.solution
        assert np.allclose(a.cover, b.cover, rtol=1e-12)
    for q in norm_grid(17):
        assert lookup_entry(back, q).q == lookup_entry(port, q).q


@pytest.mark.parametrize("mode", ["weak", "strong", "greedy"])
def test_chain_roundtrip(mode):
    inst = small_random(3, nf=5, nc=7, r=3)
    chain = refine_pipeline(inst, list(NORMS), mode=mode)
    back = chain_from_json(roundtrip(chain_to_json(chain)))
    assert back.norms == chain.norms and back.levels == chain.levels
    assert back.direction == chain.direction
    assert np.array_equal(np.array(back.blowup_table), np.array(chain.blowup_table))
    assert back.meta["mode"] == mode


def test_chain_with_string_labels_and_inf_blowup():
    obj = {
        "direction": "increasing",
        "norms": ["a", 2, "inf"],
        "levels": [{"open": ["f"], "assign": {"c": "f"}}] * 3,
        "blowup_table": [[1.0, "inf", 1.0]],
    }
    chain = chain_from_json(obj)
    assert chain.norms == ["a", P2, PINF]
    assert chain.blowup_table[0][1] == float("inf")
    assert roundtrip(chain_to_json(chain))["blowup_table"] == obj["blowup_table"]
    with pytest.raises(InvalidArgument):
        chain_from_json({**obj, "levels": [{"open": ["f"], "assign": {}, "x": 1}]})
    with pytest.raises(InvalidArgument):
        chain_from_json({**obj, "direction": "sideways"})
