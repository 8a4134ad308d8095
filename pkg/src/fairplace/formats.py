"""JSON file formats for instances, solutions, portfolios, chains and reports.

All writers produce deterministic text (fixed key order, ``repr`` floats,
two-space indent, trailing newline).  Readers reject unknown keys.  Norms
are written as numbers or the string ``"inf"``; infinite floats elsewhere
(blowup tables) are also written as ``"inf"`` to stay within strict JSON.

Positions per metric variant: ``"x"`` (line), ``"xy"`` (euclidean),
``"point"`` (explicit, a label from ``metric.points``) and ``"vertex"``
(tree, a label from ``metric.vertices``).  Line and euclidean metrics take
their points from the facility and client records, labelled ``F:<id>`` and
``C:<id>``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import InvalidArgument, RangeError
from .instances import Client, Facility, Instance, MetricSpace, NormParam
from .objective import Solution, total_cost
from .portfolio import Portfolio, PortfolioEntry
from .refine import RefinementChain
from .solver import FractionalSolution

POS_KEY = {"line": "x", "euclidean": "xy", "explicit": "point", "tree": "vertex"}


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{path}: not valid JSON ({exc})") from None


def _keys(obj: Any, where: str, required: set[str], optional: set[str] = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise InvalidArgument(f"{where}: expected an object")
    missing = required - obj.keys()
    if missing:
        raise InvalidArgument(f"{where}: missing keys {sorted(missing)}")
    extra = obj.keys() - required - optional
    if extra:
        raise InvalidArgument(f"{where}: unknown keys {sorted(extra)}")


def _num(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidArgument(f"{where}: expected a number, got {v!r}")
    return float(v)


def _str(v: Any, where: str) -> str:
    if not isinstance(v, str):
        raise InvalidArgument(f"{where}: expected a string, got {v!r}")
    return v


def _float_out(v: float) -> float | str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _float_in(v: Any, where: str) -> float:
    if v in ("inf", "-inf"):
        return float(v)
    return _num(v, where)


# norms ----------------------------------------------------------------------


def norm_to_json(q: NormParam) -> float | str:
    """The exponent ``p``, chosen among neighbouring floats so that ``1/p`` gives back ``inv_p``."""
    if q.is_inf:
        return "inf"
    p = 1.0 / q.inv_p
    if not math.isfinite(p):
        raise RangeError(f"inv_p {q.inv_p!r} has no finite exponent p")
    for cand in (p, *np.nextafter(p, [np.inf, -np.inf])):
        if 1.0 / float(cand) == q.inv_p:
            return float(cand)
    return p


def norm_from_json(v: Any, where: str = "p") -> NormParam:
    if v == "inf":
        return NormParam(0.0)
    return NormParam.from_p(_num(v, where))


def parse_norm(text: str) -> NormParam:
    """Parse a command-line norm such as ``2``, ``1.5`` or ``inf``."""
    try:
        return NormParam.from_p(text)
    except ValueError as exc:
        raise InvalidArgument(f"bad norm {text!r}: {exc}") from None


# instances ------------------------------------------------------------------


def instance_to_json(inst: Instance) -> dict:
    m = inst.metric
    key = POS_KEY[m.kind]

    def pos(point: int):
        if m.kind == "line":
            return float(m.coords[point])
        if m.kind == "euclidean":
            return [float(v) for v in m.coords[point]]
        return m.labels[point]

    if m.kind == "explicit":
        metric = {"type": "explicit", "points": list(m.labels), "matrix": m.matrix.tolist()}
    elif m.kind == "tree":
        metric = {
            "type": "tree",
            "vertices": list(m.labels),
            "edges": [[m.labels[u], m.labels[v], float(w)] for u, v, w in m.edges],
        }
    else:
        metric = {"type": m.kind}
    out = {
        "metric": metric,
        "facilities": [{"id": f.id, "cost": float(f.cost), key: pos(f.point)} for f in inst.facilities],
        "clients": [{"id": c.id, "group": int(c.group), key: pos(c.point)} for c in inst.clients],
    }
    if inst.meta:
        out["meta"] = dict(inst.meta)
    return out


def _parse_metric(obj: Any) -> dict:
    if not isinstance(obj, dict) or "type" not in obj:
        raise InvalidArgument("metric: expected an object with a 'type'")
    kind = obj["type"]
    if kind in ("line", "euclidean"):
        _keys(obj, "metric", {"type"})
    elif kind == "explicit":
        _keys(obj, "metric", {"type", "points", "matrix"})
    elif kind == "tree":
        _keys(obj, "metric", {"type", "vertices", "edges"})
    else:
        raise InvalidArgument(f"metric: unknown type {kind!r}")
    return obj


def instance_from_json(obj: Any) -> Instance:
    """Build an instance from its JSON form.

    Only the format is checked here; call ``validate_instance`` for the
    semantic checks (metric axioms, costs, groups).

    Raises:
        InvalidArgument: on malformed or unknown fields.
    """
    _keys(obj, "instance", {"metric", "facilities", "clients"}, {"meta"})
    meta = _parse_metric(obj["metric"])
    kind = meta["type"]
    key = POS_KEY[kind]
    facs_raw, clis_raw = obj["facilities"], obj["clients"]
    if not isinstance(facs_raw, list) or not isinstance(clis_raw, list):
        raise InvalidArgument("facilities and clients must be arrays")
    for k, f in enumerate(facs_raw):
        _keys(f, f"facilities[{k}]", {"id", "cost", key})
    for k, c in enumerate(clis_raw):
        _keys(c, f"clients[{k}]", {"id", "group", key})

    if kind in ("line", "euclidean"):
        labels = [f"F:{_str(f['id'], 'facility id')}" for f in facs_raw]
        labels += [f"C:{_str(c['id'], 'client id')}" for c in clis_raw]
        if len(set(labels)) != len(labels):
            raise InvalidArgument("duplicate facility or client id")
        recs = facs_raw + clis_raw
        if kind == "line":
            metric = MetricSpace.line([_num(r["x"], "x") for r in recs], labels)
        else:
            xy = []
            for r in recs:
                v = r["xy"]
                if not isinstance(v, list) or len(v) != 2:
                    raise InvalidArgument(f"xy must be a pair, got {v!r}")
                xy.append([_num(a, "xy") for a in v])
            metric = MetricSpace.euclidean(np.asarray(xy, dtype=float).reshape(-1, 2), labels)
        fpts = list(range(len(facs_raw)))
        cpts = list(range(len(facs_raw), len(recs)))
    else:
        if kind == "explicit":
            names = [_str(v, "point") for v in meta["points"]]
            try:
                mat = np.asarray(meta["matrix"], dtype=float)
            except (TypeError, ValueError):
                raise InvalidArgument("metric.matrix must be a numeric matrix") from None
            metric = MetricSpace.explicit(mat, names)
        else:
            names = [_str(v, "vertex") for v in meta["vertices"]]
            edges = []
            for e in meta["edges"]:
                if not isinstance(e, list) or len(e) != 3:
                    raise InvalidArgument(f"tree edge must be [u, v, weight], got {e!r}")
                edges.append((_str(e[0], "edge"), _str(e[1], "edge"), _num(e[2], "edge weight")))
            metric = MetricSpace.tree(names, edges)
        fpts = [metric.resolve(_str(f[key], key)) for f in facs_raw]
        cpts = [metric.resolve(_str(c[key], key)) for c in clis_raw]

    facs = [Facility(_str(f["id"], "facility id"), p, _num(f["cost"], "cost")) for f, p in zip(facs_raw, fpts)]
    clis = []
    for c, p in zip(clis_raw, cpts):
        g = c["group"]
        if isinstance(g, bool) or not isinstance(g, int):
            raise InvalidArgument(f"client {c['id']!r}: group must be an integer")
        clis.append(Client(_str(c["id"], "client id"), p, g))
    extra = obj.get("meta", {})
    if not isinstance(extra, dict):
        raise InvalidArgument("meta must be an object")
    return Instance(metric, tuple(facs), tuple(clis), extra)


def instances_equal(a: Instance, b: Instance) -> bool:
    """Same ids, costs, groups and identical facility/client distances."""
    return (
        a.metric.kind == b.metric.kind
        and a.facility_ids == b.facility_ids
        and a.client_ids == b.client_ids
        and np.array_equal(a.costs, b.costs)
        and np.array_equal(a.groups, b.groups)
        and np.array_equal(a.cf, b.cf)
        and np.array_equal(a.ff, b.ff)
        and dict(a.meta) == dict(b.meta)
    )


def load_instance(path: str | Path) -> Instance:
    return instance_from_json(read_json(path))


def save_instance(path: str | Path, inst: Instance) -> None:
    write_json(path, instance_to_json(inst))


# solutions ------------------------------------------------------------------


def solution_core_to_json(sol: Solution) -> dict:
    return {"open": list(sol.open), "assign": {c: sol.assign[c] for c in sorted(sol.assign)}}


def solution_core_from_json(obj: Any, where: str = "solution") -> Solution:
    if not isinstance(obj.get("open"), list) or not isinstance(obj.get("assign"), dict):
        raise InvalidArgument(f"{where}: 'open' must be an array and 'assign' an object")
    opened = [_str(v, f"{where}.open") for v in obj["open"]]
    assign = {_str(c, f"{where}.assign"): _str(f, f"{where}.assign") for c, f in obj["assign"].items()}
    return Solution(tuple(opened), assign)


def solution_to_json(inst: Instance, sol: Solution, p: NormParam, model: str = "standard") -> dict:
    out = solution_core_to_json(sol)
    out["p"] = norm_to_json(p)
    out["model"] = model
    out["cost"] = total_cost(inst, sol, p, model).to_dict()
    return out


def solution_from_json(obj: Any) -> tuple[Solution, NormParam, str, dict]:
    """Return ``(solution, p, model, cost fields)``."""
    _keys(obj, "solution", {"open", "assign", "p", "model"}, {"cost"})
    sol = solution_core_from_json(obj)
    model = obj["model"]
    if model not in ("standard", "normalized"):
        raise InvalidArgument(f"unknown model {model!r}")
    return sol, norm_from_json(obj["p"]), model, obj.get("cost", {})


# portfolios -----------------------------------------------------------------


def portfolio_to_json(inst: Instance, port: Portfolio) -> list:
    return [
        {
            "q": norm_to_json(e.q),
            "cover": [norm_to_json(NormParam(e.cover[1])), norm_to_json(NormParam(e.cover[0]))],
            "solution": solution_to_json(inst, e.solution, e.q, port.model),
        }
        for e in port.entries
    ]


def portfolio_from_json(obj: Any, r: int | None = None) -> Portfolio:
    """Entries with ``cover`` given as a ``[lo, hi]`` range of p (``hi`` may be ``"inf"``)."""
    if not isinstance(obj, list):
        raise InvalidArgument("portfolio: expected an array")
    entries, models = [], set()
    for k, e in enumerate(obj):
        _keys(e, f"portfolio[{k}]", {"q", "cover", "solution"})
        sol, p, model, cost = solution_from_json(e["solution"])
        q = norm_from_json(e["q"], "q")
        if p != q:
            raise InvalidArgument(f"portfolio[{k}]: solution norm differs from q")
        cov = e["cover"]
        if not isinstance(cov, list) or len(cov) != 2:
            raise InvalidArgument(f"portfolio[{k}]: cover must be [lo, hi]")
        lo_p, hi_p = norm_from_json(cov[0], "cover"), norm_from_json(cov[1], "cover")
        entries.append(PortfolioEntry(q, (hi_p.inv_p, lo_p.inv_p), sol, float(cost.get("total", math.nan))))
        models.add(model)
    if len(models) > 1:
        raise InvalidArgument("portfolio mixes models")
    model = models.pop() if models else "standard"
    return Portfolio(entries, r if r is not None else 0, model, "file")


# chains ---------------------------------------------------------------------


def _label_to_json(q) -> Any:
    return norm_to_json(q) if isinstance(q, NormParam) else str(q)


def _label_from_json(v: Any):
    if v == "inf" or (isinstance(v, (int, float)) and not isinstance(v, bool)):
        return norm_from_json(v, "norms")
    return _str(v, "norms")


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return _float_out(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, NormParam):
        return norm_to_json(v)
    return v


def chain_to_json(chain: RefinementChain) -> dict:
    out = {
        "direction": chain.direction,
        "norms": [_label_to_json(q) for q in chain.norms],
        "levels": [solution_core_to_json(s) for s in chain.levels],
        "blowup_table": None
        if chain.blowup_table is None
        else [[_float_out(v) for v in row] for row in chain.blowup_table],
    }
    if chain.meta:
        out["meta"] = _jsonable(chain.meta)
    return out


def chain_from_json(obj: Any) -> RefinementChain:
    _keys(obj, "chain", {"direction", "norms", "levels"}, {"blowup_table", "meta"})
    if not isinstance(obj["norms"], list) or not isinstance(obj["levels"], list):
        raise InvalidArgument("chain: 'norms' and 'levels' must be arrays")
    levels = []
    for k, lv in enumerate(obj["levels"]):
        _keys(lv, f"levels[{k}]", {"open", "assign"})
        levels.append(solution_core_from_json(lv, f"levels[{k}]"))
    table = obj.get("blowup_table")
    if table is not None:
        table = [[_float_in(v, "blowup_table") for v in row] for row in table]
    return RefinementChain(
        [_label_from_json(v) for v in obj["norms"]], levels, obj["direction"], table, dict(obj.get("meta", {}))
    )


# reports and debugging dumps ------------------------------------------------


def report_to_json(violations) -> list:
    return [v.to_dict() for v in violations]


def fractional_to_json(frac: FractionalSolution, inst: Instance | None = None) -> dict:
    out = _jsonable(frac.to_dict())
    if inst is not None:
        out["facilities"] = list(inst.facility_ids)
        out["clients"] = list(inst.client_ids)
    return out


def as_mapping(obj: Mapping) -> dict:
    return _jsonable(dict(obj))
