"""Command-line front end.

Every subcommand reads and writes the JSON formats of ``fairplace.formats``
(``bench`` writes CSV).  Exit codes: 0 on success, 1 when an input fails
validation or a verification report is non-empty, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from typing import Sequence

from . import formats
from .errors import FairplaceError, InvalidArgument, InvalidSolution, Violation
from .hierarchy import HierarchicalInstance, check_hierarchy, solve_hierarchical
from .instances import (
    RandomParams,
    gen_greedy_adversarial,
    gen_random,
    gen_star_lower_bound,
    validate_instance,
)
from .line import expand_intervals
from .objective import Solution
from .portfolio import build_portfolio, norm_grid
from .refine import default_gamma, recurrence_bound, refine_pipeline, select_backend
from .solver import approx_solve_detailed, brute_force_opt
from .verify import check_interval_tree, check_strong, check_weak, measure_ratios

BF_ENV = "FAIRPLACE_BF_CAP"


class ValidationFailed(Exception):
    def __init__(self, violations: list[Violation]):
        super().__init__(f"{len(violations)} violation(s)")
        self.violations = violations


# helpers --------------------------------------------------------------------


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _norm_list(text: str):
    if text == "all":
        return "all"
    return [formats.parse_norm(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InvalidArgument(f"bad number list {text!r}") from None


def _load(path: str):
    inst = formats.load_instance(path)
    bad = validate_instance(inst)
    if bad:
        raise ValidationFailed(bad)
    return inst


def _solver_kw(args) -> dict:
    kw = {"tol": args.tol, "max_iters": args.max_iters}
    if getattr(args, "alpha", None) is not None:
        kw["alpha"] = args.alpha
    return kw


def _random_params(args) -> RandomParams:
    lo, hi = _float_list(args.cost_range) if "," in args.cost_range else [float(args.cost_range)] * 2
    return RandomParams(args.facilities, args.clients, args.groups, metric=args.metric, cost_range=(lo, hi))


def _gamma(text: str | None):
    if text is None or text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise InvalidArgument(f"bad gamma {text!r}") from None


# subcommands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.kind == "star":
        inst = gen_star_lower_bound(args.t, args.k)
    elif args.kind == "adversarial":
        inst = gen_greedy_adversarial(args.l, args.eps)
    else:
        inst = gen_random(_random_params(args), args.seed)
    _emit(formats.dumps(formats.instance_to_json(inst)), args.output)
    return 0


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    p = formats.parse_norm(args.p)
    if args.brute_force:
        sol, _ = brute_force_opt(inst, p, args.model)
    else:
        res = approx_solve_detailed(inst, p, args.model, **_solver_kw(args))
        sol = res.solution
        if args.fractional_out:
            formats.write_json(args.fractional_out, formats.fractional_to_json(res.fractional, inst))
    doc = formats.solution_to_json(inst, sol, p, args.model)
    _emit(formats.dumps(doc), args.output)
    print(f"cost {doc['cost']['total']!r}", file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return 0


def cmd_portfolio(args) -> int:
    inst = _load(args.instance)
    kw = _solver_kw(args) if args.mode != "oracle" else {}
    port = build_portfolio(inst, args.model, args.grid, args.mode, **kw)
    _emit(formats.dumps(formats.portfolio_to_json(inst, port)), args.output)
    return 0


def cmd_refine(args) -> int:
    inst = _load(args.instance)
    backend = args.backend
    if backend is None:
        backend = "auto" if args.metric_aware else "general"
    if args.mode == "strong":
        backend = select_backend(inst, backend)
    chain = refine_pipeline(
        inst, _norm_list(args.norms), args.model, args.mode, backend, _gamma(args.gamma), **_solver_kw(args)
    )
    _emit(formats.dumps(formats.chain_to_json(chain)), args.output)
    return 0


def cmd_hierarchy(args) -> int:
    inst = _load(args.instance)
    h = HierarchicalInstance(inst, tuple(_float_list(args.costs)), formats.parse_norm(args.p), args.model)
    res = solve_hierarchical(h, args.backend, oracle=not args.no_oracle, threads=args.threads, **_solver_kw(args))
    rep = res.report
    doc = {
        "backend": res.backend,
        "level_costs": list(h.level_costs),
        "p": formats.norm_to_json(h.p),
        "model": h.model,
        "levels": [formats.solution_core_to_json(s) for s in res.solutions],
        "costs": res.costs,
        "approx_costs": res.approx_costs,
        "opts": rep.opts,
        "ratios": rep.ratios,
        "worst_ratio": rep.worst_ratio,
        "ratio_bound": res.ratio_bound,
    }
    _emit(formats.dumps(doc), args.output)
    return 0


def _hierarchy_from_json(obj, inst):
    formats._keys(
        obj,
        "hierarchy",
        {"level_costs", "p", "model", "levels"},
        {"backend", "costs", "approx_costs", "opts", "ratios", "worst_ratio", "ratio_bound"},
    )
    h = HierarchicalInstance(inst, tuple(obj["level_costs"]), formats.norm_from_json(obj["p"]), obj["model"])
    sols = [formats.solution_core_from_json(lv, f"levels[{k}]") for k, lv in enumerate(obj["levels"])]
    return h, sols


def cmd_verify(args) -> int:
    report: list[Violation] = []
    inst = None
    if args.instance:
        inst = formats.load_instance(args.instance)
        report += validate_instance(inst)
    if args.chain:
        chain = formats.chain_from_json(formats.read_json(args.chain))
        report += check_weak(chain)
        if args.check in ("strong", "all"):
            report += check_strong(chain)
    if args.solution:
        if inst is None:
            raise InvalidArgument("--solution needs --instance")
        sol, _, _, _ = formats.solution_from_json(formats.read_json(args.solution))
        report += _solution_violations(inst, sol)
    if args.portfolio:
        if inst is None:
            raise InvalidArgument("--portfolio needs --instance")
        port = formats.portfolio_from_json(formats.read_json(args.portfolio))
        for k, e in enumerate(port.entries):
            report += _solution_violations(inst, e.solution, f"entry {k}")
    if args.hierarchy:
        if inst is None:
            raise InvalidArgument("--hierarchy needs --instance")
        h, sols = _hierarchy_from_json(formats.read_json(args.hierarchy), inst)
        report += check_hierarchy(h, sols, oracle=False).violations
    if args.line_chain:
        res = expand_intervals([_float_list(level) for level in args.line_chain.split(";")], check=False)
        report += check_interval_tree(res)
    _emit(formats.dumps(formats.report_to_json(report)), args.output)
    return 1 if report else 0


def _solution_violations(inst, sol: Solution, where: str = "solution") -> list[Violation]:
    try:
        sol.assign_index(inst)
    except InvalidSolution as exc:
        return [Violation("solution.valid", where, str(exc))]
    return []


BENCH_COLUMNS = {
    "approx": ["seed", "metric", "p", "model", "cost", "relaxation", "opt", "ratio"],
    "portfolio": ["seed", "metric", "p", "model", "size", "cost", "opt", "ratio"],
    "refine": ["seed", "metric", "level", "p", "model", "cost", "opt", "ratio", "max_blowup"],
    "recurrence": ["l", "gamma", "max_u", "bound"],
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_bench(args) -> int:
    norms = _norm_list(args.norms)
    if norms == "all":
        raise InvalidArgument("bench needs explicit norms")
    rows: list[list] = []
    if args.kind == "recurrence":
        for l in range(1, args.max_l + 1):
            for g in (1.1, 1.5, 2.0, default_gamma(l)):
                t = recurrence_bound(l, g)
                rows.append([l, g, t.max, t.bound])
    else:
        sources = []
        if args.instance:
            sources.append((None, _load(args.instance)))
        else:
            for s in range(args.count):
                seed = args.seed + s
                sources.append((seed, gen_random(_random_params(args), seed)))
        for seed, inst in sources:
            metric = inst.metric.kind
            if args.kind == "approx":
                for p in norms:
                    res = approx_solve_detailed(inst, p, args.model, **_solver_kw(args))
                    opt = brute_force_opt(inst, p, args.model)[1]
                    rows.append([seed, metric, p.label(), args.model, res.cost, res.fractional.value, opt, res.cost / opt if opt > 0 else None])
            elif args.kind == "portfolio":
                port = build_portfolio(inst, args.model, args.grid, args.mode, **(_solver_kw(args) if args.mode != "oracle" else {}))
                table = measure_ratios(inst, port, norm_grid(args.grid), args.model)
                for r in table.rows:
                    rows.append([seed, metric, r.p.label(), args.model, len(port), r.cost, r.opt, r.ratio])
            else:
                backend = select_backend(inst, "auto") if args.metric_aware else "general"
                chain = refine_pipeline(inst, norms, args.model, args.mode, backend, None, **_solver_kw(args))
                table = measure_ratios(inst, chain, model=args.model)
                per = table.blowup.get("per_level_max", [])
                for r in table.rows:
                    rows.append([seed, metric, r.level, r.p.label(), args.model, r.cost, r.opt, r.ratio, per[r.level - 1] if per else None])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS[args.kind])
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _emit(buf.getvalue(), args.output)
    return 0


# parser ---------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    g.add_argument("--tol", type=float, default=1e-6, help="relaxation relative gap")
    g.add_argument("--max-iters", type=int, default=None, help="relaxation iteration cap")
    g.add_argument("--alpha", type=float, default=None, help="filtering parameter (default 1/4)")
    g.add_argument("--bf-cap", type=int, default=None, help=f"brute-force facility cap (env {BF_ENV})")
    g.add_argument("--threads", type=int, default=1, help="worker threads where supported")
    g.add_argument("-o", "--output", default=None, help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairplace", description="Fair facility location under group p-norms.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("kind", choices=["star", "adversarial", "random"])
    g.add_argument("--t", type=int, default=4)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--l", type=int, default=3)
    g.add_argument("--eps", type=float, default=0.01)
    g.add_argument("--facilities", type=int, default=6)
    g.add_argument("--clients", type=int, default=8)
    g.add_argument("--groups", type=int, default=2)
    g.add_argument("--metric", choices=["line", "euclidean", "explicit", "tree"], default="line")
    g.add_argument("--cost-range", default="1,10", help="'lo,hi' or a single uniform cost")
    _common(g)
    g.set_defaults(func=cmd_gen)

    def with_model(p):
        p.add_argument("--model", choices=["standard", "normalized"], default="standard")

    s = sub.add_parser("solve", help="approximate (or exact) solution for one norm")
    s.add_argument("--instance", required=True)
    s.add_argument("--p", default="1")
    s.add_argument("--brute-force", action="store_true", help="solve exactly by subset enumeration")
    s.add_argument("--fractional-out", default=None, help="also dump the relaxation solution")
    with_model(s)
    _common(s)
    s.set_defaults(func=cmd_solve)

    p = sub.add_parser("portfolio", help="solutions covering every norm")
    p.add_argument("--instance", required=True)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--mode", choices=["approx", "relaxation", "oracle"], default="approx")
    with_model(p)
    _common(p)
    p.set_defaults(func=cmd_portfolio)

    r = sub.add_parser("refine", help="weak or strong refinement across norms")
    r.add_argument("--instance", required=True)
    r.add_argument("--norms", default="1,2,inf", help="comma list of norms or 'all'")
    r.add_argument("--mode", choices=["weak", "strong", "greedy"], default="strong")
    r.add_argument("--gamma", default="auto")
    r.add_argument("--backend", choices=["general", "line", "tree", "auto"], default=None)
    r.add_argument("--metric-aware", action="store_true", help="pick the line or tree backend from the metric")
    with_model(r)
    _common(r)
    r.set_defaults(func=cmd_refine)

    h = sub.add_parser("hierarchy", help="hierarchical facility location")
    h.add_argument("--instance", required=True)
    h.add_argument("--costs", required=True, help="comma list c_1 <= ... <= c_l")
    h.add_argument("--backend", choices=["general", "line", "tree", "auto"], default="auto")
    h.add_argument("--p", default="1")
    h.add_argument("--no-oracle", action="store_true", help="skip brute-force ratios")
    with_model(h)
    _common(h)
    h.set_defaults(func=cmd_hierarchy)

    v = sub.add_parser("verify", help="check artifacts and print a violation report")
    v.add_argument("--instance", default=None)
    v.add_argument("--chain", default=None)
    v.add_argument("--check", choices=["weak", "strong", "all"], default="all")
    v.add_argument("--solution", default=None)
    v.add_argument("--portfolio", default=None)
    v.add_argument("--hierarchy", default=None)
    v.add_argument("--line-chain", default=None, help="positions per level, e.g. '0,1,2;0,2'")
    _common(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="ratio sweeps as CSV")
    b.add_argument("kind", choices=sorted(BENCH_COLUMNS))
    b.add_argument("--instance", default=None, help="use this instance instead of random ones")
    b.add_argument("--count", type=int, default=10)
    b.add_argument("--facilities", type=int, default=5)
    b.add_argument("--clients", type=int, default=6)
    b.add_argument("--groups", type=int, default=2)
    b.add_argument("--metric", choices=["line", "euclidean", "explicit", "tree"], default="line")
    b.add_argument("--cost-range", default="1,10", help="'lo,hi' or a single uniform cost")
    b.add_argument("--norms", default="1,2,inf")
    b.add_argument("--grid", type=int, default=9)
    b.add_argument("--mode", default=None, help="portfolio: approx|relaxation|oracle; refine: weak|strong|greedy")
    b.add_argument("--metric-aware", action="store_true")
    b.add_argument("--max-l", type=int, default=8)
    with_model(b)
    _common(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench":
        defaults = {"portfolio": "approx", "refine": "strong"}
        allowed = {"portfolio": ("approx", "relaxation", "oracle"), "refine": ("weak", "strong", "greedy")}
        if args.mode is None:
            args.mode = defaults.get(args.kind)
        elif args.kind in allowed and args.mode not in allowed[args.kind]:
            parser.error(f"--mode for bench {args.kind} must be one of {allowed[args.kind]}")
    saved = os.environ.get(BF_ENV)
    if args.bf_cap is not None:
        os.environ[BF_ENV] = str(args.bf_cap)
    try:
        return args.func(args)
    except ValidationFailed as exc:
        sys.stdout.write(formats.dumps(formats.report_to_json(exc.violations)))
        return 1
    except (FairplaceError, OSError) as exc:
        print(f"fairplace: error: {exc}", file=sys.stderr)
        return 1
    finally:
        if saved is None:
            os.environ.pop(BF_ENV, None)
        else:
            os.environ[BF_ENV] = saved


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
