"""Hierarchical facility location.

Level ``k`` has uniform opening cost ``c_k`` with ``c_1 <= ... <= c_l``.  A
hierarchical solution opens nested sets ``F_1 ⊇ ... ⊇ F_l`` and its client
blocks nest: clients sharing a facility at level ``k`` share one at every
level ``t > k``.  The solver runs one approximation per level, takes suffix
unions of the open sets and reassigns clients with a strong-refinement
backend.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidArgument, InvariantViolation, ResourceLimit, Violation
from .instances import Instance, NormParam
from .objective import Solution, _check_model, cost_of, total_cost
from .refine import RefinementChain, chain_from_sets, select_backend, strengthen
from .solver import approx_solve_detailed, brute_force_opt
from .verify import block_violations

ROUND_FACTOR = 4  # per-level guarantee of approx_solve
INEQ_RTOL = 1e-6


@dataclass(frozen=True)
class HierarchicalInstance:
    base: Instance
    level_costs: tuple[float, ...]
    p: NormParam = NormParam(1.0)
    model: str = "standard"

    def __post_init__(self):
        costs = tuple(float(c) for c in self.level_costs)
        object.__setattr__(self, "level_costs", costs)
        if not costs:
            raise InvalidArgument("at least one level cost is required")
        if any(not math.isfinite(c) or c < 0 for c in costs):
            raise InvalidArgument("level costs must be finite and non-negative")
        if any(a > b for a, b in zip(costs, costs[1:])):
            raise InvalidArgument("level costs must be non-decreasing")
        _check_model(self.model)

    @property
    def l(self) -> int:
        return len(self.level_costs)

    def level_instance(self, k: int) -> Instance:
        """Base instance with uniform cost ``c_k`` (``k`` is 0-based)."""
        return self.base.with_costs(self.level_costs[k])


@dataclass
class HierarchyReport:
    violations: list[Violation]
    costs: list[float]
    opts: list[float] | None = None
    ratios: list[float] | None = None

    @property
    def worst_ratio(self) -> float | None:
        return max(self.ratios) if self.ratios else None

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class HierarchyResult:
    solutions: list[Solution]
    backend: str
    approx_costs: list[float]
    costs: list[float]
    blowup_bound: float
    ratio_bound: float
    report: HierarchyReport
    chain: RefinementChain = field(repr=False, default=None)


def _level_cost(hinst: HierarchicalInstance, k: int, sol: Solution) -> float:
    return total_cost(hinst.level_instance(k), sol, hinst.p, hinst.model).total


def _blowup_bound(chain: RefinementChain, backend: str) -> float:
    l = chain.l
    if backend == "general":
        return float(chain.meta["u_max"])
    if backend == "line":
        return 2.0 * l
    # augmentation may double each open set, which the facility term absorbs as a factor 2
    return 2.0 * (2 * l)


def solve_hierarchical(
    hinst: HierarchicalInstance,
    backend: str = "auto",
    oracle: bool = True,
    threads: int = 1,
    **solver_kw,
) -> HierarchyResult:
    """Solve every level, then make the solutions nested and block-consistent.

    Args:
        hinst: the hierarchical instance.
        backend: ``general``, ``line``, ``tree`` or ``auto`` (chosen by metric).
        oracle: compute per-level brute-force ratios when the cap allows.
        threads: worker threads for the per-level solves.
        **solver_kw: forwarded to ``approx_solve_detailed``.

    Raises:
        UnsupportedConfiguration: backend and metric do not match, or the
            tree backend's assumptions fail.
    """
    base, l = hinst.base, hinst.l
    if backend == "greedy":
        raise InvalidArgument("greedy has no blowup guarantee and is not a hierarchy backend")
    backend = select_backend(base, backend)

    def solve(k):
        return approx_solve_detailed(hinst.level_instance(k), hinst.p, hinst.model, **solver_kw)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(solve, range(l)))
    else:
        results = [solve(k) for k in range(l)]
    approx_costs = [r.cost for r in results]

    fi = base.facility_index
    level_sets = [{fi[f] for f in r.solution.open} for r in results]
    G = [sorted(set().union(*level_sets[k:])) for k in range(l)]

    for k in range(l):
        inst_k = hinst.level_instance(k)
        theta = results[k].solution.assign_index(inst_k)
        lhs = cost_of(inst_k, G[k], theta, hinst.p, hinst.model).total
        rhs = ROUND_FACTOR * l * approx_costs[k]
        if lhs > rhs * (1 + INEQ_RTOL) + 1e-12:
            raise InvariantViolation(f"level {k + 1}: union cost {lhs} exceeds {ROUND_FACTOR * l} x level cost {rhs}")

    labels = [f"c={c:g}" for c in hinst.level_costs]
    work = base.with_costs(hinst.level_costs[-1])  # uniform costs for the tree backend
    weak = chain_from_sets(work, G, labels, "decreasing")
    chain = strengthen(work, weak, backend)
    sols = list(chain.levels)
    costs = [_level_cost(hinst, k, s) for k, s in enumerate(sols)]

    beta = _blowup_bound(chain, backend)
    bound = 4 * ROUND_FACTOR * l * beta
    report = check_hierarchy(hinst, sols, oracle=oracle)
    if report.violations:
        raise InvariantViolation(f"hierarchy output fails its own check: {report.violations[0]}")
    if report.ratios is not None:
        for k, rho in enumerate(report.ratios):
            if rho > bound * (1 + INEQ_RTOL):
                raise InvariantViolation(f"level {k + 1} ratio {rho} exceeds {bound}")
    return HierarchyResult(sols, backend, approx_costs, costs, beta, bound, report, chain)


def check_hierarchy(hinst: HierarchicalInstance, sols: Sequence[Solution], oracle: bool = True) -> HierarchyReport:
    """Nesting of open sets and client blocks, plus per-level ratios when brute force is possible."""
    out: list[Violation] = []
    if len(sols) != hinst.l:
        out.append(Violation("hierarchy.levels", "all", f"{len(sols)} solutions for {hinst.l} levels"))
        return HierarchyReport(out, [])
    base = hinst.base
    fids, cids = set(base.facility_ids), set(base.client_ids)
    for k, s in enumerate(sols):
        where = f"level {k + 1}"
        unknown = set(s.open) - fids
        if unknown:
            out.append(Violation("hierarchy.open", where, f"unknown facilities {sorted(unknown)}"))
        if set(s.assign) != cids:
            out.append(Violation("hierarchy.assignment", where, "assignment does not cover exactly the clients"))
        for c, f in sorted(s.assign.items()):
            if f not in s.open:
                out.append(Violation("hierarchy.assignment", f"{where}, client {c}", f"assigned to {f}, which is not open"))
    for k in range(hinst.l):
        for t in range(k + 1, hinst.l):
            extra = set(sols[t].open) - set(sols[k].open)
            if extra:
                out.append(
                    Violation(
                        "hierarchy.nesting",
                        f"levels {k + 1}/{t + 1}",
                        f"facilities {sorted(extra)} open at level {t + 1} but not at level {k + 1}",
                    )
                )
            out += [
                Violation("hierarchy.block", v.location, v.detail)
                for v in block_violations(sols[k], sols[t], f"levels {k + 1}/{t + 1}")
            ]
    if out:
        return HierarchyReport(out, [])
    costs = [_level_cost(hinst, k, s) for k, s in enumerate(sols)]
    if not oracle:
        return HierarchyReport(out, costs)
    try:
        opts = [brute_force_opt(hinst.level_instance(k), hinst.p, hinst.model)[1] for k in range(hinst.l)]
    except ResourceLimit:
        return HierarchyReport(out, costs)
    ratios = [c / o if o > 0 else (1.0 if c <= 1e-12 else math.inf) for c, o in zip(costs, opts)]
    return HierarchyReport(out, costs, opts, ratios)
