"""Structural verifiers and ratio measurement.

Verifiers return lists of ``Violation``; an empty list means every checked
condition holds.  Set-based checks use exact comparisons, and the chain
checks need only ids, so they also apply to chains loaded from files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, ResourceLimit, Violation
from .instances import Instance, NormParam
from .line import LineRefinement, tree_violations
from .objective import Solution, total_cost
from .portfolio import Portfolio, cover_lookup
from .refine import RefinementChain, blowup_table
from .solver import brute_force_opt

RATIO_RTOL = 1e-9


def check_weak(chain: RefinementChain) -> list[Violation]:
    """Every level pair ``k < t`` must nest in the chain's declared direction."""
    out = []
    sets = chain.open_sets()
    for k in range(len(sets)):
        for t in range(k + 1, len(sets)):
            big, small = (k, t) if chain.direction == "decreasing" else (t, k)
            extra = sets[small] - sets[big]
            if extra:
                out.append(
                    Violation(
                        "weak.nesting",
                        f"levels {big + 1}->{small + 1}",
                        f"facilities {sorted(extra)} open at level {small + 1} but not at level {big + 1}",
                    )
                )
    return out


def block_violations(fine: Solution, coarse: Solution, where: str) -> list[Violation]:
    """Each client block of ``fine`` must map into a single facility of ``coarse``."""
    out = []
    image: dict[str, set[str]] = {}
    for c, f in fine.assign.items():
        image.setdefault(f, set()).add(coarse.assign.get(c, "<missing>"))
    for f in sorted(image):
        if len(image[f]) > 1:
            out.append(Violation("strong.block", f"{where}, facility {f}", f"block split across {sorted(image[f])}"))
    return out


def _assignment_violations(sol: Solution, where: str) -> list[Violation]:
    opened = set(sol.open)
    return [
        Violation("chain.assignment", f"{where}, client {c}", f"assigned to {f}, which is not open")
        for c, f in sorted(sol.assign.items())
        if f not in opened
    ]


def check_strong(chain: RefinementChain) -> list[Violation]:
    """Client blocks of the larger open set nest into blocks of the smaller one, level by level."""
    out = []
    for k, sol in enumerate(chain.levels):
        out += _assignment_violations(sol, f"level {k + 1}")
    for k in range(chain.l - 1):
        a, b = chain.levels[k], chain.levels[k + 1]
        fine, coarse = (a, b) if chain.direction == "decreasing" else (b, a)
        out += block_violations(fine, coarse, f"levels {k + 1}/{k + 2}")
    return out


def check_interval_tree(res: LineRefinement, parent: dict | None = None, A: dict | None = None) -> list[Violation]:
    """Containment, sibling disjointness, immediate parents and per-level partition of a line run.

    Defaults to the final state; pass a snapshot's ``(A, parent)`` to check an earlier phase.
    """
    parent = res.parent if parent is None else parent
    A = res.A if A is None else A
    return [Violation(c, loc, d) for c, loc, d in tree_violations(res, parent, A, immediate=True, complete=True)]


@dataclass
class RatioRow:
    p: NormParam
    cost: float
    opt: float | None
    ratio: float | None
    level: int | None = None


@dataclass
class RatioTable:
    rows: list[RatioRow]
    oracle_available: bool
    blowup: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float | None:
        rs = [r.ratio for r in self.rows if r.ratio is not None]
        return max(rs) if rs else None


def _ratio(cost: float, opt: float) -> float:
    if opt == 0:
        return 1.0 if cost <= RATIO_RTOL else float("inf")
    return cost / opt


def measure_ratios(
    inst: Instance,
    artifact: Solution | Portfolio | RefinementChain,
    p_grid: Sequence[NormParam] | None = None,
    model: str = "standard",
    oracle: bool = True,
) -> RatioTable:
    """Measured cost over brute-force optimum per norm, plus blowup summaries for chains.

    Chains are measured at their own level norms (``p_grid`` is ignored for
    them).  When the brute-force cap is exceeded only costs are reported and
    ``oracle_available`` is False.
    """
    if isinstance(artifact, RefinementChain):
        model = artifact.meta.get("model", model)
        pairs = [(q, sol, k + 1) for k, (q, sol) in enumerate(zip(artifact.norms, artifact.levels))]
    else:
        if p_grid is None:
            raise InvalidArgument("p_grid is required for solutions and portfolios")
        if isinstance(artifact, Portfolio):
            model = artifact.model
            pairs = [(q, cover_lookup(artifact, q), None) for q in p_grid]
        else:
            pairs = [(q, artifact, None) for q in p_grid]
    rows = []
    available = oracle
    for q, sol, level in pairs:
        cost = total_cost(inst, sol, q, model).total
        opt = None
        if available:
            try:
                opt = brute_force_opt(inst, q, model)[1]
            except ResourceLimit:
                available = False
        rows.append(RatioRow(q, cost, opt, None if opt is None else _ratio(cost, opt), level))
    if not available:
        for r in rows:
            r.opt = r.ratio = None
    blow = {}
    if isinstance(artifact, RefinementChain):
        t = blowup_table(inst, artifact)
        blow = {"max": float(t.max()) if t.size else 1.0, "mean": float(t.mean()) if t.size else 1.0,
                "per_level_max": [float(v) for v in t.max(axis=0)] if t.size else []}
    return RatioTable(rows, available, blow)


def _norm_key(q) -> str:
    return q.label() if isinstance(q, NormParam) else str(q)


def ratio_rows_for_csv(table: RatioTable) -> list[list]:
    """Rows of ``p, level, cost, opt, ratio`` with fixed formatting."""
    out = []
    for r in table.rows:
        out.append([
            _norm_key(r.p),
            "" if r.level is None else r.level,
            repr(float(r.cost)),
            "" if r.opt is None else repr(float(r.opt)),
            "" if r.ratio is None else repr(float(r.ratio)),
        ])
    return out


def blowups(inst: Instance, chain: RefinementChain) -> np.ndarray:
    return blowup_table(inst, chain)
