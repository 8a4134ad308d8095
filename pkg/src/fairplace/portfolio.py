"""Small solution sets that approximate every p-norm objective at once.

Norms are scanned on a uniform grid in ``1/p``.  Starting from the norm where
the optimum is largest (``p = 1`` in the standard model, ``p = inf`` in the
normalized one) a new representative is taken at the first grid norm whose
running-minimum value is below half the value of the previous
representative.  Each representative keeps the solution computed there.

Three value sources are supported:

* ``"approx"``: costs of ``approx_solve`` solutions (default).
* ``"relaxation"``: relaxation optima, which are exactly monotone in p and
  give the tight size bound ``ceil(log2 r)``.
* ``"oracle"``: brute-force optima with brute-force solutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .instances import Instance, NormParam
from .objective import Solution, _check_model
from .solver import approx_solve_detailed, brute_force_opt

MODES = ("approx", "relaxation", "oracle")
DROP_RTOL = 1e-9


@dataclass(frozen=True)
class PortfolioEntry:
    q: NormParam
    cover: tuple[float, float]  # closed inv_p interval [lo, hi]
    solution: Solution
    value: float


@dataclass
class Portfolio:
    entries: list[PortfolioEntry]
    r: int
    model: str = "standard"
    mode: str = "approx"
    grid: list[NormParam] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


def default_grid_size(r: int) -> int:
    return 4 * math.ceil(math.log2(r)) + 2 if r > 1 else 2


def norm_grid(grid_size: int) -> list[NormParam]:
    """Uniform grid in ``1/p`` ordered by increasing p (``p = 1`` first, ``inf`` last).

    Each point is snapped to ``1/(1/v)`` so that writing the norm as an
    exponent and reading it back reproduces ``inv_p`` exactly.
    """
    if grid_size < 2:
        raise InvalidArgument("grid_size must be at least 2")
    return [NormParam.from_p(1.0 / v) if v > 0 else NormParam(0.0) for v in np.linspace(1.0, 0.0, grid_size)]


def _evaluate(inst: Instance, grid: Sequence[NormParam], model: str, mode: str, solver_kw: dict):
    values, sols = [], []
    for q in grid:
        if mode == "oracle":
            sol, v = brute_force_opt(inst, q, model)
        else:
            res = approx_solve_detailed(inst, q, model, **solver_kw)
            sol = res.solution
            v = res.cost if mode == "approx" else res.fractional.value
        values.append(float(v))
        sols.append(sol)
    return values, sols


def _pick(values: Sequence[float]) -> list[int]:
    """Indices of representatives along a scan where values should fall."""
    chosen = [0]
    env = values[0]
    for i in range(1, len(values)):
        env = min(env, values[i])
        if env < values[chosen[-1]] / 2 * (1 - DROP_RTOL):
            chosen.append(i)
    return chosen


def _scan(inst, model, grid_size, mode, solver_kw):
    _check_model(model)
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}, got {mode!r}")
    grid = norm_grid(grid_size if grid_size is not None else default_grid_size(inst.r))
    values, sols = _evaluate(inst, grid, model, mode, solver_kw)
    # scan from the end where the optimum is largest
    order = list(range(len(grid))) if model == "standard" else list(range(len(grid) - 1, -1, -1))
    picked = sorted(order[k] for k in _pick([values[i] for i in order]))
    return grid, values, sols, picked


def representative_norms(
    inst: Instance,
    model: str = "standard",
    grid_size: int | None = None,
    mode: str = "approx",
    **solver_kw,
) -> list[NormParam]:
    """Representative norms in increasing order of p.

    The standard model always includes ``p = 1``; the normalized model
    always includes ``p = inf``.
    """
    grid, _, _, picked = _scan(inst, model, grid_size, mode, solver_kw)
    return [grid[i] for i in picked]


def build_portfolio(
    inst: Instance,
    model: str = "standard",
    grid_size: int | None = None,
    mode: str = "approx",
    **solver_kw,
) -> Portfolio:
    """One solution per representative norm, with cover intervals tiling ``[0, 1]`` in ``1/p``.

    In the standard model the entry at ``q_k`` covers ``p`` in ``[q_k, q_{k+1})``;
    in the normalized model it covers ``(q_{k-1}, q_k]``.
    """
    grid, values, sols, picked = _scan(inst, model, grid_size, mode, solver_kw)
    invs = [grid[i].inv_p for i in picked]
    entries = []
    for k, i in enumerate(picked):
        if model == "standard":
            lo = invs[k + 1] if k + 1 < len(invs) else 0.0
            hi = invs[k]
        else:
            lo = invs[k]
            hi = invs[k - 1] if k > 0 else 1.0
        entries.append(PortfolioEntry(grid[i], (lo, hi), sols[i], values[i]))
    return Portfolio(entries, inst.r, model, mode, list(grid), values)


def cover_lookup(port: Portfolio, p: NormParam) -> Solution:
    """Solution responsible for norm ``p``.

    Standard model: the entry with the largest ``q <= p``.  Normalized model:
    the entry with the smallest ``q >= p``.  A norm equal to some ``q`` is
    therefore served by that entry's own solution.
    """
    return lookup_entry(port, p).solution


def lookup_entry(port: Portfolio, p: NormParam) -> PortfolioEntry:
    if not port.entries:
        raise InvalidArgument("empty portfolio")
    if port.model == "standard":
        ok = [e for e in port.entries if e.q.inv_p >= p.inv_p]
        return ok[-1] if ok else port.entries[0]
    ok = [e for e in port.entries if e.q.inv_p <= p.inv_p]
    return ok[0] if ok else port.entries[-1]


def transfer_ratio(alpha: float, r: int, p: NormParam, q: NormParam) -> float:
    """Guarantee at norm ``q`` of an ``alpha``-approximate solution for norm ``p``.

    Raises:
        InvalidArgument: if ``alpha < 1``.
    """
    if alpha < 1:
        raise InvalidArgument(f"alpha must be >= 1, got {alpha}")
    return alpha * float(r) ** abs(p.inv_p - q.inv_p)
