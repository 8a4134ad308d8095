"""Weak and strong refinements of per-norm solutions.

A chain has levels ``1..l``.  In the decreasing direction (standard model,
norms ascending) the open sets shrink, ``G_1 ⊇ ... ⊇ G_l``; in the
increasing direction (normalized model) they grow.  Every strong-refinement
routine here is written for decreasing chains; increasing chains are handled
by reversing the level order, refining, and reversing back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvariantViolation, UnsupportedConfiguration
from .instances import Instance, NormParam
from .objective import Solution, _check_model, nearest_index, solution_from_index
from .solver import approx_solve

DIRECTIONS = ("decreasing", "increasing")
BOUND_RTOL = 1e-9


@dataclass
class RefinementChain:
    """Per-level open sets and assignments, stored as one Solution per level."""

    norms: list
    levels: list[Solution]
    direction: str = "decreasing"
    blowup_table: list[list[float]] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise InvalidArgument(f"direction must be one of {DIRECTIONS}")
        if len(self.norms) != len(self.levels):
            raise InvalidArgument("one norm label per level is required")

    @property
    def l(self) -> int:
        return len(self.levels)

    def open_sets(self) -> list[set[str]]:
        return [set(s.open) for s in self.levels]

    def reversed(self) -> "RefinementChain":
        other = "increasing" if self.direction == "decreasing" else "decreasing"
        table = None if self.blowup_table is None else [row[::-1] for row in self.blowup_table]
        return RefinementChain(self.norms[::-1], self.levels[::-1], other, table, dict(self.meta))


def _open_idx(inst: Instance, sol: Solution) -> list[int]:
    fi = inst.facility_index
    return sorted(fi[f] for f in sol.open)


# ---------------------------------------------------------------------------
# weak refinement


def chain_from_sets(
    inst: Instance, sets: Sequence[Sequence[int]], norms: Sequence, direction: str = "decreasing"
) -> RefinementChain:
    """Chain whose level ``k`` opens facility indices ``sets[k]`` with nearest assignment."""
    levels = [solution_from_index(inst, s, nearest_index(inst, s)) for s in sets]
    return RefinementChain(list(norms), levels, direction)


def _is_ascending(norms: Sequence) -> bool:
    invs = [q.inv_p for q in norms if isinstance(q, NormParam)]
    if len(invs) != len(norms):
        return True  # opaque level labels carry no order
    return all(a > b for a, b in zip(invs, invs[1:]))


def weak_refine(
    inst: Instance,
    solutions: Sequence[Solution],
    norms: Sequence | None = None,
    direction: str = "decreasing",
) -> RefinementChain:
    """Suffix (or prefix, when increasing) unions of the input open sets.

    Args:
        solutions: one solution per level, ordered by ascending norm.
        norms: level labels; NormParams must be strictly ascending in p.

    Raises:
        InvalidArgument: on empty or unsorted input.
    """
    if not solutions:
        raise InvalidArgument("need at least one solution")
    norms = list(norms) if norms is not None else [str(k + 1) for k in range(len(solutions))]
    if len(norms) != len(solutions):
        raise InvalidArgument("one norm per solution is required")
    if not _is_ascending(norms):
        raise InvalidArgument("solutions must be sorted by strictly ascending norm")
    if direction not in DIRECTIONS:
        raise InvalidArgument(f"direction must be one of {DIRECTIONS}")
    opens = [set(_open_idx(inst, s)) for s in solutions]
    l = len(opens)
    sets: list[set[int]] = [set() for _ in range(l)]
    acc: set[int] = set()
    order = range(l - 1, -1, -1) if direction == "decreasing" else range(l)
    for k in order:
        acc |= opens[k]
        sets[k] = set(acc)
    return chain_from_sets(inst, [sorted(s) for s in sets], norms, direction)


# ---------------------------------------------------------------------------
# strong refinements on general metrics


def _as_decreasing(chain: RefinementChain) -> tuple[RefinementChain, bool]:
    return (chain, False) if chain.direction == "decreasing" else (chain.reversed(), True)


def _check_nested(inst: Instance, chain: RefinementChain) -> list[list[int]]:
    sets = [_open_idx(inst, s) for s in chain.levels]
    for k in range(len(sets) - 1):
        if not set(sets[k + 1]) <= set(sets[k]):
            raise InvalidArgument(f"level {k + 2} is not contained in level {k + 1}")
    return sets


def _levels_from_assign(inst, sets, assign, chain) -> RefinementChain:
    levels = [solution_from_index(inst, sets[k], assign[:, k]) for k in range(len(sets))]
    return RefinementChain(list(chain.norms), levels, "decreasing", None, dict(chain.meta))


def greedy_strong_refine(inst: Instance, chain: RefinementChain) -> RefinementChain:
    """Move each client from its level-k facility to the nearest level-(k+1) facility.

    Ties go to the smallest facility id.  The result nests by construction but
    a client's distance can grow geometrically with the number of levels.
    """
    dchain, flipped = _as_decreasing(chain)
    sets = _check_nested(inst, dchain)
    l = len(sets)
    assign = np.zeros((inst.n_clients, l), dtype=int)
    assign[:, 0] = nearest_index(inst, sets[0])
    for k in range(1, l):
        cols = np.asarray(sets[k])
        prev = assign[:, k - 1]
        assign[:, k] = cols[np.argmin(inst.ff[np.ix_(prev, cols)], axis=1)]
    out = _levels_from_assign(inst, sets, assign, dchain)
    out.meta.update(backend="greedy")
    out.blowup_table = blowup_table(inst, out).tolist()
    return out.reversed() if flipped else out


@dataclass
class RecurrenceTable:
    """``u[k, t]`` for ``0 <= k < t <= l`` (nan elsewhere), its maximum, and the closed-form bound."""

    l: int
    gamma: float
    u: np.ndarray
    max: float
    bound: float


def recurrence_bound(l: int, gamma: float) -> RecurrenceTable:
    """Evaluate the blowup recurrence and check it against ``e**(2g/(g-1)) * g**(l-1)``.

    Raises:
        InvalidArgument: if ``l < 1`` or ``gamma <= 1``.
        InvariantViolation: if the maximum exceeds the closed-form bound.
    """
    if l < 1:
        raise InvalidArgument("l must be >= 1")
    if not gamma > 1:
        raise InvalidArgument("gamma must exceed 1")
    u = np.full((l + 1, l + 1), np.nan)
    for t in range(1, l + 1):
        base = gamma ** (l - t)
        u[t - 1, t] = base
        for k in range(t - 2, -1, -1):
            best = base
            for s in range(k + 1, t):
                g = gamma ** (s - t)
                best = max(best, g + u[s, t] * (1 + g))
            u[k, t] = best
    m = float(np.nanmax(u))
    bound = math.exp(2 * gamma / (gamma - 1)) * gamma ** (l - 1)
    if m > bound * (1 + BOUND_RTOL):
        raise InvariantViolation(f"recurrence maximum {m} exceeds {bound}")
    return RecurrenceTable(l, gamma, u, m, bound)


def default_gamma(l: int) -> float:
    return 1.0 + 1.0 / math.sqrt(l)


def _nearest_in(inst: Instance, dist_rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return cols[np.argmin(dist_rows[:, cols], axis=1)]


def discounted_lookahead(
    inst: Instance, chain: RefinementChain, gamma: float | None = None, check: bool = True
) -> RefinementChain:
    """Strong refinement that commits each point to the best discounted future level.

    A point ``f`` handled at level ``k`` looks at its nearest facility
    ``h_t(f)`` in each deeper level ``t`` and picks the least ``t`` minimizing
    ``d(f, h_t(f)) / gamma**t``.  It is mapped to that facility ``h`` at every
    level up to ``t`` and follows ``h``'s own maps beyond.  Levels are
    processed from ``l-1`` down to ``0``, where level 0 holds the clients.

    With ``check`` the per-point blowup bound from ``recurrence_bound`` and
    the composition identity between stored maps are verified.

    Raises:
        InvalidArgument: if ``gamma <= 1`` or the chain is not nested.
    """
    dchain, flipped = _as_decreasing(chain)
    sets = _check_nested(inst, dchain)
    l = len(sets)
    gamma = default_gamma(l) if gamma is None else float(gamma)
    if not gamma > 1:
        raise InvalidArgument("gamma must exceed 1")
    table = recurrence_bound(l, gamma)
    cols = [np.asarray(s) for s in sets]
    disc = gamma ** -np.arange(1, l + 1, dtype=float)
    # maps[k][f] -> array over t = 1..l (entries for t <= k unused)
    maps: list[dict[int, np.ndarray]] = [dict() for _ in range(l + 1)]

    def process(k: int, dist_rows: np.ndarray, keys: Sequence[int]) -> np.ndarray:
        n = dist_rows.shape[0]
        out = np.full((n, l), -1, dtype=int)
        if k == l:
            return out
        # h[:, t-1] = nearest facility in G_t, smallest id on ties
        h = np.stack([_nearest_in(inst, dist_rows, cols[t]) for t in range(l)], axis=1)
        dh = np.take_along_axis(dist_rows, h, axis=1)
        for a in range(n):
            scores = dh[a, k:] * disc[k:]
            s = k + int(np.argmin(scores)) + 1  # first minimal level, 1-based
            target = int(h[a, s - 1])
            out[a, k:s] = target
            if s < l:
                out[a, s:] = maps[s][target][s:]
            if check:
                for t in range(k + 1, l + 1):
                    got = dist_rows[a, out[a, t - 1]]
                    lim = table.u[k, t] * dh[a, t - 1]
                    if got > lim * (1 + BOUND_RTOL) + 1e-12:
                        raise InvariantViolation(
                            f"level {k} point {keys[a]}: d to level-{t} image {got} > u*nearest {lim}"
                        )
        return out

    for k in range(l - 1, 0, -1):
        fac = cols[k - 1]
        res = process(k, inst.ff[fac], fac)
        for a, f in enumerate(fac):
            maps[k][int(f)] = res[a]
    for f in cols[l - 1]:
        maps[l][int(f)] = np.full(l, int(f))
    assign = process(0, np.asarray(inst.cf), inst.client_ids)

    if check:
        # images at level s follow the level-s map of the point's level-s image
        for k in range(1, l):
            for f, row in maps[k].items():
                for s in range(k + 1, l):
                    mid = int(row[s - 1])
                    if not np.array_equal(row[s:], maps[s][mid][s:]):
                        raise InvariantViolation(f"composition identity fails at level {k}, facility {f}")
        for j in range(inst.n_clients):
            for s in range(1, l):
                mid = int(assign[j, s - 1])
                if not np.array_equal(assign[j, s:], maps[s][mid][s:]):
                    raise InvariantViolation(f"composition identity fails for client {inst.client_ids[j]}")

    out = _levels_from_assign(inst, sets, assign, dchain)
    out.meta.update(backend="general", gamma=gamma, u_max=table.max, u_bound=table.bound)
    out.blowup_table = blowup_table(inst, out).tolist()
    return out.reversed() if flipped else out


# ---------------------------------------------------------------------------
# diagnostics


def blowup_table(inst: Instance, chain: RefinementChain) -> np.ndarray:
    """``d(j, Pi_k(j)) / min_{f in G_k} d(j, f)`` per client and level.

    A zero denominator gives 1 when the numerator is also zero and inf otherwise.
    """
    out = np.ones((inst.n_clients, chain.l))
    rows = np.arange(inst.n_clients)
    for k, sol in enumerate(chain.levels):
        idx = _open_idx(inst, sol)
        near = inst.cf[:, idx].min(axis=1)
        got = inst.cf[rows, sol.assign_index(inst)]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(near > 0, got / np.where(near > 0, near, 1.0), np.where(got > 0, np.inf, 1.0))
        out[:, k] = ratio
    return out


# ---------------------------------------------------------------------------
# pipelines

BACKENDS = ("general", "greedy", "line", "tree")


def select_backend(inst: Instance, backend: str = "auto") -> str:
    if backend == "auto":
        return {"line": "line", "tree": "tree"}.get(inst.metric.kind, "general")
    if backend not in BACKENDS:
        raise InvalidArgument(f"backend must be one of {BACKENDS} or 'auto'")
    if backend == "line" and inst.metric.kind != "line":
        raise UnsupportedConfiguration("line backend needs a line metric")
    if backend == "tree" and inst.metric.kind != "tree":
        raise UnsupportedConfiguration("tree backend needs a tree metric")
    return backend


def strengthen(inst: Instance, chain: RefinementChain, backend: str = "general", gamma: float | None = None) -> RefinementChain:
    """Turn a weak chain into a strong one with the chosen backend."""
    backend = select_backend(inst, backend)
    if backend == "general":
        return discounted_lookahead(inst, chain, gamma)
    if backend == "greedy":
        return greedy_strong_refine(inst, chain)
    if backend == "line":
        from .line import line_refine_chain

        return line_refine_chain(inst, chain)
    from .tree import tree_refine_chain

    return tree_refine_chain(inst, chain)


def _resolve_norms(inst: Instance, P, model: str) -> list[NormParam]:
    if isinstance(P, str):
        if P != "all":
            raise InvalidArgument(f"unknown norm set {P!r}")
        from .portfolio import representative_norms

        return representative_norms(inst, model)
    P = sorted(set(P), key=lambda q: -q.inv_p)
    if not P:
        raise InvalidArgument("norm set is empty")
    return P


def per_norm_solutions(inst: Instance, norms: Sequence[NormParam], model: str, **solver_kw) -> list[Solution]:
    return [approx_solve(inst, q, model, **solver_kw) for q in norms]


def refine_pipeline(
    inst: Instance,
    P,
    model: str = "standard",
    mode: str = "strong",
    backend: str = "general",
    gamma: float | None = None,
    **solver_kw,
) -> RefinementChain:
    """Approximate each norm, take unions, then optionally strengthen.

    The direction follows the model: decreasing for standard, increasing for
    normalized.

    Args:
        P: NormParams or the string ``"all"`` for the representative norms.
        mode: ``"weak"``, ``"strong"`` or ``"greedy"``.
        backend: ``"general"``, ``"line"``, ``"tree"`` or ``"auto"`` (ignored for weak/greedy).
    """
    _check_model(model)
    norms = _resolve_norms(inst, P, model)
    direction = "decreasing" if model == "standard" else "increasing"
    sols = per_norm_solutions(inst, norms, model, **solver_kw)
    chain = weak_refine(inst, sols, norms, direction)
    chain.meta.update(model=model)
    if mode == "weak":
        out = chain
        out.blowup_table = blowup_table(inst, chain).tolist()
    elif mode == "greedy":
        out = greedy_strong_refine(inst, chain)
    elif mode == "strong":
        out = strengthen(inst, chain, backend, gamma)
    else:
        raise InvalidArgument(f"mode must be weak, strong or greedy, got {mode!r}")
    out.meta.update(model=model, mode=mode)
    return out


def strong_refine(inst: Instance, P, model: str = "standard", gamma: float | None = None, **solver_kw) -> RefinementChain:
    """General-metric strong refinement: approximate, unite, then discounted lookahead."""
    return refine_pipeline(inst, P, model, "strong", "general", gamma, **solver_kw)


def increasing_refine(inst: Instance, P, backend: str = "general", mode: str = "strong", **solver_kw) -> RefinementChain:
    """Refinement for the normalized model, where open sets grow with p."""
    return refine_pipeline(inst, P, "normalized", mode, backend, **solver_kw)
