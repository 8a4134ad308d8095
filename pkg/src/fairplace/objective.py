"""Cost evaluation under the p-norm group objective and its normalized variant."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidArgument, InvalidSolution
from .instances import Instance, NormParam

MODELS = ("standard", "normalized")
# Below this inv_p the max-entry formula is used.  For a length-r vector the
# relative error of doing so is at most r**inv_p - 1, i.e. about inv_p*ln(r).
LARGE_P_CUTOFF = 1e-6


@dataclass(frozen=True)
class Solution:
    """Open facility ids plus a total client-to-facility map."""

    open: tuple[str, ...]
    assign: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "open", tuple(sorted(set(self.open))))
        object.__setattr__(self, "assign", dict(self.assign))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        return self.open == other.open and self.assign == other.assign

    def __hash__(self) -> int:
        return hash((self.open, tuple(sorted(self.assign.items()))))

    def assign_index(self, inst: Instance) -> np.ndarray:
        """Facility index per client, in the instance's client order.

        Raises:
            InvalidSolution: on unknown ids, missing clients or closed targets.
        """
        check_solution(inst, self)
        fi = inst.facility_index
        return np.array([fi[self.assign[c]] for c in inst.client_ids], dtype=int)


@dataclass(frozen=True)
class CostBreakdown:
    facility_cost: float
    group_vector: np.ndarray
    assignment_cost: float
    total: float
    model: str

    def to_dict(self) -> dict:
        return {
            "facility_cost": self.facility_cost,
            "group_vector": [float(v) for v in self.group_vector],
            "assignment_cost": self.assignment_cost,
            "total": self.total,
            "model": self.model,
        }


def check_solution(inst: Instance, sol: Solution) -> None:
    """Raise InvalidSolution unless ``sol`` opens known facilities and assigns every client to one of them."""
    if not sol.open:
        raise InvalidSolution("open set is empty")
    fi = inst.facility_index
    unknown = [f for f in sol.open if f not in fi]
    if unknown:
        raise InvalidSolution(f"unknown facility ids {unknown}")
    if set(sol.assign) != set(inst.client_ids):
        missing = sorted(set(inst.client_ids) - set(sol.assign))
        extra = sorted(set(sol.assign) - set(inst.client_ids))
        raise InvalidSolution(f"assignment not total: missing {missing}, unknown {extra}")
    opened = set(sol.open)
    for c, f in sol.assign.items():
        if f not in opened:
            raise InvalidSolution(f"client {c} assigned to closed facility {f}")


def _check_model(model: str) -> None:
    if model not in MODELS:
        raise InvalidArgument(f"model must be one of {MODELS}, got {model!r}")


def norm_weight(r: int, p: NormParam, model: str) -> float:
    """The factor multiplying the connection norm: 1, or ``r**(1 - 1/p)`` when normalized."""
    _check_model(model)
    return 1.0 if model == "standard" else float(r) ** (1.0 - p.inv_p)


def pnorm(v, p: NormParam) -> float:
    """Minkowski p-norm of a nonnegative vector, stable for large p."""
    v = np.abs(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    m = float(v.max())
    if m == 0.0 or p.inv_p < LARGE_P_CUTOFF:
        return m
    if p.inv_p == 1.0:
        return float(v.sum())
    exponent = 1.0 / p.inv_p
    # scale by the max so every term is in [0, 1]
    return m * float(np.sum((v / m) ** exponent)) ** p.inv_p


def _group_vector(inst: Instance, dists: np.ndarray, totals: bool = False) -> np.ndarray:
    w = np.ones(inst.n_clients) if totals else inst.client_weights
    return np.bincount(inst.groups, weights=dists * w, minlength=inst.r)


def group_cost_vector(inst: Instance, sol: Solution, totals: bool = False) -> np.ndarray:
    """Average (or total, if ``totals``) assigned distance per group."""
    a = sol.assign_index(inst)
    return _group_vector(inst, inst.cf[np.arange(inst.n_clients), a], totals)


def cost_of(
    inst: Instance,
    open_idx: Iterable[int],
    assign_idx: np.ndarray,
    p: NormParam,
    model: str = "standard",
    totals: bool = False,
) -> CostBreakdown:
    """Cost from facility indices without the id-level validation of ``total_cost``."""
    _check_model(model)
    open_idx = np.asarray(sorted(set(int(i) for i in open_idx)), dtype=int)
    vec = _group_vector(inst, inst.cf[np.arange(inst.n_clients), assign_idx], totals)
    fc = float(inst.costs[open_idx].sum())
    ac = pnorm(vec, p)
    total = fc + norm_weight(inst.r, p, model) * ac
    return CostBreakdown(fc, vec, ac, total, model)


def total_cost(
    inst: Instance, sol: Solution, p: NormParam, model: str = "standard", totals: bool = False
) -> CostBreakdown:
    """Facility cost plus the (possibly normalized) p-norm of group costs.

    Raises:
        InvalidSolution: if ``sol`` is not a valid solution of ``inst``.
    """
    a = sol.assign_index(inst)
    fi = inst.facility_index
    return cost_of(inst, [fi[f] for f in sol.open], a, p, model, totals)


def nearest_index(inst: Instance, open_idx: Iterable[int]) -> np.ndarray:
    """Nearest open facility index per client; ties go to the smallest index."""
    cols = np.asarray(sorted(set(int(i) for i in open_idx)), dtype=int)
    if cols.size == 0:
        raise InvalidArgument("open set is empty")
    return cols[np.argmin(inst.cf[:, cols], axis=1)] if inst.n_clients else np.zeros(0, dtype=int)


def nearest_assignment(inst: Instance, open_ids: Iterable[str]) -> Solution:
    """Assign each client to its nearest open facility (smallest id on ties).

    Raises:
        InvalidArgument: if ``open_ids`` is empty or contains an unknown id.
    """
    open_ids = list(open_ids)
    if not open_ids:
        raise InvalidArgument("open set is empty")
    fi = inst.facility_index
    try:
        idx = [fi[f] for f in open_ids]
    except KeyError as exc:
        raise InvalidArgument(f"unknown facility id {exc.args[0]!r}") from None
    a = nearest_index(inst, idx)
    fids = inst.facility_ids
    return Solution(tuple(open_ids), {c: fids[i] for c, i in zip(inst.client_ids, a)})


def solution_from_index(inst: Instance, open_idx: Iterable[int], assign_idx: np.ndarray) -> Solution:
    fids = inst.facility_ids
    return Solution(
        tuple(fids[i] for i in open_idx), {c: fids[int(i)] for c, i in zip(inst.client_ids, assign_idx)}
    )


def cross_norm_factor(r: int, p: NormParam, q: NormParam) -> float:
    """``r**(1/p - 1/q)``, the worst ratio between p- and q-norms of length-r vectors.

    Raises:
        InvalidArgument: if ``p > q``.
    """
    if p.inv_p < q.inv_p:
        raise InvalidArgument(f"need p <= q, got p={p.label()} q={q.label()}")
    if r < 1:
        raise InvalidArgument("r must be positive")
    return float(r) ** (p.inv_p - q.inv_p)

