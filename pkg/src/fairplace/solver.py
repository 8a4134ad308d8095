"""Convex relaxation, filtering, clustering-based rounding and the brute-force oracle.

The relaxation is the facility-location program with the connection cost
replaced by the p-norm of group averages:

    minimize   sum_i c_i y_i + g * || V(x) ||_p
    subject to sum_i x_ij >= 1,  x_ij <= y_i,  x, y >= 0

where ``V_s(x)`` is the average fractional distance of group ``s``.  Two
solvers are provided.  The default is a Kelley cutting-plane loop whose
master problem is an LP solved by HiGHS; because the norm is positively
homogeneous every cut has the form ``tau >= g * w . V(x)`` with ``w`` in the
dual unit ball.  The alternative is projected subgradient descent over the
per-client simplices.  Both report a certified lower bound, so the relative
gap they stop on is a true optimality gap.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InfeasibleRounding, InvalidArgument, InvariantViolation, ResourceLimit
from .instances import Instance, NormParam
from .objective import (
    LARGE_P_CUTOFF,
    Solution,
    _check_model,
    cost_of,
    nearest_index,
    norm_weight,
    pnorm,
    solution_from_index,
)

FEAS_TOL = 1e-9
DEFAULT_BF_CAP = 20
BF_TIE_RTOL = 1e-12

__all__ = [
    "FractionalSolution",
    "ApproxResult",
    "RoundingTrace",
    "solve_relaxation",
    "relaxation_value",
    "filter_fractional",
    "round_filtered",
    "approx_solve",
    "approx_solve_detailed",
    "brute_force_opt",
    "bf_cap",
    "project_rows_to_simplex",
    "pnorm_rows",
]


def bf_cap() -> int:
    """Brute-force facility cap, overridable with ``FAIRPLACE_BF_CAP``."""
    raw = os.environ.get("FAIRPLACE_BF_CAP")
    return int(raw) if raw else DEFAULT_BF_CAP


@dataclass
class FractionalSolution:
    """Fractional ``x`` (clients by facilities), ``y`` (facilities) and their objective value."""

    x: np.ndarray
    y: np.ndarray
    value: float
    converged: bool = True
    lower_bound: float = float("nan")
    iterations: int = 0
    method: str = ""

    def violations(self) -> list[str]:
        out = []
        cover = self.x.sum(axis=1)
        for j in np.flatnonzero(cover < 1 - FEAS_TOL):
            out.append(f"client {j}: sum_i x = {cover[j]:.12g} < 1")
        if self.x.size and (self.x > self.y[None, :] + FEAS_TOL).any():
            out.append("x_ij exceeds y_i")
        if (self.x < 0).any() or (self.y < 0).any():
            out.append("negative variable")
        return out

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "value": self.value,
            "converged": self.converged,
            "lower_bound": self.lower_bound,
            "iterations": self.iterations,
            "method": self.method,
        }


# ---------------------------------------------------------------------------
# relaxation


def _group_matrix(inst: Instance) -> sp.csr_matrix:
    """Sparse ``W[j, s] = 1/|D_s|`` when client ``j`` is in group ``s``."""
    n = inst.n_clients
    return sp.csr_matrix((inst.client_weights, (np.arange(n), inst.groups)), shape=(n, inst.r))


def _norm_grad(V: np.ndarray, p: NormParam) -> np.ndarray:
    """A gradient of the p-norm at ``V >= 0``; always lies in the dual unit ball."""
    m = V.max() if V.size else 0.0
    if m <= 0:
        return np.zeros_like(V)
    if p.inv_p < LARGE_P_CUTOFF:
        out = np.zeros_like(V)
        out[int(np.argmax(V))] = 1.0
        return out
    if p.inv_p == 1.0:
        return np.ones_like(V)
    e = 1.0 / p.inv_p
    u = V / m
    return u ** (e - 1) / np.sum(u**e) ** (1 - p.inv_p)


def relaxation_value(inst: Instance, x: np.ndarray, p: NormParam, model: str = "standard") -> float:
    """Objective of the relaxation at ``x`` with the optimal ``y_i = max_j x_ij``."""
    y = x.max(axis=0) if x.size else np.zeros(inst.n_facilities)
    V = ((inst.cf * x).sum(axis=1) * inst.client_weights) @ _onehot(inst)
    return float(inst.costs @ y) + norm_weight(inst.r, p, model) * pnorm(V, p)


def _onehot(inst: Instance) -> np.ndarray:
    H = np.zeros((inst.n_clients, inst.r))
    H[np.arange(inst.n_clients), inst.groups] = 1.0
    return H


def _clean(x: np.ndarray) -> np.ndarray:
    x = np.where(x < 1e-12, 0.0, x)
    return x / x.sum(axis=1, keepdims=True)


def _finish(inst, x, p, model, converged, lb, it, method) -> FractionalSolution:
    x = _clean(x)
    y = x.max(axis=0)
    return FractionalSolution(x, y, relaxation_value(inst, x, p, model), converged, lb, it, method)


def _cutting_plane(inst: Instance, p: NormParam, model: str, tol: float, max_iters: int) -> FractionalSolution:
    nD, nF, r = inst.n_clients, inst.n_facilities, inst.r
    nx = nD * nF
    nvar = nx + nF + 1
    g = norm_weight(r, p, model)
    # coefficient of x_ij in V_s: W[j, s] * d_ij; flattened as j * nF + i
    dflat = inst.cf.reshape(-1)
    grp = np.repeat(inst.groups, nF)
    wflat = np.repeat(inst.client_weights, nF) * dflat

    c = np.concatenate([np.zeros(nx), inst.costs, [1.0]])
    A_eq = sp.kron(sp.identity(nD), np.ones((1, nF)), format="csr")
    A_eq = sp.hstack([A_eq, sp.csr_matrix((nD, nF + 1))], format="csr")
    b_eq = np.ones(nD)
    link = sp.hstack(
        [sp.identity(nx), -sp.kron(np.ones((nD, 1)), sp.identity(nF)), sp.csr_matrix((nx, 1))], format="csr"
    )
    bounds = [(0, 1)] * (nx + nF) + [(0, None)]

    def cut_row(w: np.ndarray) -> np.ndarray:
        row = np.zeros(nvar)
        row[:nx] = g * w[grp] * wflat
        row[-1] = -1.0
        return row

    cuts: list[np.ndarray] = [cut_row(np.eye(r)[s]) for s in range(r)]
    cuts.append(cut_row(np.full(r, float(r) ** -(1 - p.inv_p))))
    seen = {tuple(np.round(cr, 14)) for cr in cuts}

    best_x, best_ub, lb = None, math.inf, -math.inf
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        A_ub = sp.vstack([link, sp.csr_matrix(np.array(cuts))], format="csr")
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(A_ub.shape[0]), A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status != 0:
            raise InvariantViolation(f"relaxation master LP failed: {res.message}")
        lb = max(lb, float(res.fun))
        x = np.clip(res.x[:nx].reshape(nD, nF), 0.0, None)
        x = x / x.sum(axis=1, keepdims=True)
        ub = relaxation_value(inst, x, p, model)
        if ub < best_ub:
            best_ub, best_x = ub, x
        if best_ub - lb <= tol * max(abs(best_ub), 1e-12):
            converged = True
            break
        V = ((inst.cf * x).sum(axis=1) * inst.client_weights) @ _onehot(inst)
        row = cut_row(_norm_grad(V, p))
        key = tuple(np.round(row, 14))
        if key in seen:
            # the master already knows this cut, so it cannot improve further
            converged = best_ub - lb <= max(tol, 1e-7) * max(abs(best_ub), 1e-12)
            break
        seen.add(key)
        cuts.append(row)
    return _finish(inst, best_x, p, model, converged, lb, it, "cutting-plane")


def project_rows_to_simplex(X: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``X`` onto the probability simplex."""
    n, m = X.shape
    U = -np.sort(-X, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    k = np.arange(1, m + 1)
    cond = U - css / k > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(X - theta[:, None], 0.0)


def _subgradient(inst: Instance, p: NormParam, model: str, tol: float, max_iters: int) -> FractionalSolution:
    nD, nF = inst.n_clients, inst.n_facilities
    g = norm_weight(inst.r, p, model)
    H = _onehot(inst)
    A = inst.cf * inst.client_weights[:, None]  # dV_s / dx_ij for the client's own group
    costs = inst.costs
    cols = np.arange(nF)

    def value_and_grad(x):
        y_arg = np.argmax(x, axis=0)  # smallest-index argmax client per facility
        y = x[y_arg, cols]
        V = (A * x).sum(axis=1) @ H
        val = float(costs @ y) + g * pnorm(V, p)
        G = g * _norm_grad(V, p)[inst.groups][:, None] * A
        G[y_arg, cols] += costs
        return val, G

    x = np.full((nD, nF), 1.0 / nF)
    best_x, best_ub, lb = x, math.inf, -math.inf
    radius = math.sqrt(2.0 * nD)
    converged = False
    it = 0
    while it < max_iters:
        val, G = value_and_grad(x)
        if val < best_ub:
            best_ub, best_x = val, x
        # linear minorant minimized over the product of simplices
        lb = max(lb, val - float((G * x).sum()) + float(G.min(axis=1).sum()))
        if best_ub - lb <= tol * max(abs(best_ub), 1e-12):
            converged = True
            break
        it += 1
        gn = float(np.linalg.norm(G))
        if gn == 0:
            converged = True
            break
        x = project_rows_to_simplex(x - (radius / (gn * math.sqrt(it))) * G)
    return _finish(inst, best_x, p, model, converged, lb, it, "subgradient")


def solve_relaxation(
    inst: Instance,
    p: NormParam,
    model: str = "standard",
    tol: float = 1e-6,
    max_iters: int | None = None,
    method: str = "cutting-plane",
) -> FractionalSolution:
    """Solve the convex relaxation to relative gap ``tol``.

    Args:
        method: ``"cutting-plane"`` (default) or ``"subgradient"``.
        max_iters: defaults to ``200 * n**2`` with ``n = |F| + |D|``.

    Returns:
        A feasible FractionalSolution.  If the gap is not closed within
        ``max_iters`` the best iterate is returned with ``converged=False``.
    """
    _check_model(model)
    if inst.n_clients == 0 or inst.n_facilities == 0:
        raise InvalidArgument("instance needs facilities and clients")
    if max_iters is None:
        max_iters = 200 * (inst.n_facilities + inst.n_clients) ** 2
    if method == "cutting-plane":
        return _cutting_plane(inst, p, model, tol, max_iters)
    if method == "subgradient":
        return _subgradient(inst, p, model, tol, max_iters)
    raise InvalidArgument(f"unknown relaxation method {method!r}")


# ---------------------------------------------------------------------------
# filter and round


def filter_fractional(frac: FractionalSolution, inst: Instance, alpha: float = 0.25) -> tuple[FractionalSolution, np.ndarray]:
    """Keep each client's closest alpha mass and rescale by ``1/alpha``.

    Returns:
        ``(filtered, radii)`` where ``radii[j]`` is the first distance at which
        client ``j``'s cumulative fractional mass reaches ``alpha``.

    Raises:
        InvalidArgument: if ``frac`` is infeasible or ``alpha`` not in ``(0, 1]``.
    """
    if not 0 < alpha <= 1:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha}")
    bad = frac.violations()
    if bad:
        raise InvalidArgument("infeasible fractional solution: " + "; ".join(bad[:3]))
    d = inst.cf
    order = np.argsort(d, axis=1, kind="stable")
    rows = np.arange(inst.n_clients)[:, None]
    cum = np.cumsum(frac.x[rows, order], axis=1)
    pos = np.argmax(cum >= alpha * (1 - 1e-12), axis=1)
    radii = d[rows[:, 0], order[rows[:, 0], pos]]
    keep = d <= radii[:, None]
    xbar = np.where(keep, frac.x / alpha, 0.0)
    ybar = frac.y / alpha
    out = FractionalSolution(xbar, ybar, float("nan"), frac.converged, frac.lower_bound, frac.iterations, frac.method)
    return out, radii


@dataclass
class RoundingTrace:
    centers: list[int] = field(default_factory=list)
    opened: list[int] = field(default_factory=list)
    clusters: list[list[int]] = field(default_factory=list)
    max_radius_ratio: float = 0.0


def round_filtered(filtered: FractionalSolution, radii: np.ndarray, inst: Instance, trace: RoundingTrace | None = None) -> Solution:
    """Cluster around the smallest-radius clients and open the cheapest neighbor.

    Each client ends within ``3 * radii[j]`` of its facility; this is checked
    for every client.

    Raises:
        InfeasibleRounding: if some client has no positive ``x`` entry.
    """
    nbr = filtered.x > 0
    if not nbr.any(axis=1).all():
        j = int(np.flatnonzero(~nbr.any(axis=1))[0])
        raise InfeasibleRounding(f"client {inst.client_ids[j]} has an empty neighborhood")
    unassigned = np.ones(inst.n_clients, dtype=bool)
    assign = np.full(inst.n_clients, -1)
    opened: list[int] = []
    trace = trace if trace is not None else RoundingTrace()
    d = inst.cf
    while unassigned.any():
        cand = np.flatnonzero(unassigned)
        jk = int(cand[np.argmin(radii[cand])])
        N = np.flatnonzero(nbr[jk])
        ik = int(N[np.argmin(inst.costs[N])])
        cluster = cand[nbr[cand][:, N].any(axis=1)]
        if (assign[cluster] != -1).any():
            raise InvariantViolation("rounding clusters overlap")
        assign[cluster] = ik
        unassigned[cluster] = False
        opened.append(ik)
        lim = 3.0 * radii[cluster]
        got = d[cluster, ik]
        if (got > lim * (1 + 1e-9) + 1e-12).any():
            j = int(cluster[np.argmax(got - lim)])
            raise InvariantViolation(f"client {inst.client_ids[j]}: distance {d[j, ik]} > 3 * radius {radii[j]}")
        pos = lim > 0
        if pos.any():
            trace.max_radius_ratio = max(trace.max_radius_ratio, float((got[pos] / radii[cluster][pos]).max()))
        trace.centers.append(jk)
        trace.opened.append(ik)
        trace.clusters.append(cluster.tolist())
    return solution_from_index(inst, opened, assign)


@dataclass
class ApproxResult:
    solution: Solution
    fractional: FractionalSolution
    radii: np.ndarray
    rounded: Solution
    rounded_cost: float
    cost: float
    trace: RoundingTrace


def approx_solve_detailed(
    inst: Instance,
    p: NormParam,
    model: str = "standard",
    alpha: float = 0.25,
    tol: float = 1e-6,
    max_iters: int | None = None,
    method: str = "cutting-plane",
) -> ApproxResult:
    """Relaxation, filter, round, then nearest reassignment, keeping every intermediate."""
    frac = solve_relaxation(inst, p, model, tol, max_iters, method)
    filt, radii = filter_fractional(frac, inst, alpha)
    trace = RoundingTrace()
    rounded = round_filtered(filt, radii, inst, trace)
    fi = inst.facility_index
    r_open = [fi[f] for f in rounded.open]
    rc = cost_of(inst, r_open, rounded.assign_index(inst), p, model).total
    bound = frac.value / alpha
    if rc > bound * (1 + 1e-9) + 1e-12:
        raise InvariantViolation(f"rounded cost {rc} exceeds {1 / alpha} x fractional value {frac.value}")
    a = nearest_index(inst, r_open)
    final = solution_from_index(inst, r_open, a)
    fc = cost_of(inst, r_open, a, p, model).total
    return ApproxResult(final, frac, radii, rounded, rc, fc, trace)


def approx_solve(inst: Instance, p: NormParam, model: str = "standard", **kwargs) -> Solution:
    """Four-approximate solution via relaxation, filtering and rounding."""
    return approx_solve_detailed(inst, p, model, **kwargs).solution


# ---------------------------------------------------------------------------
# brute force


def pnorm_rows(M: np.ndarray, p: NormParam) -> np.ndarray:
    """Row-wise ``pnorm`` for a 2-d array of nonnegative entries."""
    m = M.max(axis=1)
    if p.inv_p < LARGE_P_CUTOFF:
        return m
    if p.inv_p == 1.0:
        return M.sum(axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sum((M / safe[:, None]) ** (1.0 / p.inv_p), axis=1) ** p.inv_p


def _subset_tables(vals: np.ndarray, costs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-distance and cost tables for every subset of the given facility columns."""
    k = vals.shape[1]
    near = np.full((1 << k, vals.shape[0]), np.inf)
    cost = np.zeros(1 << k)
    for b in range(k):
        lo, hi = 1 << b, 1 << (b + 1)
        near[lo:hi] = np.minimum(near[: hi - lo], vals[:, b][None, :])
        cost[lo:hi] = cost[: hi - lo] + costs[b]
    return near, cost


def brute_force_opt(
    inst: Instance, p: NormParam, model: str = "standard", cap: int | None = None
) -> tuple[Solution, float]:
    """Exact optimum by enumerating every nonempty facility subset.

    Ties within relative ``1e-12`` go to the lexicographically smallest open
    set of ids.

    Returns:
        ``(solution, cost)``.

    Raises:
        ResourceLimit: if ``|F|`` exceeds the cap.
    """
    _check_model(model)
    cap = bf_cap() if cap is None else cap
    n = inst.n_facilities
    if n > cap:
        raise ResourceLimit(f"brute force over {n} facilities exceeds the cap of {cap}")
    g = norm_weight(inst.r, p, model)
    GW = _group_matrix(inst)
    klo = min(n, 12)
    near_lo, cost_lo = _subset_tables(inst.cf[:, :klo], inst.costs[:klo])
    near_hi, cost_hi = _subset_tables(inst.cf[:, klo:], inst.costs[klo:])
    best = math.inf
    cands: list[tuple[float, int]] = []
    for h in range(near_hi.shape[0]):
        near = np.minimum(near_lo, near_hi[h][None, :])
        if h == 0:
            near[0] = 0.0  # empty set, masked below
        tot = cost_lo + cost_hi[h] + g * pnorm_rows(np.asarray(near @ GW), p)
        if h == 0:
            tot[0] = np.inf
        m = float(tot.min())
        if m <= best * (1 + BF_TIE_RTOL):
            best = min(best, m)
            thr = best * (1 + BF_TIE_RTOL) + 1e-300
            cands = [c for c in cands if c[0] <= thr]
            cands.extend((float(tot[i]), (h << klo) | int(i)) for i in np.flatnonzero(tot <= thr))
    thr = best * (1 + BF_TIE_RTOL) + 1e-300
    sets = [tuple(b for b in range(n) if mask >> b & 1) for c, mask in cands if c <= thr]
    chosen = min(sets)
    a = nearest_index(inst, chosen)
    return solution_from_index(inst, chosen, a), cost_of(inst, chosen, a, p, model).total


# short names matching the algorithm steps; not exported by ``import *``
filter = filter_fractional
round = round_filtered
