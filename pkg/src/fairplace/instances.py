"""Metric spaces, problem instances, generators and instance validation.

Points of a metric are addressed internally by integer index; each metric
also carries string labels so files can refer to points by name.  Facilities
are kept sorted by id so that "smallest facility id" and "smallest facility
index" coincide in every tie rule of the library.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, RangeError, Violation

METRIC_KINDS = ("explicit", "line", "tree", "euclidean")
TRIANGLE_TOL = 1e-9
MAX_SAFE_INT = 2**53


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True, order=True)
class NormParam:
    """A Minkowski norm stored by its reciprocal exponent.

    ``inv_p == 1`` is the 1-norm and ``inv_p == 0`` is the max norm, so every
    norm in ``[1, inf]`` maps into the closed interval ``[0, 1]``.
    """

    inv_p: float

    def __post_init__(self):
        v = float(self.inv_p)
        if not (0.0 <= v <= 1.0):
            raise InvalidArgument(f"inv_p must lie in [0, 1], got {self.inv_p!r}")
        object.__setattr__(self, "inv_p", v)

    @classmethod
    def from_p(cls, p: float | str) -> "NormParam":
        if isinstance(p, str):
            if p.strip().lower() in ("inf", "infinity"):
                return cls(0.0)
            p = float(p)
        if math.isinf(p):
            return cls(0.0)
        if not p >= 1.0:
            raise InvalidArgument(f"norm exponent must be >= 1, got {p!r}")
        return cls(1.0 / p)

    @property
    def p(self) -> float:
        return math.inf if self.inv_p == 0.0 else 1.0 / self.inv_p

    @property
    def is_inf(self) -> bool:
        return self.inv_p == 0.0

    def label(self) -> str:
        """Short text form: ``"inf"`` or the exponent with redundant zeros dropped."""
        if self.is_inf:
            return "inf"
        return f"{self.p:.12g}"

    def __repr__(self) -> str:
        return f"NormParam(p={self.label()})"


# ---------------------------------------------------------------------------
# metric spaces


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """A finite metric in one of four concrete representations.

    Args:
        kind: one of ``explicit``, ``line``, ``tree``, ``euclidean``.
        labels: point names; index ``i`` is point ``labels[i]``.
        coords: ``(n,)`` for line, ``(n, 2)`` for euclidean.
        matrix: ``(n, n)`` distances for explicit metrics.
        edges: ``(u, v, w)`` index triples for tree metrics.
    """

    kind: str
    labels: tuple[str, ...]
    coords: np.ndarray | None = None
    matrix: np.ndarray | None = None
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise InvalidArgument(f"unknown metric kind {self.kind!r}")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidArgument("metric point labels must be unique")
        n = len(self.labels)
        if self.kind in ("line", "euclidean"):
            shape = (n,) if self.kind == "line" else (n, 2)
            arr = np.asarray(self.coords, dtype=float).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, "coords", arr)
        elif self.kind == "explicit":
            arr = np.asarray(self.matrix, dtype=float)
            if arr.shape != (n, n):
                raise InvalidArgument(f"explicit matrix must be {n}x{n}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, "matrix", arr)
        else:
            edges = []
            for u, v, w in self.edges:
                if not (0 <= int(u) < n and 0 <= int(v) < n):
                    raise InvalidArgument(f"tree edge ({u}, {v}) references an unknown vertex")
                edges.append((int(u), int(v), float(w)))
            object.__setattr__(self, "edges", tuple(edges))

    # constructors -----------------------------------------------------------

    @classmethod
    def line(cls, xs: Sequence[float], labels: Sequence[str] | None = None) -> "MetricSpace":
        labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(xs)))
        return cls("line", labels, coords=np.asarray(xs, dtype=float))

    @classmethod
    def euclidean(cls, xy, labels: Sequence[str] | None = None) -> "MetricSpace":
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(xy)))
        return cls("euclidean", labels, coords=xy)

    @classmethod
    def explicit(cls, matrix, labels: Sequence[str] | None = None) -> "MetricSpace":
        matrix = np.asarray(matrix, dtype=float)
        labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(matrix)))
        return cls("explicit", labels, matrix=matrix)

    @classmethod
    def tree(cls, vertices: Sequence[str], edges: Sequence[tuple[str, str, float]]) -> "MetricSpace":
        """Build a tree metric from vertex names and ``(u, v, weight)`` name triples."""
        vertices = tuple(str(v) for v in vertices)
        pos = {v: i for i, v in enumerate(vertices)}
        triples = []
        for u, v, w in edges:
            if str(u) not in pos or str(v) not in pos:
                raise InvalidArgument(f"tree edge ({u}, {v}) references an unknown vertex")
            triples.append((pos[str(u)], pos[str(v)], float(w)))
        return cls("tree", vertices, edges=tuple(triples))

    # queries ----------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def resolve(self, point: str | int) -> int:
        """Map a label (or an in-range integer index) to a point index."""
        if isinstance(point, (int, np.integer)) and not isinstance(point, bool):
            if 0 <= point < self.n:
                return int(point)
        elif point in self.index:
            return self.index[point]
        raise InvalidArgument(f"unknown point id {point!r}")

    @cached_property
    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    @cached_property
    def _tree_apsp(self) -> np.ndarray:
        # One traversal per source; unreachable pairs stay at inf.
        n = self.n
        out = np.full((n, n), np.inf)
        adj = self.adjacency
        for s in range(n):
            row = out[s]
            row[s] = 0.0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v, w in adj[u]:
                    if row[v] == np.inf:
                        row[v] = row[u] + w
                        queue.append(v)
        # summation order differs by direction, so mirror to get exact symmetry
        lo = np.tril_indices(n, -1)
        out[lo] = out.T[lo]
        out.setflags(write=False)
        return out

    def pairwise(self, rows: Sequence[int] | np.ndarray, cols: Sequence[int] | np.ndarray) -> np.ndarray:
        """Distance matrix between two lists of point indices."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if self.kind == "line":
            return np.abs(self.coords[rows][:, None] - self.coords[cols][None, :])
        if self.kind == "euclidean":
            diff = self.coords[rows][:, None, :] - self.coords[cols][None, :, :]
            return np.hypot(diff[..., 0], diff[..., 1])
        if self.kind == "explicit":
            return np.array(self.matrix[np.ix_(rows, cols)])
        return np.array(self._tree_apsp[np.ix_(rows, cols)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricSpace):
            return NotImplemented
        if (self.kind, self.labels, self.edges) != (other.kind, other.labels, other.edges):
            return False
        for a, b in ((self.coords, other.coords), (self.matrix, other.matrix)):
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        return True

    __hash__ = None


def distance(m: MetricSpace, u: str | int, v: str | int) -> float:
    """Distance between two points given by label or index.

    Raises:
        InvalidArgument: if either point is unknown.
    """
    i, j = m.resolve(u), m.resolve(v)
    if i == j:
        return 0.0
    return float(m.pairwise([i], [j])[0, 0])


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class Facility:
    id: str
    point: int
    cost: float


@dataclass(frozen=True)
class Client:
    id: str
    point: int
    group: int


@dataclass(frozen=True, eq=False)
class Instance:
    """Facilities with opening costs and grouped clients on a metric.

    ``facilities`` is re-sorted by id on construction.  ``meta`` carries
    optional extras such as a generator's facility chain.
    """

    metric: MetricSpace
    facilities: tuple[Facility, ...]
    clients: tuple[Client, ...]
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        facs = tuple(sorted(self.facilities, key=lambda f: f.id))
        object.__setattr__(self, "facilities", facs)
        object.__setattr__(self, "clients", tuple(self.clients))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @cached_property
    def facility_ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.facilities)

    @cached_property
    def client_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.clients)

    @cached_property
    def facility_index(self) -> dict[str, int]:
        return {fid: i for i, fid in enumerate(self.facility_ids)}

    @cached_property
    def client_index(self) -> dict[str, int]:
        return {cid: j for j, cid in enumerate(self.client_ids)}

    @cached_property
    def costs(self) -> np.ndarray:
        out = np.array([f.cost for f in self.facilities], dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def group_ids(self) -> tuple[int, ...]:
        """Distinct group ids in increasing order."""
        return tuple(sorted({c.group for c in self.clients}))

    @property
    def r(self) -> int:
        return len(self.group_ids)

    @cached_property
    def groups(self) -> np.ndarray:
        """Per-client group position in ``0..r-1``."""
        pos = {g: s for s, g in enumerate(self.group_ids)}
        out = np.array([pos[c.group] for c in self.clients], dtype=int)
        out.setflags(write=False)
        return out

    @cached_property
    def group_sizes(self) -> np.ndarray:
        out = np.bincount(self.groups, minlength=self.r).astype(float)
        out.setflags(write=False)
        return out

    @cached_property
    def client_weights(self) -> np.ndarray:
        """``1/|D_s|`` for the group ``s`` of each client."""
        out = 1.0 / self.group_sizes[self.groups] if self.n_clients else np.zeros(0)
        out.setflags(write=False)
        return out

    @cached_property
    def cf(self) -> np.ndarray:
        """Client-by-facility distance matrix."""
        out = self.metric.pairwise([c.point for c in self.clients], [f.point for f in self.facilities])
        out.setflags(write=False)
        return out

    @cached_property
    def ff(self) -> np.ndarray:
        """Facility-by-facility distance matrix."""
        pts = [f.point for f in self.facilities]
        out = self.metric.pairwise(pts, pts)
        out.setflags(write=False)
        return out

    def with_costs(self, costs: Sequence[float] | float) -> "Instance":
        """Copy of the instance with replaced opening costs (scalar means uniform)."""
        costs = np.broadcast_to(np.asarray(costs, dtype=float), (self.n_facilities,))
        facs = tuple(Facility(f.id, f.point, float(c)) for f, c in zip(self.facilities, costs))
        return Instance(self.metric, facs, self.clients, self.meta)


def line_instance(
    facilities: Sequence[tuple[str, float, float]],
    clients: Sequence[tuple[str, float, int]],
    meta: Mapping | None = None,
) -> Instance:
    """Convenience builder: ``(id, x, cost)`` facilities and ``(id, x, group)`` clients."""
    xs = [x for _, x, _ in facilities] + [x for _, x, _ in clients]
    labels = [f"F:{fid}" for fid, _, _ in facilities] + [f"C:{cid}" for cid, _, _ in clients]
    metric = MetricSpace.line(xs, labels)
    nf = len(facilities)
    facs = [Facility(str(fid), i, float(c)) for i, (fid, _, c) in enumerate(facilities)]
    cls_ = [Client(str(cid), nf + j, int(g)) for j, (cid, _, g) in enumerate(clients)]
    return Instance(metric, tuple(facs), tuple(cls_), meta or {})


# ---------------------------------------------------------------------------
# validation


def _validate_metric(m: MetricSpace) -> list[Violation]:
    out: list[Violation] = []
    if m.kind in ("line", "euclidean"):
        if not np.all(np.isfinite(m.coords)):
            out.append(Violation("metric.finite", "coords", "non-finite coordinate"))
        return out
    if m.kind == "tree":
        for u, v, w in m.edges:
            if not (w >= 0 and math.isfinite(w)):
                out.append(Violation("metric.tree_weight", f"edge {m.labels[u]}-{m.labels[v]}", f"weight {w}"))
        if len(m.edges) != max(m.n - 1, 0):
            out.append(Violation("metric.tree_acyclic", "edges", f"{len(m.edges)} edges for {m.n} vertices"))
        if m.n and np.isinf(m._tree_apsp[0]).any():
            out.append(Violation("metric.tree_connected", "edges", "edge list is not connected"))
        return out
    d = m.matrix
    if not np.all(np.isfinite(d)):
        out.append(Violation("metric.finite", "matrix", "non-finite distance"))
        return out
    for i in np.flatnonzero(np.diag(d) != 0):
        out.append(Violation("metric.identity", m.labels[i], f"d(u,u) = {d[i, i]}"))
    for i, j in zip(*np.nonzero(d < 0)):
        out.append(Violation("metric.nonnegative", f"{m.labels[i]},{m.labels[j]}", f"{d[i, j]}"))
    for i, j in zip(*np.nonzero(d != d.T)):
        if i < j:
            out.append(Violation("metric.symmetry", f"{m.labels[i]},{m.labels[j]}", f"{d[i, j]} != {d[j, i]}"))
    for k in range(m.n):
        # d(i,j) <= d(i,k) + d(k,j) for every pair, one intermediate at a time
        bad = d > d[:, [k]] + d[[k], :] + TRIANGLE_TOL
        for i, j in zip(*np.nonzero(bad)):
            out.append(
                Violation(
                    "metric.triangle",
                    f"{m.labels[i]},{m.labels[k]},{m.labels[j]}",
                    f"d={d[i, j]} > {d[i, k]} + {d[k, j]}",
                )
            )
    return out


def validate_instance(inst: Instance) -> list[Violation]:
    """List every violated metric or instance invariant; empty means valid."""
    out = _validate_metric(inst.metric)
    n = inst.metric.n
    if not inst.facilities:
        out.append(Violation("instance.facilities", "facilities", "facility set is empty"))
    if len(set(inst.facility_ids)) != inst.n_facilities:
        out.append(Violation("instance.unique_ids", "facilities", "duplicate facility id"))
    if len(set(inst.client_ids)) != inst.n_clients:
        out.append(Violation("instance.unique_ids", "clients", "duplicate client id"))
    for f in inst.facilities:
        if not (0 <= f.point < n):
            out.append(Violation("instance.point", f"facility {f.id}", f"unknown point {f.point}"))
        if not (math.isfinite(f.cost) and f.cost >= 0):
            out.append(Violation("instance.cost", f"facility {f.id}", f"cost {f.cost}"))
    if not inst.clients:
        out.append(Violation("instance.groups", "clients", "no clients, so no nonempty group"))
    r = inst.r
    for c in inst.clients:
        if not (0 <= c.point < n):
            out.append(Violation("instance.point", f"client {c.id}", f"unknown point {c.point}"))
        if not (isinstance(c.group, (int, np.integer)) and 0 <= c.group < r):
            out.append(Violation("instance.partition", f"client {c.id}", f"group id {c.group} outside [0, {r})"))
    return out


# ---------------------------------------------------------------------------
# generators


class SplitMix64:
    """The SplitMix64 generator; tiny and easy to reproduce in any language."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in ``[0, 1)`` from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` by rejection."""
        if n <= 0:
            raise InvalidArgument("randbelow needs n > 0")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n


@dataclass(frozen=True)
class RandomParams:
    n_facilities: int
    n_clients: int
    r: int
    metric: str = "line"
    cost_range: tuple[float, float] = (1.0, 10.0)
    extent: float = 10.0
    ndigits: int = 4


def _pad(n: int) -> int:
    return max(1, len(str(max(n - 1, 0))))


def gen_random(params: RandomParams, seed: int) -> Instance:
    """Random instance, a pure function of ``(params, seed)``.

    Draw order: facility positions and costs, then client positions, then a
    Fisher-Yates shuffle of round-robin group labels.  Tree metrics place one
    facility per vertex and attach vertex ``v`` to a uniformly chosen earlier
    vertex.  Coordinates, weights and costs are rounded to ``ndigits``.

    Raises:
        InvalidArgument: on ``r > n_clients`` or nonpositive sizes.
    """
    p = params
    if p.n_clients < 1 or p.n_facilities < 1 or p.r < 1:
        raise InvalidArgument("need at least one facility, one client and one group")
    if p.r > p.n_clients:
        raise InvalidArgument(f"r={p.r} exceeds n_clients={p.n_clients}")
    if p.metric not in METRIC_KINDS:
        raise InvalidArgument(f"unknown metric kind {p.metric!r}")
    lo, hi = p.cost_range
    if not 0 <= lo <= hi:
        raise InvalidArgument(f"bad cost range {p.cost_range}")
    rng = SplitMix64(seed)
    rd = lambda v: round(v, p.ndigits)  # noqa: E731
    fw, cw = _pad(p.n_facilities), _pad(p.n_clients)
    fids = [f"f{i:0{fw}d}" for i in range(p.n_facilities)]
    cids = [f"c{j:0{cw}d}" for j in range(p.n_clients)]

    costs: list[float] = []
    if p.metric == "tree":
        nv = p.n_facilities
        vw = _pad(nv)
        vnames = [f"v{i:0{vw}d}" for i in range(nv)]
        edges = []
        for v in range(1, nv):
            parent = rng.randbelow(v)
            edges.append((vnames[parent], vnames[v], rd(rng.uniform(0.5, p.extent / 2))))
        for _ in range(nv):
            costs.append(rd(rng.uniform(lo, hi)))
        cpts = [rng.randbelow(nv) for _ in range(p.n_clients)]
        metric = MetricSpace.tree(vnames, edges)
        fpts = list(range(nv))
    else:
        dim = 1 if p.metric == "line" else 2
        coords = []
        for _ in range(p.n_facilities):
            coords.append([rd(rng.uniform(0, p.extent)) for _ in range(dim)])
            costs.append(rd(rng.uniform(lo, hi)))
        for _ in range(p.n_clients):
            coords.append([rd(rng.uniform(0, p.extent)) for _ in range(dim)])
        labels = fids + cids
        if p.metric == "line":
            metric = MetricSpace.line([c[0] for c in coords], labels)
        elif p.metric == "euclidean":
            metric = MetricSpace.euclidean(coords, labels)
        else:
            xy = np.asarray(coords)
            diff = xy[:, None, :] - xy[None, :, :]
            metric = MetricSpace.explicit(np.hypot(diff[..., 0], diff[..., 1]), labels)
        fpts = list(range(p.n_facilities))
        cpts = [p.n_facilities + j for j in range(p.n_clients)]

    groups = [j % p.r for j in range(p.n_clients)]
    for i in range(p.n_clients - 1, 0, -1):
        k = rng.randbelow(i + 1)
        groups[i], groups[k] = groups[k], groups[i]

    facs = tuple(Facility(fids[i], fpts[i], costs[i]) for i in range(p.n_facilities))
    clis = tuple(Client(cids[j], cpts[j], groups[j]) for j in range(p.n_clients))
    return Instance(metric, facs, clis)


def gen_star_lower_bound(t: int, k: int) -> Instance:
    """Star whose center holds ``t**k`` singleton-group clients.

    Leaf ``j`` (``1 <= j <= k``) hosts a facility of cost ``t**j`` at edge
    length ``t**((k - j) / k)``, so cheap facilities sit far away.

    Raises:
        InvalidArgument: if ``t < 2`` or ``k < 1``.
        RangeError: if ``t**k`` is not a machine-safe integer.
    """
    if t < 2 or k < 1:
        raise InvalidArgument("need t >= 2 and k >= 1")
    r = t**k
    if r > MAX_SAFE_INT:
        raise RangeError(f"t**k = {t}**{k} exceeds 2**53")
    kw, cw = _pad(k + 1), _pad(r)
    leaves = [f"f{j:0{kw}d}" for j in range(1, k + 1)]
    metric = MetricSpace.tree(
        ["center", *leaves],
        [("center", leaves[j - 1], float(t) ** ((k - j) / k)) for j in range(1, k + 1)],
    )
    facs = tuple(Facility(leaves[j - 1], j, float(t**j)) for j in range(1, k + 1))
    clis = tuple(Client(f"c{s:0{cw}d}", 0, s) for s in range(r))
    return Instance(metric, facs, clis, {"generator": "star", "t": t, "k": k})


def gen_greedy_adversarial(l: int, eps: float) -> Instance:
    """One client at 0 facing a chain that lures nearest-facility reassignment right.

    Candidate facilities sit at ``-(1+eps)`` (id ``g0``) and ``2**t - 1`` for
    ``t = 1..l`` (id ``g<t>``).  The chain ``G_k = {g0} | {g_t : t >= k}`` is
    stored in ``meta["chain"]`` as lists of facility ids.
    """
    if l < 1:
        raise InvalidArgument("need l >= 1")
    if not eps > 0:
        raise InvalidArgument("need eps > 0")
    w = _pad(l + 1)
    ids = [f"g{t:0{w}d}" for t in range(l + 1)]
    xs = [-(1.0 + eps)] + [float(2**t - 1) for t in range(1, l + 1)]
    facs = [(ids[t], xs[t], 0.0) for t in range(l + 1)]
    chain = [[ids[0]] + ids[k:] for k in range(1, l + 1)]
    return line_instance(
        facs, [("c0", 0.0, 0)], {"generator": "adversarial", "l": l, "eps": eps, "chain": chain}
    )
