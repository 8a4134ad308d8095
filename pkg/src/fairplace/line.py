"""Strong refinements on the line by growing per-level assignment intervals.

Every facility position ``x`` open at level ``k`` owns an interval
``A(x, k)`` of the extended real line.  The intervals start at the base
intervals ``I(x, k)``, which reach a fraction ``alpha = 1/(2l)`` of the way
towards each neighbouring open position, and only ever grow.  Three phases
follow:

1. Bottom-up merging: each node absorbs every not-yet-parented lower node
   whose interval meets its own, giving a forest of nested intervals.
2. Re-parenting: a node that skipped levels is moved under the closest child
   one level below its parent, whose interval becomes the convex hull.
3. Gap filling: top-down, children are stretched to partition their parent,
   splitting each gap at its midpoint.

A point is served at level ``k`` by the leftmost level-``k`` interval that
contains it, so shared endpoints go to the interval on their left.  All
arithmetic is exact (``fractions.Fraction``); the unbounded ends are
``float('inf')``.
"""
from __future__ import annotations

import bisect
import copy
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvariantViolation
from .instances import Instance
from .objective import solution_from_index

INF = float("inf")
Node = tuple[int, Fraction]  # (level, position)


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def base_intervals(positions: Sequence, alpha) -> list[tuple]:
    """``I(x_i) = [(1-a) x_i + a x_{i-1}, (1-a) x_i + a x_{i+1}]`` with infinite ends.

    Raises:
        InvalidArgument: if the positions are not strictly increasing.
    """
    xs = [_frac(v) for v in positions]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InvalidArgument("positions must be strictly increasing")
    a = _frac(alpha)
    out = []
    for i, x in enumerate(xs):
        lo = (1 - a) * x + a * xs[i - 1] if i > 0 else -INF
        hi = (1 - a) * x + a * xs[i + 1] if i + 1 < len(xs) else INF
        out.append((lo, hi))
    return out


def _meets(p: list, q: list) -> bool:
    return p[0] <= q[1] and q[0] <= p[1]


def _gap(p: list, q: list):
    if _meets(p, q):
        return Fraction(0)
    return q[0] - p[1] if p[1] < q[0] else p[0] - q[1]


@dataclass
class LineRefinement:
    """All state of one run: levels ``1..l+1``, base and final intervals, the tree, and phase snapshots."""

    levels: list[list[Fraction]]
    alpha: Fraction
    base: dict[Node, tuple]
    A: dict[Node, list]
    parent: dict[Node, Node]
    snapshots: dict[str, tuple[dict, dict]] = field(default_factory=dict)

    @property
    def l(self) -> int:
        return len(self.levels) - 1

    def children(self, node: Node, parent: dict | None = None) -> list[Node]:
        parent = self.parent if parent is None else parent
        return sorted((c for c, p in parent.items() if p == node), key=lambda c: (self.A[c][0], c[1]))

    def locate(self, x, k: int) -> Fraction:
        """Position serving point ``x`` at level ``k`` (1-based)."""
        x = _frac(x)
        nodes = sorted(((k, v) for v in self.levels[k - 1]), key=lambda n: self.A[n][0])
        his = [self.A[n][1] for n in nodes]
        i = bisect.bisect_left(his, x)
        if i == len(nodes) or self.A[nodes[i]][0] > x:
            raise InvariantViolation(f"point {x} is not covered at level {k}")
        return nodes[i][1]

    def assign(self, x) -> list[Fraction]:
        """Serving positions of ``x`` at levels ``1..l``."""
        return [self.locate(x, k) for k in range(1, self.l + 1)]


def _snapshot(A, parent):
    return copy.deepcopy(A), dict(parent)


def expand_intervals(chain: Sequence[Sequence], alpha=None, check: bool = True) -> LineRefinement:
    """Hierarchy of nested intervals for a chain of position sets ``G_1 ⊇ ... ⊇ G_l``.

    Colocated positions within a level are merged.  An auxiliary level
    ``l+1`` holds only the leftmost position of ``G_l`` and covers the line.

    Raises:
        InvalidArgument: on an empty chain, an empty ``G_l`` or a chain that is not nested.
        InvariantViolation: if ``check`` and any phase invariant fails.
    """
    if not chain:
        raise InvalidArgument("chain is empty")
    levels = [sorted({_frac(v) for v in G}) for G in chain]
    if not levels[-1]:
        raise InvalidArgument("last level is empty")
    for k in range(len(levels) - 1):
        if not set(levels[k + 1]) <= set(levels[k]):
            raise InvalidArgument(f"level {k + 2} is not contained in level {k + 1}")
    l = len(levels)
    alpha = Fraction(1, 2 * l) if alpha is None else _frac(alpha)
    levels.append([levels[-1][0]])

    base: dict[Node, tuple] = {}
    for k, G in enumerate(levels, start=1):
        for x, iv in zip(G, base_intervals(G, alpha)):
            base[(k, x)] = iv
    A = {n: list(iv) for n, iv in base.items()}
    parent: dict[Node, Node] = {}
    res = LineRefinement(levels, alpha, base, A, parent)
    res.snapshots["init"] = _snapshot(A, parent)

    # step 1: bottom-up merging
    for k in range(2, l + 2):
        for x in levels[k - 1]:
            me = (k, x)
            before = list(A[me])
            S = [n for n in A if n[0] < k and n not in parent and _meets(A[n], before)]
            for n in S:
                parent[n] = me
                A[me][0] = min(A[me][0], A[n][0])
                A[me][1] = max(A[me][1], A[n][1])
    res.snapshots["step1"] = _snapshot(A, parent)
    if check:
        _check_contains_base(res, "step1")
        _check_step1_growth(res)
        _check_tree(res, immediate=False, complete=False, where="step1")

    # step 2: re-parent nodes that skip levels
    for k in range(l + 1, 1, -1):
        for x in levels[k - 1]:
            me = (k, x)
            kids = res.children(me)
            near = [c for c in kids if c[0] == k - 1]
            for h in (c for c in kids if c[0] < k - 1):
                if not near:
                    raise InvariantViolation(f"node {me} has no child one level below")
                g = min(near, key=lambda c: (_gap(A[c], A[h]), c[1]))
                parent[h] = g
                A[g][0] = min(A[g][0], A[h][0])
                A[g][1] = max(A[g][1], A[h][1])
    res.snapshots["step2"] = _snapshot(A, parent)
    if check:
        _check_contains_base(res, "step2")
        _check_tree(res, immediate=True, complete=False, where="step2")

    # step 3: fill gaps top-down
    complete_assignment((l + 1, levels[-1][0]), res)
    res.snapshots["final"] = _snapshot(A, parent)
    if check:
        _check_contains_base(res, "final")
        _check_tree(res, immediate=True, complete=True, where="final")
    return res


def complete_assignment(node: Node, res: LineRefinement) -> None:
    """Stretch the children of ``node`` to partition its interval, then recurse.

    Gaps between consecutive children are split at their midpoints and the
    outermost children absorb the flanks.

    Raises:
        InvariantViolation: if two children overlap in more than an endpoint.
    """
    stack = [node]
    while stack:
        cur = stack.pop()
        kids = res.children(cur)
        if not kids:
            continue
        P = res.A[cur]
        for a, b in zip(kids, kids[1:]):
            if res.A[a][1] > res.A[b][0]:
                raise InvariantViolation(f"children {a} and {b} of {cur} overlap")
        res.A[kids[0]][0] = P[0]
        res.A[kids[-1]][1] = P[1]
        for a, b in zip(kids, kids[1:]):
            if res.A[a][1] < res.A[b][0]:
                mid = (res.A[a][1] + res.A[b][0]) / 2
                res.A[a][1] = mid
                res.A[b][0] = mid
        stack.extend(reversed(kids))


def fill_children(parent_iv: Sequence, children: Sequence[Sequence]) -> list[list]:
    """Midpoint gap filling of sorted, disjoint ``children`` inside ``parent_iv`` (standalone form)."""
    kids = [[_frac(a) if abs(a) != INF else a, _frac(b) if abs(b) != INF else b] for a, b in children]
    kids.sort(key=lambda c: c[0])
    for a, b in zip(kids, kids[1:]):
        if a[1] > b[0]:
            raise InvariantViolation("children overlap")
    kids[0][0], kids[-1][1] = parent_iv[0], parent_iv[1]
    for a, b in zip(kids, kids[1:]):
        if a[1] < b[0]:
            a[1] = b[0] = (a[1] + b[0]) / 2
    return kids


# ---------------------------------------------------------------------------
# in-run checks


def _check_contains_base(res: LineRefinement, where: str) -> None:
    for n, (lo, hi) in res.base.items():
        a = res.A[n]
        if a[0] > lo or a[1] < hi:
            raise InvariantViolation(f"{where}: A{n} = {a} does not contain I = {[lo, hi]}")


def _check_step1_growth(res: LineRefinement) -> None:
    a = res.alpha
    for k in range(1, res.l + 1):
        G = res.levels[k - 1]
        for f, g in zip(G, G[1:]):
            gap = g - f
            if res.A[(k, f)][1] - f > k * a * gap:
                raise InvariantViolation(f"step1: A({f},{k}) reaches beyond {k}*alpha*gap to the right")
            if g - res.A[(k, g)][0] > k * a * gap:
                raise InvariantViolation(f"step1: A({g},{k}) reaches beyond {k}*alpha*gap to the left")


def tree_violations(res: LineRefinement, parent: dict, A: dict, immediate: bool, complete: bool) -> list[tuple[str, str, str]]:
    """Hierarchy-tree condition failures as ``(check, location, detail)`` triples."""
    out = []
    root = (res.l + 1, res.levels[-1][0])
    for n in A:
        if n == root:
            continue
        if n not in parent:
            out.append(("tree.parent", str(n), "node has no parent"))
            continue
        p = parent[n]
        if A[p][0] > A[n][0] or A[p][1] < A[n][1]:
            out.append(("tree.containment", str(n), f"A{n}={A[n]} not inside parent A{p}={A[p]}"))
        if immediate and p[0] != n[0] + 1:
            out.append(("tree.immediate_parent", str(n), f"parent {p} is not one level up"))
    groups: dict[Node, list[Node]] = {}
    for c, p in parent.items():
        groups.setdefault(p, []).append(c)
    for p, kids in groups.items():
        kids = sorted(kids, key=lambda c: A[c][0])
        for i, a in enumerate(kids):
            for b in kids[i + 1 :]:
                if max(A[a][0], A[b][0]) < min(A[a][1], A[b][1]):
                    out.append(("tree.sibling_disjoint", f"{a},{b}", f"{A[a]} and {A[b]} overlap"))
        if complete:
            if A[kids[0]][0] != A[p][0] or A[kids[-1]][1] != A[p][1] or any(
                A[a][1] != A[b][0] for a, b in zip(kids, kids[1:])
            ):
                out.append(("tree.completeness", str(p), "children do not partition the parent"))
    if complete:
        for k in range(1, res.l + 2):
            ivs = sorted((A[(k, x)] for x in res.levels[k - 1]), key=lambda iv: iv[0])
            ok = ivs[0][0] == -INF and ivs[-1][1] == INF and all(a[1] == b[0] for a, b in zip(ivs, ivs[1:]))
            if not ok:
                out.append(("tree.level_partition", f"level {k}", "intervals do not partition the line"))
    return out


def _check_tree(res: LineRefinement, immediate: bool, complete: bool, where: str) -> None:
    bad = tree_violations(res, res.parent, res.A, immediate, complete)
    if bad:
        raise InvariantViolation(f"{where}: " + "; ".join(f"{c} at {loc}: {d}" for c, loc, d in bad[:3]))


# ---------------------------------------------------------------------------
# chains on line instances


def _positions(inst: Instance, idx: Sequence[int]) -> dict[Fraction, int]:
    """Position -> smallest facility index at that position."""
    out: dict[Fraction, int] = {}
    for i in sorted(idx):
        x = Fraction(float(inst.metric.coords[inst.facilities[i].point]))
        out.setdefault(x, i)
    return out


def line_refine_chain(inst: Instance, chain, check: bool = True):
    """Strong refinement of a nested chain on a line instance via interval expansion.

    Each client's level-``k`` facility is within ``2l`` times its nearest
    level-``k`` distance; with ``check`` this is verified per client.
    """
    from .refine import RefinementChain, _as_decreasing, _check_nested, blowup_table

    if inst.metric.kind != "line":
        raise InvalidArgument("line refinement needs a line metric")
    dchain, flipped = _as_decreasing(chain)
    sets = _check_nested(inst, dchain)
    reps = [_positions(inst, s) for s in sets]
    res = expand_intervals([sorted(r) for r in reps], check=check)
    l = len(sets)
    assign = np.zeros((inst.n_clients, l), dtype=int)
    for j, c in enumerate(inst.clients):
        x = Fraction(float(inst.metric.coords[c.point]))
        for k, pos in enumerate(res.assign(x)):
            assign[j, k] = reps[k][pos]
    levels = [solution_from_index(inst, sets[k], assign[:, k]) for k in range(l)]
    out = RefinementChain(list(dchain.norms), levels, "decreasing", None, dict(dchain.meta))
    table = blowup_table(inst, out)
    bound = float((1 - res.alpha) / res.alpha)
    if check and (table > bound * (1 + 1e-9)).any():
        raise InvariantViolation(f"line blowup {table.max()} exceeds {bound}")
    out.blowup_table = table.tolist()
    out.meta.update(backend="line", alpha=str(res.alpha), blowup_bound=2 * l)
    return out.reversed() if flipped else out
