"""Strong refinements on tree metrics by cutting the tree into lines.

The subtree spanning the deepest level's facilities is split into paths
between consecutive facilities; each path is handled as a line by
``expand_intervals``.  Every component hanging off that subtree follows its
attachment vertex at the levels where it contains no facility and is solved
recursively, with fewer levels, below that.

Vertices are addressed by metric index throughout.  Preconditions: positive
edge weights and, at every level, all branch vertices of the spanning
subtree already present (see ``augment_branch_vertices``).
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvariantViolation, UnsupportedConfiguration
from .instances import Instance, MetricSpace
from .line import expand_intervals
from .objective import solution_from_index


def _adj(tree: MetricSpace, within: set[int]) -> dict[int, list[tuple[int, float]]]:
    return {v: [(u, w) for u, w in tree.adjacency[v] if u in within] for v in within}


def steiner_vertices(tree: MetricSpace, S: set[int], within: set[int] | None = None) -> set[int]:
    """Vertices of the smallest subtree (of ``within``) containing ``S``."""
    within = set(range(tree.n)) if within is None else set(within)
    if not S:
        return set()
    adj = _adj(tree, within)
    keep = set(within)
    deg = {v: len(adj[v]) for v in keep}
    leaves = [v for v in keep if deg[v] <= 1 and v not in S]
    while leaves:
        v = leaves.pop()
        if v not in keep:
            continue
        keep.discard(v)
        for u, _ in adj[v]:
            if u in keep:
                deg[u] -= 1
                if deg[u] <= 1 and u not in S:
                    leaves.append(u)
    return keep


def _branch_vertices(tree: MetricSpace, S: set[int], within: set[int] | None = None) -> set[int]:
    keep = steiner_vertices(tree, S, within)
    return {v for v in keep if sum(1 for u, _ in tree.adjacency[v] if u in keep) >= 3}


def augment_branch_vertices(tree: MetricSpace, G: Sequence[int]) -> set[int]:
    """``G`` plus every degree-3-or-more vertex of the subtree spanning ``G``.

    Raises:
        InvalidArgument: if ``G`` is empty.
    """
    G = set(int(v) for v in G)
    if not G:
        raise InvalidArgument("vertex set is empty")
    return G | _branch_vertices(tree, G)


def _paths(tree: MetricSpace, span: set[int], S: set[int]) -> list[list[tuple[int, float]]]:
    """Edge-disjoint paths of the spanning subtree between consecutive ``S`` vertices.

    Each path is a list of ``(vertex, cumulative length)`` from one endpoint.
    """
    adj = _adj(tree, span)
    done: set[tuple[int, int]] = set()
    out = []
    for s in sorted(S):
        for u, w in sorted(adj[s]):
            if (s, u) in done:
                continue
            path = [(s, 0.0)]
            prev, cur, acc = s, u, w
            done.add((s, u))
            while True:
                path.append((cur, acc))
                if cur in S:
                    done.add((cur, prev))
                    break
                nxt = [(x, ww) for x, ww in adj[cur] if x != prev]
                if len(nxt) != 1:
                    raise InvalidArgument(f"vertex {tree.labels[cur]} is a branch vertex missing from the level set")
                prev, (cur, ww) = cur, nxt[0]
                acc += ww
            out.append(path)
    return out


def _components(tree: MetricSpace, within: set[int], span: set[int]) -> list[tuple[int, set[int]]]:
    """``(attachment vertex, component)`` for each piece of ``within`` minus ``span``."""
    adj = _adj(tree, within)
    seen: set[int] = set()
    out = []
    for f in sorted(span):
        for u, _ in sorted(adj[f]):
            if u in span or u in seen:
                continue
            comp, stack = {u}, [u]
            while stack:
                v = stack.pop()
                for x, _ in adj[v]:
                    if x not in span and x not in comp:
                        comp.add(x)
                        stack.append(x)
            seen |= comp
            out.append((f, comp))
    return out


def _put(maps: list[dict[int, int]], k: int, v: int, target: int) -> None:
    old = maps[k].get(v)
    if old is not None and old != target:
        raise InvariantViolation(f"vertex {v} assigned twice at level {k + 1}: {old} and {target}")
    maps[k][v] = target


def branch_and_linearize(
    tree: MetricSpace, t: int, G: Sequence[Sequence[int]], within: set[int] | None = None
) -> list[dict[int, int]]:
    """Per-level vertex assignments ``maps[k][v]`` for levels ``1..t`` (list index ``k-1``).

    Args:
        tree: a tree metric with positive edge weights.
        t: number of levels; ``t = 0`` returns an empty list.
        G: nested vertex sets ``G[0] ⊇ ... ⊇ G[t-1]``, each holding its own branch vertices.
        within: restrict to this vertex subset (a subtree); defaults to all vertices.

    Raises:
        InvalidArgument: if the sets are not nested, the last is empty, or a
            branch vertex is missing.
    """
    if t == 0:
        return []
    within = set(range(tree.n)) if within is None else set(within)
    G = [set(int(v) for v in g) & within for g in G[:t]]
    for k in range(t - 1):
        if not G[k + 1] <= G[k]:
            raise InvalidArgument(f"level {k + 2} is not contained in level {k + 1}")
    if not G[-1]:
        raise InvalidArgument("last level is empty")
    for k, g in enumerate(G):
        missing = _branch_vertices(tree, g, within) - g
        if missing:
            raise InvalidArgument(f"level {k + 1} misses branch vertices {sorted(missing)}")

    maps: list[dict[int, int]] = [dict() for _ in range(t)]
    S = G[-1]
    span = steiner_vertices(tree, S, within)
    if len(span) == 1:
        (v,) = span
        for k in range(t):
            _put(maps, k, v, v)
    for path in _paths(tree, span, S):
        verts = [v for v, _ in path]
        pos = {v: Fraction(x) for v, x in path}
        back = {pos[v]: v for v in verts}
        if len(back) != len(verts):
            raise UnsupportedConfiguration("zero-length edge on a path; tree backend needs positive weights")
        res = expand_intervals([[pos[v] for v in verts if v in G[k]] for k in range(t)])
        for v in verts:
            for k, x in enumerate(res.assign(pos[v])):
                _put(maps, k, v, back[x])
    for f, comp in _components(tree, within, span):
        s = next(k for k in range(1, t + 1) if not (comp & G[k - 1]))
        for k in range(s - 1, t):
            for v in comp:
                _put(maps, k, v, maps[k][f])
        sub = branch_and_linearize(tree, s - 1, G[: s - 1], comp | {f})
        for k, m in enumerate(sub):
            for v, target in m.items():
                _put(maps, k, v, target)
    for k in range(t):
        if set(maps[k]) != within:
            raise InvariantViolation(f"level {k + 1} assignment is partial")
    return maps


def tree_backend_check(inst: Instance) -> dict[int, int]:
    """Validate tree-backend preconditions; return vertex -> smallest facility index at that vertex.

    Raises:
        UnsupportedConfiguration: non-tree metric, non-uniform costs, a vertex
            without a facility, or a non-positive edge weight.
    """
    if inst.metric.kind != "tree":
        raise UnsupportedConfiguration("tree backend needs a tree metric")
    if inst.n_facilities and np.ptp(inst.costs) != 0:
        raise UnsupportedConfiguration("tree backend needs uniform facility costs")
    if any(w <= 0 for _, _, w in inst.metric.edges):
        raise UnsupportedConfiguration("tree backend needs positive edge weights")
    at: dict[int, int] = {}
    for i, f in enumerate(inst.facilities):
        at.setdefault(f.point, i)
    if len(at) != inst.metric.n:
        raise UnsupportedConfiguration("tree backend needs a candidate facility at every vertex")
    return at


def tree_refine_chain(inst: Instance, chain, check: bool = True):
    """Strong refinement on a tree: augment each level with branch vertices, then branch and linearize.

    The returned chain opens the augmented sets, which are at most twice as
    large as the input sets.
    """
    from .refine import RefinementChain, _as_decreasing, _check_nested, blowup_table

    at = tree_backend_check(inst)
    dchain, flipped = _as_decreasing(chain)
    sets = _check_nested(inst, dchain)
    tree = inst.metric
    vsets = [{inst.facilities[i].point for i in s} for s in sets]
    aug = [augment_branch_vertices(tree, g) for g in vsets]
    for g, a in zip(vsets, aug):
        if len(a) > 2 * len(g):
            raise InvariantViolation(f"augmented set has {len(a)} > 2 * {len(g)} vertices")
    l = len(sets)
    maps = branch_and_linearize(tree, l, aug)
    if check:
        bound = 2 * l - 1
        D = tree._tree_apsp
        for k in range(l):
            cols = sorted(aug[k])
            near = D[:, cols].min(axis=1)
            got = np.array([D[v, maps[k][v]] for v in range(tree.n)])
            if (got > bound * near * (1 + 1e-9) + 1e-12).any():
                raise InvariantViolation(f"tree blowup exceeds {bound} at level {k + 1}")
    open_idx = [sorted(at[v] for v in a) for a in aug]
    assign = np.array([[at[maps[k][c.point]] for k in range(l)] for c in inst.clients], dtype=int).reshape(-1, l)
    levels = [solution_from_index(inst, open_idx[k], assign[:, k]) for k in range(l)]
    out = RefinementChain(list(dchain.norms), levels, "decreasing", None, dict(dchain.meta))
    out.blowup_table = blowup_table(inst, out).tolist()
    out.meta.update(backend="tree", blowup_bound=2 * l, augmented_sizes=[len(a) for a in aug])
    return out.reversed() if flipped else out
