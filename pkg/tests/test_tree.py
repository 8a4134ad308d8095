import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from fairplace.errors import InvalidArgument, UnsupportedConfiguration
from fairplace.instances import MetricSpace
from fairplace.line import expand_intervals
from fairplace.objective import total_cost
from fairplace.refine import chain_from_sets, refine_pipeline
from fairplace.solver import brute_force_opt
from fairplace.tree import augment_branch_vertices, branch_and_linearize, tree_refine_chain
from fairplace.verify import check_strong

from helpers import NORMS, small_random


def star(n_leaves=3):
    names = [str(i) for i in range(n_leaves + 1)]
    return MetricSpace.tree(names, [("0", str(i), 1.0) for i in range(1, n_leaves + 1)])


def path(weights):
    names = [str(i) for i in range(len(weights) + 1)]
    return MetricSpace.tree(names, [(str(i), str(i + 1), float(w)) for i, w in enumerate(weights)])


def apsp(tree):
    n = tree.n
    w = np.zeros((n, n))
    for u, v, d in tree.edges:
        iu, iv = tree.resolve(u), tree.resolve(v)
        w[iu, iv] = w[iv, iu] = d
    return shortest_path(csr_matrix(w), directed=False)


def test_star_leaves_add_center():
    assert augment_branch_vertices(star(), [1, 2, 3]) == {0, 1, 2, 3}


def test_star_two_leaves_unchanged():
    assert augment_branch_vertices(star(), [1, 2]) == {1, 2}


def test_path_endpoints_unchanged():
    assert augment_branch_vertices(path([1, 2, 3]), [0, 3]) == {0, 3}


def test_zero_levels():
    assert branch_and_linearize(star(), 0, []) == []


def test_single_path_matches_line():
    tree = path([1, 2, 3, 1])
    xs = [0, 1, 3, 6, 7]
    chain = [[0, 1, 2, 3, 4], [0, 2, 4], [2]]
    maps = branch_and_linearize(tree, 3, chain)
    res = expand_intervals([[xs[v] for v in g] for g in chain])
    back = {x: v for v, x in enumerate(xs)}
    for v, x in enumerate(xs):
        assert [maps[k][v] for k in range(3)] == [back[y] for y in res.assign(x)]


def test_missing_branch_vertex_rejected():
    with pytest.raises(InvalidArgument):
        branch_and_linearize(star(), 1, [[1, 2, 3]])
    with pytest.raises(InvalidArgument):
        branch_and_linearize(star(), 2, [[0, 1], [2]])


@st.composite
def random_trees(draw):
    n = draw(st.integers(1, 12))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    weights = [draw(st.integers(1, 9)) for _ in range(1, n)]
    names = [str(i) for i in range(n)]
    tree = MetricSpace.tree(names, [(str(p), str(i + 1), float(w)) for i, (p, w) in enumerate(zip(parents, weights))])
    return tree


@given(tree=random_trees(), data=st.data())
def test_augment_at_most_doubles(tree, data):
    G = data.draw(st.sets(st.integers(0, tree.n - 1), min_size=1))
    aug = augment_branch_vertices(tree, sorted(G))
    assert G <= aug and len(aug) <= 2 * len(G)
    # idempotent: the augmented set has no further branch vertices
    assert augment_branch_vertices(tree, sorted(aug)) == aug


@given(tree=random_trees(), data=st.data())
def test_random_tree_chains(tree, data):
    l = data.draw(st.integers(1, 3))
    raw = [data.draw(st.sets(st.integers(0, tree.n - 1), min_size=1))]
    for _ in range(l - 1):
        raw.append(data.draw(st.sets(st.sampled_from(sorted(raw[-1])), min_size=1)))
    # suffix unions keep nesting after augmentation
    aug = [augment_branch_vertices(tree, sorted(g)) for g in raw]
    for k in range(l - 2, -1, -1):
        aug[k] = augment_branch_vertices(tree, sorted(aug[k] | aug[k + 1]))
    maps = branch_and_linearize(tree, l, aug)
    D = apsp(tree)
    for k in range(l):
        cols = sorted(aug[k])
        for v in range(tree.n):
            assert maps[k][v] in aug[k]
            assert D[v, maps[k][v]] <= 2 * l * D[v, cols].min() + 1e-9
        for g in aug[k]:
            assert maps[k][g] == g
    for k in range(l - 1):
        up = {}
        for v in range(tree.n):
            assert up.setdefault(maps[k][v], maps[k + 1][v]) == maps[k + 1][v]


def test_tree_backend_requires_uniform_costs():
    inst = small_random(0, metric="tree")
    chain = chain_from_sets(inst, [[0, 1], [0]], ["1", "2"])
    with pytest.raises(UnsupportedConfiguration):
        tree_refine_chain(inst, chain)


@pytest.mark.parametrize("seed", range(10))
def test_tree_pipeline_costs(seed):
    inst = small_random(seed, metric="tree", nf=6, nc=7, r=3, cost_range=(4.0, 4.0))
    chain = refine_pipeline(inst, list(NORMS), backend="tree")
    assert chain.meta["backend"] == "tree"
    assert check_strong(chain) == []
    l = chain.l
    assert np.max(chain.blowup_table) <= 2 * l
    for q, sol in zip(chain.norms, chain.levels):
        opt = brute_force_opt(inst, q)[1]
        assert total_cost(inst, sol, q).total <= 16 * l * opt * (1 + 1e-6)
