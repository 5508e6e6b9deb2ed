"""Markov clustering and graph contraction, cross-checked against dense
reference implementations."""

import numpy as np
import pytest

from spgemmkit import (LabelOutOfRange, MclParams, NegativeEntry, NotSquare,
                       SpgemmConfig, SpgemmKitError, add_self_loops,
                       build_selector, column_normalize, connected_components,
                       csr_from_arrays, csr_from_dense, graph_contract,
                       inflate, mcl, prune_columns, transpose)
from conftest import random_csr


# ------------------------------------------------- dense reference MCL ----


def dense_normalize(m):
    sums = m.sum(axis=0)
    out = m.copy()
    nz = sums > 0
    out[:, nz] /= sums[nz]
    return out


def dense_topk_columns(m, k):
    if k is None:
        return m
    out = np.zeros_like(m)
    for j in range(m.shape[1]):
        col = m[:, j]
        live = np.nonzero(col > 0)[0]
        if live.size:
            # largest values win; ties go to the smaller row index
            order = live[np.lexsort((live, -col[live]))][:k]
            out[order, j] = col[order]
    return out


def dense_mcl(dense_g, e=2, r=2.0, theta=1e-4, k=None, max_iter=100, eps=1e-6):
    a = dense_g.copy()
    np.fill_diagonal(a, np.where(np.diag(a) == 0.0, 1.0, np.diag(a)))
    a = dense_normalize(a)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        b = np.linalg.matrix_power(a, e)
        c = np.where(b < theta, 0.0, b)
        c = dense_topk_columns(c, k)
        c = dense_normalize(c ** r)
        delta = np.max(np.abs(c - a))
        a = c
        if delta < eps:
            break
    return a, iterations


def dense_components(adj):
    n = adj.shape[0]
    sym = (adj + adj.T) != 0.0
    seen = np.full(n, -1)
    next_id = 0
    for start in range(n):
        if seen[start] >= 0:
            continue
        stack = [start]
        seen[start] = next_id
        while stack:
            u = stack.pop()
            for v in np.nonzero(sym[u])[0]:
                if seen[v] < 0:
                    seen[v] = next_id
                    stack.append(v)
        next_id += 1
    return seen, next_id


def partition_of(assignment):
    groups = {}
    for node, cid in enumerate(np.asarray(assignment)):
        groups.setdefault(int(cid), set()).add(node)
    return frozenset(frozenset(g) for g in groups.values())


# --------------------------------------------------- column operations ----


def test_column_normalize_examples():
    m = csr_from_arrays(2, 1, [0, 1], [0, 0], [2.0, 2.0])
    np.testing.assert_array_equal(column_normalize(m).values, [0.5, 0.5])

    stochastic = csr_from_arrays(2, 2, [0, 1, 1], [0, 0, 1], [0.25, 0.75, 1.0])
    again = column_normalize(stochastic)
    assert np.max(np.abs(again.values - stochastic.values)) < 1e-15

    with_empty = csr_from_arrays(2, 3, [0, 1], [0, 0], [1.0, 3.0])
    normed = column_normalize(with_empty)
    assert normed.nnz == 2  # the empty columns stay empty
    np.testing.assert_allclose(normed.values, [0.25, 0.75])

    with pytest.raises(NegativeEntry):
        column_normalize(csr_from_arrays(1, 1, [0], [0], [-1.0]))


def test_prune_columns_examples():
    col = csr_from_arrays(3, 1, [0, 1, 2], [0, 0, 0], [0.5, 0.3, 0.2])
    np.testing.assert_array_equal(prune_columns(col, 0.25).values, [0.5, 0.3])
    kept = prune_columns(col, 0.25, k=1)
    assert kept.nnz == 1 and kept.values[0] == 0.5
    unchanged = prune_columns(col, 0.0, k=5)
    np.testing.assert_array_equal(unchanged.values, col.values)
    assert prune_columns(col, 0.9).nnz == 0


def test_prune_ties_keep_smaller_row():
    col = csr_from_arrays(3, 1, [0, 1, 2], [0, 0, 0], [0.4, 0.2, 0.4])
    kept = prune_columns(col, 0.0, k=1)
    rows, _, _ = kept.to_triplets()
    np.testing.assert_array_equal(rows, [0])


def test_inflate_examples():
    m = csr_from_arrays(1, 1, [0], [0], [0.5])
    assert inflate(m, 2.0).values[0] == 0.25
    np.testing.assert_array_equal(inflate(m, 1.0).values, m.values)

    col = csr_from_arrays(2, 1, [0, 1], [0, 0], [0.6, 0.4])
    result = column_normalize(inflate(col, 2.0))
    np.testing.assert_allclose(result.values, [0.36 / 0.52, 0.16 / 0.52])


def test_add_self_loops():
    g = csr_from_arrays(3, 3, [0, 0, 2], [1, 0, 2], [1.0, 7.0, 3.0])
    looped = add_self_loops(g)
    dense = looped.to_dense()
    np.testing.assert_array_equal(np.diag(dense), [7.0, 1.0, 3.0])
    with pytest.raises(NotSquare):
        add_self_loops(csr_from_arrays(2, 3, [], [], []))


def test_connected_components(path3, two_cliques):
    assert connected_components(path3).n_clusters == 1
    assert connected_components(two_cliques).n_clusters == 1  # bridged
    split = csr_from_arrays(4, 4, [0, 2], [1, 3], [1.0, 1.0])  # directed edges
    assignment = connected_components(split)
    assert assignment.n_clusters == 2
    np.testing.assert_array_equal(assignment.cluster_of_node, [0, 0, 1, 1])


def test_mcl_params_validation():
    with pytest.raises(SpgemmKitError):
        MclParams(e=1)
    with pytest.raises(SpgemmKitError):
        MclParams(r=1.0)
    with pytest.raises(SpgemmKitError):
        MclParams(theta=-0.1)
    with pytest.raises(SpgemmKitError):
        MclParams(k=0)
    with pytest.raises(SpgemmKitError):
        MclParams(eps=0.0)


# ------------------------------------------------------------------ MCL ----


def test_mcl_separates_bridged_cliques(two_cliques):
    assignment, iterations = mcl(two_cliques)
    assert assignment.n_clusters == 2
    np.testing.assert_array_equal(assignment.cluster_of_node, [0, 0, 0, 1, 1, 1])
    assert 1 <= iterations <= 100


def test_mcl_single_node():
    lone = csr_from_arrays(1, 1, [], [], [])
    assignment, iterations = mcl(lone)
    assert assignment.n_clusters == 1
    assert iterations <= 2


def test_mcl_two_disconnected_edges():
    g = csr_from_arrays(4, 4, [0, 1, 2, 3], [1, 0, 3, 2], np.ones(4))
    assignment, _ = mcl(g)
    assert assignment.n_clusters == 2
    assert partition_of(assignment.cluster_of_node) == \
        frozenset({frozenset({0, 1}), frozenset({2, 3})})


def test_mcl_matches_dense_reference(two_cliques):
    rng = np.random.default_rng(59)
    cases = [two_cliques.to_dense()]
    for _ in range(4):
        n = int(rng.integers(4, 12))
        sym = random_csr(rng, n, n, density=0.3, mixed_sign=False)
        dense = sym.to_dense()
        cases.append(np.maximum(dense, dense.T))
    for dense in cases:
        g = csr_from_dense(dense)
        assignment, iterations = mcl(g)
        ref_matrix, ref_iterations = dense_mcl(dense)
        ref_assign, ref_count = dense_components(ref_matrix)
        assert iterations == ref_iterations
        assert assignment.n_clusters == ref_count
        assert partition_of(assignment.cluster_of_node) == partition_of(ref_assign)


def test_mcl_rejects_bad_inputs():
    with pytest.raises(NotSquare):
        mcl(csr_from_arrays(2, 3, [], [], []))
    with pytest.raises(NegativeEntry):
        mcl(csr_from_arrays(2, 2, [0], [1], [-1.0]))


def test_mcl_is_permutation_invariant(two_cliques):
    rng = np.random.default_rng(61)
    base, _ = mcl(two_cliques)
    dense = two_cliques.to_dense()
    for _ in range(3):
        p = rng.permutation(6)
        permuted = csr_from_dense(dense[np.ix_(p, p)])
        assignment, _ = mcl(permuted)
        assert assignment.n_clusters == base.n_clusters
        # node sets of the clusters must be the same after mapping back
        mapped = np.empty(6, dtype=int)
        mapped[p] = assignment.cluster_of_node
        assert partition_of(mapped) == partition_of(base.cluster_of_node)


def test_mcl_never_merges_components():
    rng = np.random.default_rng(67)
    for _ in range(10):
        n1, n2 = (int(x) for x in rng.integers(2, 7, size=2))
        g1 = random_csr(rng, n1, n1, density=0.6, mixed_sign=False).to_dense()
        g2 = random_csr(rng, n2, n2, density=0.6, mixed_sign=False).to_dense()
        dense = np.zeros((n1 + n2, n1 + n2))
        dense[:n1, :n1] = np.maximum(g1, g1.T)
        dense[n1:, n1:] = np.maximum(g2, g2.T)
        assignment, _ = mcl(csr_from_dense(dense))
        first = set(assignment.cluster_of_node[:n1])
        second = set(assignment.cluster_of_node[n1:])
        assert not (first & second)


def test_mcl_worker_count_invariance(two_cliques):
    single, _ = mcl(two_cliques, config=SpgemmConfig(worker_count=1))
    many, _ = mcl(two_cliques, config=SpgemmConfig(worker_count=8))
    np.testing.assert_array_equal(single.cluster_of_node, many.cluster_of_node)


def test_mcl_topk_and_expansion_parameters(two_cliques):
    params = MclParams(e=3, r=1.5, k=4)
    assignment, iterations = mcl(two_cliques, params)
    ref_matrix, ref_iterations = dense_mcl(two_cliques.to_dense(), e=3,
                                           r=1.5, k=4)
    _, ref_count = dense_components(ref_matrix)
    # the gentler inflation lets the bridge win: one cluster, same as dense
    assert assignment.n_clusters == ref_count == 1
    assert iterations == ref_iterations


# ----------------------------------------------------------- selector ----


def test_build_selector_examples():
    s = build_selector([1, 1, 2], 3)
    assert s.shape == (2, 3)
    rows, cols, vals = s.to_triplets()
    np.testing.assert_array_equal(rows, [0, 0, 1])
    np.testing.assert_array_equal(cols, [0, 1, 2])
    np.testing.assert_array_equal(vals, [1.0, 1.0, 1.0])

    eye = build_selector([1, 2, 3], 3)
    np.testing.assert_array_equal(eye.to_dense(), np.eye(3))

    flat = build_selector([1, 1, 1], 3)
    np.testing.assert_array_equal(flat.to_dense(), [[1.0, 1.0, 1.0]])


def test_build_selector_validation():
    with pytest.raises(LabelOutOfRange):
        build_selector([0, 1], 2)
    with pytest.raises(LabelOutOfRange):
        build_selector([1.5, 2.0], 2)
    with pytest.raises(LabelOutOfRange):
        build_selector([1, 2], 3)  # length mismatch


# ----------------------------------------------------------- contract ----


def test_contract_path_graph(path3):
    c = graph_contract(path3, [1, 1, 2])
    assert c.shape == (2, 2)
    assert c.nnz == 3  # the (1,1) cell has no incident edges and stays absent
    np.testing.assert_array_equal(c.to_dense(), [[2.0, 1.0], [1.0, 0.0]])


def test_contract_identity_and_collapse(path3):
    same = graph_contract(path3, [1, 2, 3])
    np.testing.assert_array_equal(same.to_dense(), path3.to_dense())
    total = graph_contract(path3, [1, 1, 1])
    assert total.shape == (1, 1)
    assert total.to_dense()[0, 0] == path3.values.sum()


def test_contract_mass_conservation_integer_weights():
    rng = np.random.default_rng(71)
    for _ in range(10):
        n = int(rng.integers(3, 30))
        dense = rng.integers(0, 4, size=(n, n)).astype(float)
        g = csr_from_dense(dense)
        labels = rng.integers(1, max(2, n // 2), size=n)
        labels[0] = labels.max()  # keep the label range dense at the top
        c = graph_contract(g, labels)
        assert c.values.sum() == dense.sum()  # exact integer arithmetic


def test_contract_distinct_labels_is_permutation_similar():
    rng = np.random.default_rng(73)
    n = 8
    g = random_csr(rng, n, n, density=0.4)
    perm = rng.permutation(n)
    labels = perm + 1
    c = graph_contract(g, labels)
    np.testing.assert_allclose(c.to_dense()[np.ix_(perm, perm)], g.to_dense(),
                               atol=1e-12)


def test_contract_matches_dense_triple_product():
    rng = np.random.default_rng(79)
    n = 12
    g = random_csr(rng, n, n, density=0.3)
    labels = rng.integers(1, 5, size=n)
    labels[:4] = [4, 3, 2, 1]
    s = build_selector(labels, n).to_dense()
    expected = s @ g.to_dense() @ s.T
    c = graph_contract(g, labels)
    np.testing.assert_allclose(c.to_dense(), expected, atol=1e-12)


def test_contract_worker_count_invariance(path3):
    single = graph_contract(path3, [1, 1, 2], config=SpgemmConfig(worker_count=1))
    many = graph_contract(path3, [1, 1, 2], config=SpgemmConfig(worker_count=8))
    np.testing.assert_array_equal(single.to_dense(), many.to_dense())


def test_contract_rejects_bad_inputs(path3):
    with pytest.raises(NotSquare):
        graph_contract(csr_from_arrays(2, 3, [], [], []), [1, 1])
    with pytest.raises(LabelOutOfRange):
        graph_contract(path3, [1, 1])  # labels shorter than the graph
