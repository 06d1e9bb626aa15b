import itertools

import networkx as nx
import numpy as np
import pytest

from pclocality import _kernels
from pclocality.balls import bfs_ball
from pclocality.errors import NonBracketingError
from pclocality.families import parse_family
from pclocality.graphs import make_free_product, tree
from pclocality.percolation import (
    _seed_mix,
    assumption2_report,
    connection_prob,
    connection_prob_exact,
    open_uniforms,
    pc_estimate,
    reach_prob,
    reach_thresholds,
    sample_percolation,
    tree_pc_oracle,
    tree_reach_exact,
)
from pclocality.rng import trial_key


def _brute_connection(ball, p):
    """Oracle independent of the kernels: networkx components over every open set."""
    m = ball.n_edges
    sphere = ball.sphere(ball.radius)
    out = np.zeros(len(sphere))
    for bits in itertools.product((0, 1), repeat=m):
        G = nx.Graph()
        G.add_nodes_from(range(ball.n_vertices))
        G.add_edges_from((int(i), int(j)) for (i, j, _), b in zip(ball.edges, bits) if b)
        comp = nx.node_connected_component(G, 0)
        w = p ** sum(bits) * (1 - p) ** (m - sum(bits))
        out += [w if int(x) in comp else 0.0 for x in sphere]
    return out


def test_sample_extremes_and_reproducible():
    ball = bfs_ball(tree(3), (), 2)
    assert sample_percolation(ball, 0.0, 1).n_open == 0
    assert sample_percolation(ball, 1.0, 1).n_open == ball.n_edges
    s1, s2 = sample_percolation(ball, 0.5, 9, trial=4), sample_percolation(ball, 0.5, 9, trial=4)
    assert np.array_equal(s1.open_edges, s2.open_edges)
    assert np.array_equal(s1.open_edges, open_uniforms(ball, 9, 4) < 0.5)


def test_compiled_rng_matches_reference():
    ball = bfs_ball(make_free_product([2, 3]), (), 3)
    for t in (0, 1, 77):
        key = np.uint64(trial_key(123, t))
        got = np.array([_kernels.uniform(h, key) for h in ball.edge_hashes])
        assert np.array_equal(got, open_uniforms(ball, 123, t))


def test_open_count_binomial():
    ball = bfs_ball(make_free_product([2, 3]), (), 4)
    m = ball.n_edges
    counts = np.array([sample_percolation(ball, 0.5, 3, trial=t).n_open for t in range(10_000)])
    sigma = np.sqrt(m * 0.25 / 10_000)
    assert abs(counts.mean() - m / 2) <= 3 * sigma
    assert abs(counts.var() - m / 4) <= 0.1 * m / 4


def test_connection_examples():
    ball = bfs_ball(tree(3), (), 1)
    est = connection_prob(ball, 0.3, 50_000, 1)
    assert np.all(np.abs(est.estimate - 0.3) <= 4 * est.stderr)
    assert np.all(connection_prob(bfs_ball(parse_family("mgp3"), (), 2), 1.0, 10, 1).estimate == 1.0)
    z1 = bfs_ball(make_free_product([2, 3]), (), 1)
    exact = connection_prob_exact(z1, 0.5)
    assert np.allclose(sorted(exact), [0.5, 0.625, 0.625])


def test_exact_small_graphs():
    # Single edge and two-edge path (the tree ball at radius 2 restricted to one branch).
    assert np.allclose(connection_prob_exact(bfs_ball(tree(3), (), 1), 0.37), 0.37)
    assert np.allclose(connection_prob_exact(bfs_ball(tree(3), (), 2), 0.37), 0.37**2)


@pytest.mark.parametrize("name,r", [("z2z3", 1), ("z2z3", 2), ("z2z3/q2", 2), ("fp:3,3", 1)])
def test_exact_against_bruteforce(name, r):
    ball = bfs_ball(parse_family(name), (), r)
    assert np.allclose(connection_prob_exact(ball, 0.42), _brute_connection(ball, 0.42), atol=1e-13)


def test_exact_rejects_large():
    with pytest.raises(ValueError):
        connection_prob_exact(bfs_ball(tree(3), (), 3), 0.5)


def test_assumption2_tree_symmetric():
    ball = bfs_ball(tree(3), (), 3)
    rep = assumption2_report(ball, 0.6, 20_000, 2)
    assert rep.within_bounds and rep.zero_vertices == 0


def test_assumption2_flags_zero():
    rep = assumption2_report(bfs_ball(tree(3), (), 3), 0.01, 100, 2)
    assert rep.zero_vertices > 0 and not rep.within_bounds


def test_tree_recursion_values():
    assert tree_reach_exact(3, 0.5, 1) == 0.875
    assert tree_reach_exact(3, 0.5, 2) == 1 - (1 - 0.375) ** 3
    q1 = 0.5
    q2 = 0.5 * (1 - (1 - q1) ** 2)
    q3 = 0.5 * (1 - (1 - q2) ** 2)
    assert np.isclose(tree_reach_exact(3, 0.5, 3), 1 - (1 - q3) ** 3)
    # Fixed point of the recursion is positive exactly above 1/(d-1).
    for d in (3, 4):
        assert tree_reach_exact(d, 0.98 / (d - 1), 4000) < 1e-3
        assert tree_reach_exact(d, 1.1 / (d - 1), 4000) > 0.01


@pytest.mark.parametrize("d", [3, 4])
def test_reach_matches_tree_oracle(d):
    g = tree(d)
    for n in range(1, 9, 2 if d == 4 else 1):
        for p in (0.3, 0.5):
            est = reach_prob(g, p, n, 20_000, 7)
            assert abs(est.estimate - tree_reach_exact(d, p, n)) <= 4 * max(est.stderr, 1e-4)
    assert reach_prob(g, 0.0, 2, 100, 1).estimate == 0.0


def test_thresholds_equal_bfs_per_trial():
    g = make_free_product([2, 3])
    ball = bfs_ball(g, (), 6)
    thr = reach_thresholds(g, [2, 4, 6], 300, 5, ball=ball)
    # Nested in the radius, pathwise.
    assert np.all(np.diff(thr, axis=1) >= 0)
    indptr, nbr, eid = ball.csr
    mix = _seed_mix(5)
    for t in range(300):
        for k, n in enumerate((2, 4, 6)):
            for p in (0.3, 0.55, 0.8):
                hit = _kernels.reach_hits(indptr, nbr, eid, ball.level, ball.edge_hashes, n, p, mix, t, 1, 1)[0]
                assert bool(hit) == (thr[t, k] < p)


def test_reach_monotone_in_p():
    g = tree(3)
    hs = [reach_prob(g, p, 5, 5_000, 3).estimate for p in np.linspace(0.2, 0.9, 15)]
    assert all(b >= a for a, b in zip(hs, hs[1:]))


def test_pc_estimate_tree():
    est = pc_estimate(tree(3), [3, 6, 10], 0.5, 20_000, 11)
    for n, ph, se in zip(est.n_list, est.p_hat, est.stderr):
        assert abs(ph - tree_pc_oracle(3, n, 0.5)) <= 4 * se + 0.002
    assert est.p_hat == sorted(est.p_hat)


def test_pc_estimate_errors():
    with pytest.raises(NonBracketingError):
        pc_estimate(tree(3), [3], 1.0, 100, 1)
    with pytest.raises(ValueError):
        pc_estimate(tree(3), [3, 2], 0.5, 100, 1)
    with pytest.raises(ValueError):
        pc_estimate(tree(3), [3], 0.5, 100, None)


def test_thread_count_does_not_change_results():
    import numba

    g = parse_family("z2z3")
    before = numba.get_num_threads()
    outs = []
    for k in sorted({1, numba.config.NUMBA_NUM_THREADS}):
        numba.set_num_threads(k)
        outs.append(reach_thresholds(g, [3, 6], 2_000, 4))
    numba.set_num_threads(before)
    assert all(np.array_equal(outs[0], o) for o in outs)
