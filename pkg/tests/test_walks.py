import random

import numpy as np
import pytest

from pclocality.balls import bfs_ball
from pclocality.families import default_quotient, parse_family
from pclocality.graphs import make_free_product, make_modified_grandparent, make_quotient, tree
from pclocality.walks import (
    ExitTemplates,
    harmonic_measure,
    nice_beta,
    nice_edge_count,
    quotient_identity_check,
    ratio_report,
    return_probabilities,
    return_probability,
    schur_rho_upper,
    spectral_estimate,
    sphere_classes,
)

from conftest import A, B

T3_RHO = 2 * np.sqrt(2) / 3


def _mc_exit(g, radius, runs, seed):
    """Independent oracle: simulate walks until they first reach the sphere."""
    ball = bfs_ball(g, g.root, radius)
    rng = np.random.default_rng(seed)
    counts = np.zeros(ball.n_vertices)
    for _ in range(runs):
        v = 0
        while ball.level[v] < radius:
            v = ball.nbr[v, rng.integers(g.degree)]
        counts[v] += 1
    sphere = ball.sphere(radius)
    return counts[sphere] / runs


def test_tree_uniform_exit():
    dist = harmonic_measure(bfs_ball(tree(3), (), 3))
    assert len(dist.vertices) == 12
    assert np.allclose(dist.prob, 1 / 12, atol=1e-12)


@pytest.mark.parametrize("name", ["z2z3", "mgp3"])
def test_exit_matches_simulation(name):
    g = parse_family(name)
    dist = harmonic_measure(bfs_ball(g, g.root, 2))
    mc = _mc_exit(g, 2, 40_000, 1)
    assert abs(dist.prob.sum() - 1) < 1e-10
    assert np.all(np.abs(mc - dist.prob) <= 5 * np.sqrt(dist.prob * (1 - dist.prob) / 40_000) + 1e-12)


def test_mgp_classes_constant():
    g = make_modified_grandparent(tree(3))
    for R in (1, 2, 3, 4):
        ball = bfs_ball(g, g.root, R)
        rep = ratio_report(harmonic_measure(ball), sphere_classes(ball, R))
        assert rep.within_class_max <= 1 + 1e-10
        assert 1 <= rep.global_ratio <= 9


def test_ratio_report_zero_mass():
    rep = ratio_report([0.0, 0.5, 0.5], ["x", "x", "y"])
    assert rep.zero_mass and rep.global_ratio == float("inf")


def test_return_probabilities():
    assert np.isclose(return_probability(tree(3), 2), 1 / 3)
    z = make_free_product([2, 3])
    assert np.isclose(return_probability(z, 2), 1 / 3)
    assert return_probability(z, 0) == 1.0 and return_probability(tree(3), 1) == 0.0
    # Oracle for T3: closed walks counted by a dense matrix power on a large enough ball.
    ball = bfs_ball(tree(3), (), 4)
    P = np.zeros((ball.n_vertices, ball.n_vertices))
    for i, row in enumerate(ball.nbr):
        for j in row:
            if j >= 0:
                P[i, j] += 1 / 3
    assert np.allclose(return_probabilities(tree(3), 8)[:9],
                       [np.linalg.matrix_power(P, t)[0, 0] for t in range(9)], atol=1e-14)


def test_spectral_bounds():
    est = spectral_estimate(tree(3), 24)
    assert np.all(np.diff(est.roots) >= -1e-12)
    assert est.rho_hat <= T3_RHO <= est.rho_upper + 1e-12
    assert est.upper_certified and abs(est.rho_upper - T3_RHO) < 1e-9
    assert 0 < est.lambda1_lower <= est.lambda1_hat < 1


def test_schur_bound_known_values():
    assert abs(schur_rho_upper(tree(4))[0] - np.sqrt(3) / 2) < 1e-9
    z = make_free_product([2, 3])
    bound, ok = schur_rho_upper(z)
    assert ok and bound >= spectral_estimate(z, 40).rho_hat
    # Closed form of the two-type Schur optimum for Z2*Z3.
    assert abs(bound - (1 + np.sqrt(13 + 8 * np.sqrt(2))) / 6) < 1e-9


def test_line_is_amenable():
    with pytest.warns(UserWarning):
        line = make_free_product([2, 2])
    est = spectral_estimate(line, 60)
    assert est.rho_hat > 0.9 and est.lambda1_lower == 0.0


def test_quotient_matches_base_below_local_radius():
    z = make_free_product([2, 3])
    q = default_quotient(z, 6)
    # Balls agree to radius 5, so returns agree for t <= 11.
    assert np.allclose(return_probabilities(q, 10), return_probabilities(z, 10), atol=1e-15)


def test_quotient_identity_examples():
    z = make_free_product([2, 3])
    for n in (2, 3, 4):
        q = make_quotient(z, (A, B), n)
        for j in range(0, 11):
            assert quotient_identity_check(z, q, j) <= 1e-12
    q2 = make_quotient(z, (A, B), 2)
    assert quotient_identity_check(z, q2, 2) == 0.0


@pytest.mark.parametrize("name", ["t3", "z2z3", "mgp3"])
def test_translation_invariance(name):
    g = parse_family(name)
    templates = ExitTemplates(g)
    rng = random.Random(5)
    verts = bfs_ball(g, g.root, 4).keys
    for u in rng.sample(verts, 10):
        for j in (1, 2, 3):
            direct = harmonic_measure(bfs_ball(g, u, j)).as_dict()
            moved, prob = templates.at(u, j)
            assert set(moved) == set(direct)
            assert max(abs(direct[v] - p) for v, p in zip(moved, prob)) <= 1e-12


def test_nice_beta_examples():
    t3 = tree(3)
    u = t3.neighbors(())[0]
    assert np.isclose(nice_beta(t3, {()}, (), u, 1), 2 / 9)
    for j in (2, 3):
        assert np.isclose(nice_beta(t3, {()}, (), u, j), 1 / 3)
    big = set(bfs_ball(t3, u, 2).keys) | {()}
    assert nice_beta(t3, big, (), u, 2) == 0.0
    with pytest.raises(ValueError):
        nice_beta(t3, {u}, (), u, 1)


def test_nice_edge_count_examples():
    t3 = tree(3)
    lam = spectral_estimate(t3, 20).lambda1_lower
    assert nice_edge_count(t3, {()}, lam / 2, 3) == 3
    assert nice_edge_count(t3, {()}, 1.0, 3) == 0
