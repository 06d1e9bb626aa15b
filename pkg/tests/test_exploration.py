import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pclocality.balls import bfs_ball
from pclocality.exploration import (
    STOP_SURVIVAL,
    STOP_TAU,
    CoupledField,
    grow_step,
    initial_cluster,
    locality_experiment,
    nice_frontier,
    run_exploration,
    trend_check,
    LocalityRow,
)
from pclocality.families import default_quotient, family_sequence
from pclocality.graphs import edge_key, make_free_product, tree

from conftest import A, B, B2


class ScriptedField(CoupledField):
    """Marks read from dictionaries (default closed); records which Z marks were read."""

    def __init__(self, x=(), y=(), z=()):
        super().__init__(0.0, 0.0, 0.0, 0)
        self.sx, self.sy, self.sz = set(x), set(y), set(z)

    def x(self, ek):
        return self._x.setdefault(ek, ek in self.sx)

    def y(self, ek):
        return self._y.setdefault(ek, ek in self.sy)

    def z(self, ek):
        return self._z.setdefault(ek, ek in self.sz)


def _ek(g, v, u):
    return edge_key(g, v, g.neighbors(v).index(u), u)


def test_coupling_consistency():
    g = tree(3)
    keys = [edge_key(g, v, s) for v in bfs_ball(g, (), 3).keys for s in range(3)]
    f1 = CoupledField(0.4, 0.3, 0.2, seed=8, run=2)
    first = [(f1.z(k), f1.x(k), f1.y(k)) for k in keys]
    f2 = CoupledField(0.4, 0.3, 0.2, seed=8, run=2)
    second = [(f2.z(k), f2.x(k), f2.y(k)) for k in reversed(keys)][::-1]
    again = [(f1.z(k), f1.x(k), f1.y(k)) for k in keys]
    assert first == second == again


@given(st.lists(st.integers(0, 50), min_size=1, max_size=80))
@settings(max_examples=30)
def test_marks_stable_under_any_query_order(order):
    g = make_free_product([2, 3])
    keys = [edge_key(g, v, s) for v in bfs_ball(g, (), 4).keys for s in range(3)]
    f = CoupledField(0.5, 0.5, 0.5, seed=1)
    ref = CoupledField(0.5, 0.5, 0.5, seed=1)
    for i in order:
        k = keys[i % len(keys)]
        assert (f.x(k), f.y(k), f.z(k)) == (ref.x(k), ref.y(k), ref.z(k))


def test_domination_marginal():
    g = make_free_product([2, 3])
    ball = bfs_ball(g, (), 22)
    keys = ball.edge_keys[:100_000]
    f = CoupledField(0.2, 0.1, 0.05, seed=4)
    opened = sum(f.is_open(k) for k in keys)
    q = f.open_probability
    chi2 = (opened - len(keys) * q) ** 2 / (len(keys) * q * (1 - q))
    assert stats.chi2.sf(chi2, 1) > 1e-3
    # The three marks are independent of one another.
    xs = np.array([f.x(k) for k in keys])
    ys = np.array([f.y(k) for k in keys])
    assert abs(np.mean(xs & ys) - 0.02) < 5 * np.sqrt(0.02 / len(keys))


def test_initial_cluster_extremes():
    g = tree(3)
    assert initial_cluster(g, (), CoupledField(0, 0, 0, 1), 50) == ([()], False)
    verts, cut = initial_cluster(g, (), CoupledField(1, 0, 0, 1), 50)
    assert cut and len(verts) == 50


def test_initial_cluster_matches_branching_process():
    # Independent oracle: root has Bin(3, p) children, everyone else Bin(2, p).
    p, runs = 0.3, 10_000
    g = tree(3)
    sizes = [len(initial_cluster(g, (), CoupledField(p, 0, 0, 17, run=k), 10_000)[0]) for k in range(runs)]
    rng = np.random.default_rng(99)
    gw = []
    for _ in range(runs):
        total, alive = 1, rng.binomial(3, p)
        while alive:
            total += alive
            alive = rng.binomial(2 * alive, p)
        gw.append(total)
    assert stats.ks_2samp(sizes, gw).pvalue > 1e-3


def test_grow_step_crafted_case2():
    g = make_free_product([2, 3])
    o, a, b, b2 = (), (A,), (B,), (B2,)
    A0 = {o: None}
    # X: only b - b^2 open. Z: only the o - b link open.
    f = ScriptedField(x=[_ek(g, b, b2)], z=[_ek(g, o, b)])
    assert set(grow_step(g, A0, o, a, f, 2)) == {a, b, b2}
    # Without the Z link nothing but u joins.
    f = ScriptedField(x=[_ek(g, b, b2)])
    assert grow_step(g, A0, o, a, f, 2) == [a]


def test_grow_step_reads_only_first_link():
    g = make_free_product([2, 3])
    o, a = (), (A,)
    # In the ball around ab^2, the vertex ab has two edges into A = {a, ab^2 ... }; only the first is read.
    A0 = dict.fromkeys([o, a, (A, B2)])
    f = ScriptedField()
    grow_step(g, A0, a, (A, B), f, 2)
    read = f._z.keys()
    for z in {(A, B)}:
        links = sorted(_ek(g, z, y) for y in g.neighbors(z) if y in A0)
        assert links[0] in read and all(k not in read for k in links[1:])


def test_grow_step_full_ball_at_p_one():
    g = tree(3)
    A0 = {(): None}
    u = g.neighbors(())[0]
    f = CoupledField(1.0, 0.0, 0.0, 1)
    got = set(grow_step(g, A0, (), u, f, 2))
    # Paths may not pass through A, and with eps = 0 no link back to A is open.
    assert got == {v for v in bfs_ball(g, u, 2).keys if v[:1] == u}
    f = CoupledField(1.0, 0.0, 1.0 - 1e-12, 1)
    assert set(grow_step(g, A0, (), u, f, 2)) == set(bfs_ball(g, u, 2).keys) - {()}


def test_frontier_examples():
    t3 = tree(3)
    assert len(nice_frontier(t3, [()], 0.0286, 3)) == 3
    assert nice_frontier(t3, [()], 1.0, 3) == []


def test_zero_marks_stop_at_first_admissible_time():
    g = tree(3)
    lam = 0.1
    tr = run_exploration(g, (), 0, 0, 0, 3, lam, 100, 1)
    assert tr.stop_cause == STOP_TAU and tr.sizes == [1] * len(tr.sizes)
    assert tr.steps == max(1, math.ceil(lam * g.degree / 2))


def test_invariants_along_runs():
    q = default_quotient(make_free_product([2, 3]), 6)
    for k in range(15):
        tr = run_exploration(q, (), 0.45, 0.3, 0.3, 5, 0.0115, 400, 3, run=k, check_connected=True)
        assert all(b >= a for a, b in zip(tr.sizes, tr.sizes[1:]))
        assert all(z <= t for t, z in enumerate(tr.checked_closed))
        assert [b - a for a, b in zip(tr.sizes, tr.sizes[1:])] == tr.xi
        if tr.stop_cause == STOP_TAU:
            assert tr.sizes[-1] <= 2 * tr.steps / (0.0115 * 3)


def test_run_rejects_fully_open():
    with pytest.raises(ValueError):
        run_exploration(tree(3), (), 1.0, 0.0, 0.0, 2, 0.1, 10, 1)


def test_supercritical_survives():
    tr = run_exploration(tree(3), (), 0.9, 0.05, 0.05, 3, 0.057, 500, 1)
    assert tr.stop_cause == STOP_SURVIVAL


def test_locality_single_row_and_trend():
    G, make = family_sequence("z2z3")
    rep = locality_experiment(G, make, [4], radius=5, trials=2_000, seed=1, tmax=10)
    assert len(rep.rows) == 1 and rep.trend_ok is None
    rows = [LocalityRow(n, 0, 0, 0, 0, 0.5 + gap, 0.001, 0.5, 0.001) for n, gap in [(3, 0.02), (4, 0.01), (5, 0.03)]]
    ok, bad = trend_check(rows)
    assert not ok and bad == [(4, 5)]
