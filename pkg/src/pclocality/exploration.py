"""The coupled three-mark exploration process and the locality experiment.

Each edge carries three independent marks: ``X`` (retention ``p``), ``Y``
(``eps``) and ``Z`` (``eps1``). The edge is open when any mark is 1. Starting
from the ``X``-cluster of ``v``, each step checks the ``Y`` mark of one
unchecked nice edge and, when it is open, absorbs what the ``X`` marks reach
around its far endpoint, plus what is reached from vertices glued on by an
open ``Z`` mark.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ._validation import check_increasing, check_int, check_probability, check_seed
from .balls import local_radius
from .graphs import CosetQuotientGraph, ImplicitGraph, edge_key
from .percolation import DEFAULT_THETA_STAR, pc_estimate, reach_prob
from .rng import edge_hash, stream_key, trial_key, uniform
from .walks import ExitTemplates, spectral_estimate
from .words import Word

_SALT_X, _SALT_Y, _SALT_Z = 1, 2, 3

STOP_TAU = "tau"
STOP_SURVIVAL = "survival"
STOP_EMPTY = "frontier-empty"
STOP_CAP = "step-cap"


class CoupledField:
    """Lazily revealed marks ``(X, Y, Z)`` for every edge, keyed by edge key.

    Marks are pure functions of ``(seed, run, edge)``; the caches record which
    marks have been looked at, so the ``Y``/``Z`` checked flags are exact.
    """

    def __init__(self, p: float, eps: float, eps1: float, seed: int, run: int = 0):
        self.p = check_probability(p)
        self.eps = check_probability(eps, "eps")
        self.eps1 = check_probability(eps1, "eps1")
        key = trial_key(check_seed(seed), check_int(run, "run", minimum=0))
        self._keys = (stream_key(key, _SALT_X), stream_key(key, _SALT_Y), stream_key(key, _SALT_Z))
        self._x: Dict[bytes, bool] = {}
        self._y: Dict[bytes, bool] = {}
        self._z: Dict[bytes, bool] = {}
        self._hash: Dict[bytes, int] = {}

    def _h(self, ek: bytes) -> int:
        h = self._hash.get(ek)
        if h is None:
            h = self._hash[ek] = edge_hash(ek)
        return h

    def _mark(self, cache, which, prob, ek):
        v = cache.get(ek)
        if v is None:
            v = cache[ek] = uniform(self._h(ek), self._keys[which]) < prob
        return v

    def x(self, ek: bytes) -> bool:
        return self._mark(self._x, 0, self.p, ek)

    def y(self, ek: bytes) -> bool:
        return self._mark(self._y, 1, self.eps, ek)

    def z(self, ek: bytes) -> bool:
        return self._mark(self._z, 2, self.eps1, ek)

    def eps_checked(self, ek: bytes) -> bool:
        return ek in self._y

    def eps1_checked(self, ek: bytes) -> bool:
        return ek in self._z

    def is_open(self, ek: bytes) -> bool:
        """Any mark open; looks at all three marks, so use only for diagnostics."""
        return self.x(ek) or self.y(ek) or self.z(ek)

    @property
    def open_probability(self) -> float:
        return 1.0 - (1.0 - self.p) * (1.0 - self.eps) * (1.0 - self.eps1)


def _edges_of(graph: ImplicitGraph, v: Word):
    """(slot, neighbor, edge key) for every non-loop slot of ``v``."""
    for s, u in enumerate(graph.neighbors(v)):
        if u != v:
            yield s, u, edge_key(graph, v, s, u)


def initial_cluster(graph: ImplicitGraph, v: Word, fld: CoupledField, M: int) -> Tuple[List[Word], bool]:
    """Breadth-first ``X``-cluster of ``v`` in discovery order, cut at ``M`` vertices.

    Returns the vertices and whether the cut was hit.
    """
    M = check_int(M, "M", minimum=1)
    order = [v]
    seen = {v}
    queue = deque([v])
    while queue:
        w = queue.popleft()
        for s, u in enumerate(graph.neighbors(w)):
            if u not in seen and fld.x(edge_key(graph, w, s, u)):
                if len(order) >= M:
                    return order, True
                seen.add(u)
                order.append(u)
                queue.append(u)
    return order, len(order) >= M


def _local_ball(graph: ImplicitGraph, u: Word, r: int) -> Set[Word]:
    seen = {u}
    frontier = [u]
    for _ in range(r):
        nxt = []
        for w in frontier:
            for y in graph.neighbors(w):
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return seen


def _is_nice(graph, A, u, alpha, r_n, templates) -> bool:
    d = graph.degree
    for j in range(1, r_n + 1):
        verts, prob = templates.at(u, j)
        mass = 0.0
        for y, pr in zip(verts, prob):
            if y not in A:
                mass += pr
        if mass / d < alpha:
            return False
    return True


class NiceFrontier:
    """FIFO queue of candidate edges ``(x, slot)`` leaving ``A``.

    Niceness can only be lost as ``A`` grows, so an edge found not nice is
    dropped for good, and the first nice unchecked edge in discovery order is
    exactly the first element of the current nice set in that order.
    """

    def __init__(self, graph: ImplicitGraph, alpha: float, r_n: int, templates: Optional[ExitTemplates] = None):
        self.graph = graph
        self.alpha = check_probability(alpha, "alpha")
        self.r_n = check_int(r_n, "r_n", minimum=1)
        self.templates = templates or ExitTemplates(graph)
        self._queue: deque = deque()

    def add_vertices(self, vertices: Sequence[Word], A) -> None:
        for x in vertices:
            for s, u, ek in _edges_of(self.graph, x):
                if u not in A:
                    self._queue.append((x, s, u, ek))

    def pop(self, A, fld: CoupledField):
        while self._queue:
            x, s, u, ek = self._queue.popleft()
            if u in A or fld.eps_checked(ek):
                continue
            if _is_nice(self.graph, A, u, self.alpha, self.r_n, self.templates):
                return x, s, u, ek
        return None

    def snapshot(self, A, fld: CoupledField) -> List[Tuple[Word, int]]:
        """Current nice unchecked edges in order, without consuming the queue."""
        out = []
        for x, s, u, ek in self._queue:
            if u in A or fld.eps_checked(ek):
                continue
            if _is_nice(self.graph, A, u, self.alpha, self.r_n, self.templates):
                out.append((x, s))
        return out


def nice_frontier(graph: ImplicitGraph, A: Sequence[Word], alpha: float, r_n: int,
                  fld: Optional[CoupledField] = None, templates: Optional[ExitTemplates] = None):
    """Nice, ``eps``-unchecked edges ``(x, slot)`` leaving ``A`` in discovery order of ``x`` then slot."""
    Aset = set(A)
    fr = NiceFrontier(graph, alpha, r_n, templates)
    fr.add_vertices(list(A), Aset)
    return fr.snapshot(Aset, fld or CoupledField(0.0, 0.0, 0.0, 0))


def _x_reach(graph, fld, seeds, ball, A, added):
    """Add everything ``X``-connected to ``seeds`` inside ``ball`` while avoiding ``A``."""
    queue = deque()
    for s in seeds:
        if s not in added:
            added[s] = None
            queue.append(s)
    while queue:
        w = queue.popleft()
        for s, y in enumerate(graph.neighbors(w)):
            if y in ball and y not in A and y not in added and fld.x(edge_key(graph, w, s, y)):
                added[y] = None
                queue.append(y)


def grow_step(graph: ImplicitGraph, A, x: Word, u: Word, fld: CoupledField, r_n: int) -> List[Word]:
    """New vertices ``V_t`` after the edge ``(x, u)`` was found ``eps``-open.

    Case 1 takes the ``X``-cluster of ``u`` inside ``B(u, r_n)`` avoiding ``A``.
    Case 2 takes, for each ``z`` in the ball outside ``A`` with an in-ball edge
    into ``A``, the ``X``-cluster of ``z`` avoiding ``A`` when the first such
    edge in edge-key order is ``eps1``-open. Only that edge's ``Z`` mark is read.
    """
    ball = _local_ball(graph, u, r_n)
    added: Dict[Word, None] = {}
    if u not in A:
        _x_reach(graph, fld, [u], ball, A, added)
    z_seeds = []
    for z in sorted(ball, key=graph.key):
        if z in A:
            continue
        links = sorted(ek for _, y, ek in _edges_of(graph, z) if y in A and y in ball)
        if links and fld.z(links[0]):
            z_seeds.append(z)
    for z in z_seeds:
        _x_reach(graph, fld, [z], ball, A, added)
    return list(added)


@dataclass
class ExplorationTrace:
    sizes: List[int]
    checked_closed: List[int]
    xi: List[int]
    stop_cause: str
    steps: int
    initial_size: int
    lambda1: float
    r_n: int

    @property
    def survived(self) -> bool:
        return self.stop_cause == STOP_SURVIVAL

    @property
    def inconclusive(self) -> bool:
        return self.stop_cause == STOP_CAP

    def rows(self) -> List[dict]:
        out = []
        for t, size in enumerate(self.sizes):
            out.append({
                "t": t,
                "size": size,
                "checked_closed": self.checked_closed[t],
                "xi": self.xi[t] if t < len(self.xi) else "",
                "stop_cause": self.stop_cause if t == len(self.sizes) - 1 else "",
            })
        return out

    def mean_drift(self) -> float:
        return float(np.mean(self.xi)) if self.xi else float("nan")


def tau_threshold(t: int, lambda1: float, d: int) -> float:
    return 2.0 * t / (lambda1 * d)


def run_exploration(graph: ImplicitGraph, v: Word, p: float, eps: float, eps1: float, r_n: int, lambda1: float,
                    M: int, seed: int, run: int = 0, *, max_steps: Optional[int] = None,
                    check_connected: bool = False, templates: Optional[ExitTemplates] = None) -> ExplorationTrace:
    """Run the process until ``|A_t| <= 2t / (lambda1 d)``, ``|A_t| >= M``, or no nice edge is left.

    ``alpha = lambda1 / 2`` is used for niceness. ``max_steps`` (default
    ``10 * M``) ends the run as inconclusive.
    """
    fld = CoupledField(p, eps, eps1, seed, run)
    if fld.open_probability >= 1.0:
        raise ValueError("combined open probability must be < 1")
    r_n = check_int(r_n, "r_n", minimum=1)
    if not 0.0 < lambda1 <= 1.0:
        raise ValueError(f"lambda1 must lie in (0, 1], got {lambda1}")
    M = check_int(M, "M", minimum=1)
    max_steps = 10 * M if max_steps is None else check_int(max_steps, "max_steps", minimum=1)
    d = graph.degree
    A0, cut = initial_cluster(graph, v, fld, M)
    A = dict.fromkeys(A0)
    sizes, closed, xi = [len(A)], [0], []
    trace = lambda cause, t: ExplorationTrace(sizes, closed, xi, cause, t, len(A0), lambda1, r_n)  # noqa: E731
    if cut:
        return trace(STOP_SURVIVAL, 0)
    frontier = NiceFrontier(graph, lambda1 / 2.0, r_n, templates)
    frontier.add_vertices(A0, A)
    n_closed = 0
    for t in range(1, max_steps + 1):
        picked = frontier.pop(A, fld)
        if picked is None:
            return trace(STOP_EMPTY, t - 1)
        x, _, u, ek = picked
        new: List[Word] = []
        if fld.y(ek):
            new = grow_step(graph, A, x, u, fld, r_n)
        else:
            n_closed += 1
        for w in new:
            A[w] = None
        if check_connected and new:
            _assert_open_connected(graph, fld, A, v)
        frontier.add_vertices(new, A)
        xi.append(len(new))
        sizes.append(len(A))
        closed.append(n_closed)
        if len(A) >= M:
            return trace(STOP_SURVIVAL, t)
        if len(A) <= tau_threshold(t, lambda1, d):
            return trace(STOP_TAU, t)
    return trace(STOP_CAP, max_steps)


def _assert_open_connected(graph, fld, A, v):
    """Every vertex of ``A`` is joined to ``v`` by edges of ``A`` with an open mark already revealed."""
    seen = {v}
    queue = deque([v])
    while queue:
        w = queue.popleft()
        for _, y, ek in _edges_of(graph, w):
            if y in A and y not in seen and (fld._x.get(ek) or fld._y.get(ek) or fld._z.get(ek)):
                seen.add(y)
                queue.append(y)
    if len(seen) != len(A):
        raise AssertionError(f"{len(A) - len(seen)} explored vertices are not open-connected to the start")


@dataclass
class SurvivalSummary:
    runs: int
    survived: int
    tau: int
    empty: int
    inconclusive: int
    mean_drift: float

    @property
    def frequency(self) -> float:
        return self.survived / self.runs


def survival_summary(traces: Sequence[ExplorationTrace]) -> SurvivalSummary:
    causes = [t.stop_cause for t in traces]
    drifts = [x for t in traces for x in t.xi]
    return SurvivalSummary(
        len(traces),
        causes.count(STOP_SURVIVAL),
        causes.count(STOP_TAU),
        causes.count(STOP_EMPTY),
        causes.count(STOP_CAP),
        float(np.mean(drifts)) if drifts else float("nan"),
    )


def drift_reference(eps1: float, lambda1: float, delta: float, r_n: int) -> float:
    """``eps1 * lambda1**2 * delta * r_n``: the drift's shape up to unknown constants."""
    return eps1 * lambda1**2 * delta * r_n


@dataclass
class LocalityRow:
    n: int
    r_n: int
    lambda1_hat: float
    lambda1_lower: float
    lambda1_sq_r: float
    pc_n: float
    pc_n_stderr: float
    pc_G: float
    pc_G_stderr: float

    @property
    def gap(self) -> float:
        return abs(self.pc_n - self.pc_G)


@dataclass
class LocalityReport:
    family: str
    rows: List[LocalityRow]
    trend_ok: Optional[bool]
    violations: List[Tuple[int, int]] = field(default_factory=list)
    estimator: dict = field(default_factory=dict)

    def table(self) -> List[dict]:
        return [dict(vars(r), gap=r.gap) for r in self.rows]


def trend_check(rows: Sequence[LocalityRow], n_sigma: float = 2.0):
    """Gaps must not increase by more than ``n_sigma`` combined standard errors between consecutive rows."""
    bad = []
    for a, b in zip(rows, rows[1:]):
        se = math.sqrt(a.pc_n_stderr**2 + b.pc_n_stderr**2 + a.pc_G_stderr**2)
        if b.gap > a.gap + n_sigma * se:
            bad.append((a.n, b.n))
    return not bad, bad


def locality_experiment(base, quotient_of, n_list: Sequence[int], *, radius: int = 10,
                        theta_star: float = DEFAULT_THETA_STAR, trials: int = 20_000, seed: int = None,
                        tmax: int = 20, family: str = "") -> LocalityReport:
    """Compare ``p_hat_c`` of each quotient ``G_n`` against the base graph ``G``.

    ``quotient_of(n)`` builds ``G_n``. All estimates share the estimator
    radius, ``theta_star``, trial count and seed, so they see the same edge
    variates wherever the balls agree.
    """
    n_list = check_increasing(n_list, "n_list")
    seed = check_seed(seed)
    pcG = pc_estimate(base, [radius], theta_star, trials, seed)
    rows = []
    for n in n_list:
        G_n = quotient_of(n)
        r_n = local_radius(G_n, base, radius + 1)
        spec = spectral_estimate(G_n, tmax)
        pcn = pc_estimate(G_n, [radius], theta_star, trials, seed)
        rows.append(LocalityRow(n, r_n, spec.lambda1_hat, spec.lambda1_lower, spec.lambda1_lower**2 * r_n,
                                pcn.estimate, pcn.estimate_stderr, pcG.estimate, pcG.estimate_stderr))
    ok, bad = trend_check(rows) if len(rows) > 1 else (None, [])
    cfg = {"radius": radius, "theta_star": theta_star, "trials": trials, "master_seed": seed, "tmax": tmax}
    return LocalityReport(family, rows, ok, bad, cfg)


def estimate_delta(base: ImplicitGraph, p: float, r_n: int, trials: int, seed: int) -> float:
    """Sphere-reaching probability at radius ``r_n``: an upper approximation of the percolation probability."""
    return reach_prob(base, p, r_n, trials, seed).estimate
