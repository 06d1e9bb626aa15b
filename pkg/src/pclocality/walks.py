"""Exact simple-random-walk quantities on balls.

The walk picks one of the ``degree`` neighbor slots uniformly, so parallel
edges and self-loops of quotient graphs are weighted by multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_int, check_probability
from .balls import DEFAULT_MAX_VERTICES, Ball, bfs_ball
from .errors import SolverError
from .graphs import CosetQuotientGraph, FreeProductGraph, ImplicitGraph
from .words import Word

NORMALIZATION_TOL = 1e-10
FIT_WINDOW = 10


@dataclass
class ExitDistribution:
    """Law of the first vertex the walk from ``center`` hits on the sphere of radius ``radius``."""

    center: Word
    radius: int
    vertices: List[Word]
    prob: np.ndarray

    def as_dict(self) -> Dict[Word, float]:
        return dict(zip(self.vertices, self.prob.tolist()))


def _transition(ball: Ball, rows: np.ndarray, cols_mask=None) -> sp.csr_matrix:
    """Sparse slot-weighted transition matrix restricted to ``rows`` of the ball."""
    d = ball.graph.degree
    nb = ball.nbr[rows]
    r = np.repeat(np.arange(len(rows)), d)
    c = nb.ravel()
    keep = c >= 0
    return sp.csr_matrix(
        (np.full(keep.sum(), 1.0 / d), (r[keep], c[keep])), shape=(len(rows), ball.n_vertices)
    )


def harmonic_measure(ball: Ball) -> ExitDistribution:
    """First-hitting distribution on ``sphere(R)`` for the walk started at the ball's root.

    Solves ``(I - Q)^T g = e_root`` for the Green function ``g`` of the
    transient part (levels below ``R``), then pushes it one step into the
    sphere.
    """
    R = ball.radius
    if R < 1:
        raise ValueError("harmonic measure needs radius >= 1")
    transient = np.flatnonzero(ball.level < R)
    sphere = ball.sphere(R)
    # BFS order puts every transient vertex before the sphere.
    nt = len(transient)
    P = _transition(ball, transient)
    Q = P[:, :nt]
    S = P[:, nt:]
    A = (sp.identity(nt, format="csc") - Q.T.tocsc()).tocsc()
    e = np.zeros(nt)
    e[0] = 1.0
    g = spla.spsolve(A, e)
    residual = float(np.abs(A @ g - e).max())
    if not np.isfinite(residual) or residual > 1e-10:
        raise SolverError(f"exit-distribution solve residual {residual:.3e}")
    prob = np.asarray(S.T @ g).ravel()
    total = prob.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise SolverError(f"exit distribution sums to {total!r}")
    return ExitDistribution(ball.root, R, [ball.keys[i] for i in sphere], prob)


@dataclass
class RatioReport:
    """Extreme ratios ``mu(x)/mu(y)`` over a sphere, overall and by class pair."""

    global_ratio: float
    within_class: Dict[str, float]
    class_pairs: Dict[Tuple[str, str], float]
    class_mass: Dict[str, Tuple[float, float]]
    zero_mass: bool = False

    @property
    def within_class_max(self) -> float:
        return max(self.within_class.values()) if self.within_class else 1.0


def _ratio(num, den):
    if den == 0:
        return float("inf") if num > 0 else 1.0
    return num / den


def ratio_report(values: Sequence[float], classes: Sequence[str]) -> RatioReport:
    """Accepts any per-vertex positive quantity: exit probabilities or connection estimates."""
    if isinstance(values, ExitDistribution):
        values = values.prob
    values = np.asarray(values, dtype=float)
    if len(values) != len(classes):
        raise ValueError("one class label per sphere vertex is required")
    if len(values) == 0:
        raise ValueError("empty sphere")
    lo, hi = values.min(), values.max()
    by_class: Dict[str, Tuple[float, float]] = {}
    for c in sorted(set(classes)):
        v = values[np.asarray(classes) == c]
        by_class[c] = (float(v.min()), float(v.max()))
    within = {c: _ratio(mx, mn) for c, (mn, mx) in by_class.items()}
    pairs = {}
    for c1, (_, mx1) in by_class.items():
        for c2, (mn2, _) in by_class.items():
            pairs[(c1, c2)] = _ratio(mx1, mn2)
    return RatioReport(_ratio(hi, lo), within, pairs, by_class, zero_mass=bool(lo <= 0))


def sphere_classes(ball: Ball, j: int) -> List[str]:
    return [ball.graph.sphere_class(ball.keys[i]) for i in ball.sphere(j)]


def _walk_distributions(ball: Ball, steps: int) -> Iterable[np.ndarray]:
    """Yield the distribution after 0..steps steps from the root, truncated to the ball."""
    P = _transition(ball, np.arange(ball.n_vertices)).T.tocsr()
    x = np.zeros(ball.n_vertices)
    x[0] = 1.0
    yield x
    for _ in range(steps):
        x = P @ x
        yield x


def return_probabilities(graph: ImplicitGraph, tmax: int, *, max_vertices: int = DEFAULT_MAX_VERTICES) -> np.ndarray:
    """``p^t(o, o)`` for ``t = 0..tmax``.

    Uses ``B(o, tmax // 2)``: mass that leaves it cannot come back to the root
    within ``tmax`` steps, so truncation is exact.
    """
    tmax = check_int(tmax, "t", minimum=0)
    ball = bfs_ball(graph, graph.root, tmax // 2, max_vertices=max_vertices)
    return np.array([x[0] for x in _walk_distributions(ball, tmax)])


def return_probability(graph: ImplicitGraph, t: int, **kw) -> float:
    return float(return_probabilities(graph, t, **kw)[-1])


@dataclass
class SpectralEstimate:
    """Spectral radius bounds and estimates from the walk at the root.

    ``rho_hat = p^{tmax}(o,o)^{1/tmax}`` is a certified lower bound on
    ``rho``, so ``lambda1_hat = 1 - rho_hat`` bounds ``lambda_1`` from above.
    ``rho_fit`` fits ``log p^{2t} = c + 2t log rho - gamma log(2t)`` over the
    last ``FIT_WINDOW`` even times. ``rho_upper`` is the pessimistic end of the
    band: a Schur-test bound when ``upper_certified``, else the fit inflated by
    its own standard error and window sensitivity.
    """

    graph: str
    t: np.ndarray
    roots: np.ndarray
    rho_hat: float
    rho_fit: float
    rho_upper: float
    upper_certified: bool
    returns: np.ndarray = field(repr=False)

    @property
    def lambda1_hat(self) -> float:
        return 1.0 - self.rho_hat

    @property
    def lambda1_lower(self) -> float:
        return max(0.0, 1.0 - self.rho_upper)

    @property
    def lambda1_fit(self) -> float:
        return 1.0 - self.rho_fit

    @property
    def band(self) -> Tuple[float, float]:
        return self.rho_hat, self.rho_upper


def _fit_log_rho(t2: np.ndarray, logp: np.ndarray):
    X = np.column_stack([np.ones_like(t2), t2, np.log(t2)])
    coef, *_ = np.linalg.lstsq(X, logp, rcond=None)
    resid = logp - X @ coef
    dof = max(len(t2) - X.shape[1], 1)
    cov = float(resid @ resid) / dof * np.linalg.pinv(X.T @ X)
    return float(coef[1]), float(np.sqrt(max(cov[1, 1], 0.0)))


def _class_patterns(ball: Ball):
    """Per-class multiset of (neighbor class, level change), or None if a class is inconsistent."""
    g = ball.graph
    cls = [g.sphere_class(v) for v in ball.keys]
    patterns: Dict[str, tuple] = {}
    for i in np.flatnonzero((ball.level >= 2) & (ball.level < ball.radius)):
        lev = ball.level[i]
        pat = tuple(sorted((cls[j], int(ball.level[j] - lev)) for j in ball.nbr[i]))
        if patterns.setdefault(cls[i], pat) != pat:
            return None, cls
    return patterns, cls


def schur_rho_upper(graph: ImplicitGraph, radius: int = 6, *, max_vertices: int = DEFAULT_MAX_VERTICES):
    """Upper bound on the spectral radius from the Schur test.

    With ``f(x) = s**|x| * w[class(x)]`` and ``f(root) = w0``, the symmetric
    walk operator satisfies ``||P|| <= sup_x (Pf)(x) / f(x)``. Beyond level 1
    the ratio depends only on the class pattern, so the supremum is attained
    inside the ball. ``w`` is the Perron vector of the class matrix at ``s``;
    ``s`` and ``w0`` are optimised numerically. Returns ``(bound, certified)``
    where ``certified`` records that every class had one neighbor pattern.
    """
    from scipy.optimize import minimize_scalar

    ball = bfs_ball(graph, graph.root, radius, max_vertices=max_vertices)
    patterns, cls = _class_patterns(ball)
    if not patterns:
        return 1.0, False
    names = sorted(patterns)
    pos = {c: k for k, c in enumerate(names)}
    if any(c not in pos for c in cls[1:]):
        return 1.0, False
    d = graph.degree
    inner = np.flatnonzero(ball.level < ball.radius)
    nbr = ball.nbr[inner]
    level = ball.level.astype(float)
    cidx = np.array([pos.get(c, -1) for c in cls])

    def perron(s):
        M = np.zeros((len(names), len(names)))
        for c, pat in patterns.items():
            for c2, delta in pat:
                if c2 in pos:
                    M[pos[c], pos[c2]] += s**delta / d
        vals, vecs = np.linalg.eig(M)
        k = int(np.argmax(vals.real))
        v = np.abs(vecs[:, k].real)
        return float(vals[k].real), v / v.max()

    def sup_ratio(s, log_w0):
        _, w = perron(s)
        if np.any(w <= 0):
            return np.inf
        f = s**level * np.where(cidx >= 0, w[np.maximum(cidx, 0)], 1.0)
        f[0] = np.exp(log_w0)
        return float(((f[nbr].sum(axis=1) / d) / f[inner]).max())

    def best_over_w0(s):
        res = minimize_scalar(lambda lw: sup_ratio(s, lw), bounds=(-8.0, 8.0), method="bounded",
                              options={"xatol": 1e-10})
        return res.fun

    grid = np.linspace(0.05, 1.0, 96)
    vals = [best_over_w0(s) for s in grid]
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(best_over_w0, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    bound = min(res.fun, vals[k], 1.0)
    return float(bound), True


def _cover_graph(graph: ImplicitGraph) -> ImplicitGraph:
    """The graph whose certified bound applies: quotients share the cover's spectral radius."""
    from .graphs import ModifiedGrandparentGraph

    if isinstance(graph, CosetQuotientGraph):
        return graph.base
    if isinstance(graph, ModifiedGrandparentGraph) and isinstance(graph.base, CosetQuotientGraph):
        return ModifiedGrandparentGraph(graph.base.base)
    return graph


def spectral_estimate(graph: ImplicitGraph, tmax: int = 24, *, schur_radius: int = 6,
                      max_vertices: int = DEFAULT_MAX_VERTICES) -> SpectralEstimate:
    tmax = check_int(tmax, "tmax", minimum=2)
    if tmax % 2:
        raise ValueError("tmax must be even")
    returns = return_probabilities(graph, tmax, max_vertices=max_vertices)
    t2 = np.arange(2, tmax + 1, 2)
    p2 = returns[t2]
    if np.any(p2 <= 0):
        raise ValueError("zero even-time return probability")
    roots = p2 ** (1.0 / t2)
    rho_hat = float(roots.max())
    window = slice(max(0, len(t2) - FIT_WINDOW), len(t2))
    tw, lw = t2[window].astype(float), np.log(p2[window])
    if len(tw) >= 4:
        slope, se = _fit_log_rho(tw, lw)
        half = slice(len(tw) // 2, len(tw))
        slope_half, _ = _fit_log_rho(tw[half], lw[half]) if len(tw[half]) >= 4 else (slope, 0.0)
        rho_fit = float(np.exp(slope))
        fit_upper = float(np.exp(max(slope, slope_half) + 2.0 * se + abs(slope - slope_half)))
    else:
        rho_fit = fit_upper = rho_hat
    rho_fit = min(max(rho_fit, rho_hat), 1.0)
    schur, certified = schur_rho_upper(_cover_graph(graph), schur_radius, max_vertices=max_vertices)
    rho_upper = schur if certified else min(max(fit_upper, rho_fit), 1.0)
    rho_upper = max(rho_upper, rho_hat)
    name = graph.descriptor().get("family", type(graph).__name__)
    return SpectralEstimate(name, t2, roots, rho_hat, rho_fit, rho_upper, certified, returns)


def quotient_identity_check(base: FreeProductGraph, quot: CosetQuotientGraph, j: int) -> float:
    """``|p_quot^j(o,o) - sum_k p_base^j(o, R**k)|`` with ``R = r**n``.

    Only ``k`` with ``|R**k| <= j`` can contribute; the rest are zero.
    """
    j = check_int(j, "j", minimum=0)
    if quot.base.group != base.group:
        raise ValueError("quotient was not built over this base graph")
    lhs = return_probability(quot, j)
    ball = bfs_ball(base, base.root, j)
    *_, dist = _walk_distributions(ball, j)
    group = base.group
    R = quot.relator
    rhs = dist[0]
    k = 1
    while True:
        terms = [group.power(R, k), group.power(R, -k)]
        if all(len(w) > j for w in terms):
            break
        for w in terms:
            i = ball.index.get(w)
            if i is not None:
                rhs += dist[i]
        k += 1
    return abs(lhs - rhs)


class ExitTemplates:
    """Exit distributions at the root, computed once per radius and transported to other centers."""

    def __init__(self, graph: ImplicitGraph, *, max_vertices: int = DEFAULT_MAX_VERTICES):
        self.graph = graph
        self.max_vertices = max_vertices
        self._cache: Dict[int, ExitDistribution] = {}

    def template(self, j: int) -> ExitDistribution:
        if j not in self._cache:
            ball = bfs_ball(self.graph, self.graph.root, j, max_vertices=self.max_vertices)
            self._cache[j] = harmonic_measure(ball)
        return self._cache[j]

    def at(self, u: Word, j: int) -> Tuple[List[Word], np.ndarray]:
        t = self.template(j)
        tr = self.graph.translate
        return [tr(u, y) for y in t.vertices], t.prob


def nice_beta(graph: ImplicitGraph, A, x: Word, u: Word, j: int, templates: ExitTemplates | None = None) -> float:
    """``P[X_1 = u, X_{tau_j} not in A | X_0 = x]`` for one neighbor slot of ``x``.

    ``tau_j`` is the first hitting time of the sphere of radius ``j`` around ``X_1``.
    """
    if x not in A:
        raise ValueError("x must belong to A")
    if u not in graph.neighbors(x):
        raise ValueError("u must be a neighbor of x")
    check_int(j, "j", minimum=1)
    templates = templates or ExitTemplates(graph)
    verts, prob = templates.at(u, j)
    outside = sum(pr for y, pr in zip(verts, prob) if y not in A)
    return float(outside) / graph.degree


def nice_edges(graph: ImplicitGraph, A, alpha: float, nmax: int, templates: ExitTemplates | None = None) -> List[Tuple[Word, int]]:
    """Directed edges ``(x, slot)`` with ``x`` in ``A`` whose beta is at least ``alpha`` for every ``j <= nmax``."""
    alpha = check_probability(alpha, "alpha")
    nmax = check_int(nmax, "nmax", minimum=1)
    A = A if isinstance(A, (set, frozenset, dict)) else set(A)
    if not A:
        raise ValueError("A must be nonempty")
    templates = templates or ExitTemplates(graph)
    out = []
    for x in A:
        for slot, u in enumerate(graph.neighbors(x)):
            if all(_beta(graph, A, u, j, templates) >= alpha for j in range(1, nmax + 1)):
                out.append((x, slot))
    return out


def _beta(graph, A, u, j, templates) -> float:
    verts, prob = templates.at(u, j)
    return float(sum(pr for y, pr in zip(verts, prob) if y not in A)) / graph.degree


def nice_edge_count(graph: ImplicitGraph, A, alpha: float, nmax: int, templates: ExitTemplates | None = None) -> int:
    return len(nice_edges(graph, A, alpha, nmax, templates))
