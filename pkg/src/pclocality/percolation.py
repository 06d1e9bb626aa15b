"""Bernoulli bond percolation on explicit balls.

Edge ``e`` is open in trial ``t`` iff ``U(e, t) < p`` where ``U`` is a
counter-based uniform keyed by the edge's hash and the trial key. The same
edge therefore carries the same variate at every ``p`` and inside every ball
that contains it, which makes every estimate here pathwise monotone in ``p``
and nested in the radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import _kernels
from ._validation import check_increasing, check_int, check_probability, check_seed
from .balls import DEFAULT_MAX_VERTICES, Ball, bfs_ball
from .errors import NonBracketingError
from .graphs import ImplicitGraph
from .rng import MASK64, splitmix64, trial_key
from .walks import ratio_report, sphere_classes

EXACT_EDGE_LIMIT = 20
PC_TOLERANCE = 0.002
DEFAULT_THETA_STAR = 0.3
_CHUNK = 256
_SLOPE_STEP = 0.02


def _seed_mix(seed: int) -> np.uint64:
    return np.uint64(splitmix64(check_seed(seed) & MASK64))


@dataclass
class PercSample:
    """One percolation configuration on a ball, reproducible from ``(master_seed, trial)``."""

    ball_id: str
    open_edges: np.ndarray
    p: float
    master_seed: int
    trial: int

    @property
    def n_open(self) -> int:
        return int(self.open_edges.sum())


def ball_id(ball: Ball) -> str:
    import hashlib
    import json

    payload = json.dumps(ball.graph.descriptor(), sort_keys=True).encode() + ball.graph.key(ball.root)
    return f"{hashlib.blake2b(payload, digest_size=6).hexdigest()}-r{ball.radius}"


def sample_percolation(ball: Ball, p: float, seed: int, trial: int = 0) -> PercSample:
    p = check_probability(p)
    trial = check_int(trial, "trial", minimum=0)
    bits = _kernels.open_bits(ball.edge_hashes, p, _seed_mix(seed), trial)
    return PercSample(ball_id(ball), bits, p, int(seed), trial)


def open_uniforms(ball: Ball, seed: int, trial: int) -> np.ndarray:
    """The per-edge variates of one trial, in edge order (reference implementation)."""
    from .rng import uniform

    key = trial_key(check_seed(seed), trial)
    return np.array([uniform(int(h), key) for h in ball.edge_hashes])


@dataclass
class ConnectionEstimate:
    """``b_hat(x)`` for each sphere vertex ``x`` with binomial standard errors."""

    vertices: list
    estimate: np.ndarray
    trials: int
    p: float
    classes: List[str] = field(default_factory=list)

    @property
    def stderr(self) -> np.ndarray:
        b = self.estimate
        return np.sqrt(b * (1.0 - b) / self.trials)


def _targets(ball: Ball) -> np.ndarray:
    return ball.sphere(ball.radius).astype(np.int64)


def connection_prob(ball: Ball, p: float, trials: int, seed: int) -> ConnectionEstimate:
    """Fraction of trials in which the root and each sphere vertex share an open cluster in the ball."""
    p = check_probability(p)
    trials = check_int(trials, "trials", minimum=1)
    tg = _targets(ball)
    counts = _kernels.connection_hits(
        ball.n_vertices, ball.edges[:, :2].copy(), ball.edge_hashes, tg, p, _seed_mix(seed), 0, trials, _CHUNK
    ).sum(axis=0)
    verts = [ball.keys[i] for i in tg]
    return ConnectionEstimate(verts, counts / trials, trials, p, sphere_classes(ball, ball.radius))


def connection_prob_exact(ball: Ball, p: float) -> np.ndarray:
    """Exact connection probabilities for each sphere vertex by enumerating all open sets."""
    p = check_probability(p)
    if ball.n_edges > EXACT_EDGE_LIMIT:
        raise ValueError(f"exact enumeration is limited to {EXACT_EDGE_LIMIT} edges, ball has {ball.n_edges}")
    return _kernels.exact_connection(ball.n_vertices, ball.edges[:, :2].copy(), _targets(ball), p)


@dataclass
class Assumption2Report:
    p: float
    trials: int
    ratio_min: float
    ratio_max: float
    within_bounds: bool
    worst_sigma: float
    zero_vertices: int
    class_mass: Dict[str, tuple]


def assumption2_report(ball: Ball, p: float, trials: int, seed: int, classes: Optional[Sequence[str]] = None,
                       n_sigma: float = 3.0) -> Assumption2Report:
    """Extreme ratios of connection estimates over the sphere, checked against ``[p, 1/p]``.

    A pair counts as inside the bounds when it is within ``n_sigma`` combined
    standard errors of them (delta method on the ratio).
    """
    est = connection_prob(ball, p, trials, seed)
    classes = list(classes) if classes is not None else est.classes
    rep = ratio_report(est.estimate, classes)
    b = est.estimate
    se = est.stderr
    zero = int((b <= 0).sum())
    i_hi, i_lo = int(np.argmax(b)), int(np.argmin(b))
    worst = 0.0
    if b[i_lo] > 0 and p > 0:
        ratio = b[i_hi] / b[i_lo]
        sr = ratio * np.hypot(se[i_hi] / b[i_hi], se[i_lo] / b[i_lo])
        excess = max(ratio - 1.0 / p, p - 1.0 / ratio)
        worst = excess / sr if sr > 0 else (np.inf if excess > 0 else -np.inf)
    else:
        worst = np.inf
    ok = zero == 0 and worst <= n_sigma
    lo = 1.0 / rep.global_ratio if rep.global_ratio else 0.0
    return Assumption2Report(p, est.trials, lo, rep.global_ratio, bool(ok), float(worst), zero, rep.class_mass)


def tree_reach_exact(d: int, p: float, n: int) -> float:
    """Probability that the root of ``T_d`` reaches distance ``n`` through open edges."""
    d = check_int(d, "d", minimum=2)
    p = check_probability(p)
    n = check_int(n, "n", minimum=1)
    q = p
    for _ in range(n - 1):
        q = p * (1.0 - (1.0 - q) ** (d - 1))
    return 1.0 - (1.0 - q) ** d


def _bisect(h, theta: float, tol: float) -> float:
    lo, hi = 0.0, 1.0
    if h(hi) < theta or h(lo) >= theta:
        raise NonBracketingError(f"h(0)={h(lo):.4f}, h(1)={h(hi):.4f} do not bracket {theta}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) >= theta:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _check_theta(theta_star) -> float:
    theta = check_probability(theta_star, "theta_star")
    if not 0.0 < theta < 1.0:
        raise NonBracketingError(f"theta_star={theta} cannot be bracketed strictly inside (0, 1)")
    return theta


def tree_pc_oracle(d: int, n: int, theta_star: float = DEFAULT_THETA_STAR, tol: float = 1e-12) -> float:
    """Solve ``h_n(p) = theta_star`` on ``T_d`` with the exact recursion."""
    theta = _check_theta(theta_star)
    return _bisect(lambda p: tree_reach_exact(d, p, n), theta, tol)


@dataclass
class ReachEstimate:
    p: float
    n: int
    estimate: float
    trials: int

    @property
    def stderr(self) -> float:
        h = self.estimate
        return float(np.sqrt(h * (1.0 - h) / self.trials))


def reach_prob(graph: ImplicitGraph, p: float, n: int, trials: int, seed: int, *, ball: Optional[Ball] = None,
               max_vertices: int = DEFAULT_MAX_VERTICES) -> ReachEstimate:
    """Monte Carlo probability that the root's open cluster inside ``B(root, n)`` reaches its sphere."""
    p = check_probability(p)
    n = check_int(n, "n", minimum=1)
    trials = check_int(trials, "trials", minimum=1)
    if ball is None or ball.radius < n:
        ball = bfs_ball(graph, graph.root, n, max_vertices=max_vertices)
    indptr, nbr, eid = ball.csr
    hits = _kernels.reach_hits(indptr, nbr, eid, ball.level, ball.edge_hashes, n, p, _seed_mix(seed), 0, trials,
                               _CHUNK).sum()
    return ReachEstimate(p, n, hits / trials, trials)


def reach_thresholds(graph: ImplicitGraph, n_list: Sequence[int], trials: int, seed: int, *,
                     ball: Optional[Ball] = None, max_vertices: int = DEFAULT_MAX_VERTICES) -> np.ndarray:
    """``trials x len(n_list)`` array; trial ``t`` reaches radius ``n`` at ``p`` iff the entry is ``< p``."""
    radii = np.asarray(check_increasing(n_list, "n_list"), dtype=np.int64)
    trials = check_int(trials, "trials", minimum=1)
    if ball is None or ball.radius < radii[-1]:
        ball = bfs_ball(graph, graph.root, int(radii[-1]), max_vertices=max_vertices)
    indptr, nbr, eid = ball.csr
    return _kernels.reach_thresholds(indptr, nbr, eid, ball.level, ball.edge_hashes, radii, _seed_mix(seed), 0,
                                     trials)


@dataclass
class PcEstimate:
    """Crossing points ``h_n(p_hat) = theta_star``; the last one is the working estimate.

    This is a finite-size estimator: as ``n`` grows it tends to the ``p`` at
    which the percolation probability equals ``theta_star``, which sits above
    ``p_c``. Comparisons are meaningful between graphs under the same settings.
    """

    n_list: List[int]
    p_hat: List[float]
    stderr: List[float]
    trials: int
    theta_star: float
    master_seed: int
    tolerance: float = PC_TOLERANCE

    @property
    def estimate(self) -> float:
        return self.p_hat[-1]

    @property
    def estimate_stderr(self) -> float:
        return self.stderr[-1]

    def rows(self) -> List[dict]:
        return [
            {"n": n, "p_hat": p, "stderr": s, "trials": self.trials}
            for n, p, s in zip(self.n_list, self.p_hat, self.stderr)
        ]


def _crossing_stderr(thr: np.ndarray, p_hat: float, theta: float) -> float:
    """Delta-method error: binomial error of ``h`` divided by the local slope of ``h``."""
    lo, hi = max(p_hat - _SLOPE_STEP, 0.0), min(p_hat + _SLOPE_STEP, 1.0)
    slope = (np.mean(thr < hi) - np.mean(thr < lo)) / (hi - lo)
    if slope <= 0:
        return float("inf")
    return float(np.sqrt(theta * (1.0 - theta) / len(thr)) / slope)


def pc_estimate(graph: ImplicitGraph, n_list: Sequence[int], theta_star: float = DEFAULT_THETA_STAR,
                trials: int = 20_000, seed: int = None, *, tol: float = PC_TOLERANCE,
                max_vertices: int = DEFAULT_MAX_VERTICES) -> PcEstimate:
    """Bisection on ``p`` for ``h_n(p) = theta_star`` at each ``n`` in ``n_list``.

    All probes reuse the same trials (common random numbers). Each probe's
    Monte Carlo ``h_n(p)`` is read off per-trial reach thresholds, which
    equals a fresh breadth-first estimate at that ``p`` trial for trial.
    """
    theta = _check_theta(theta_star)
    seed = check_seed(seed)
    n_list = check_increasing(n_list, "n_list")
    thr = reach_thresholds(graph, n_list, trials, seed, max_vertices=max_vertices)
    p_hat, se = [], []
    for k, n in enumerate(n_list):
        col = thr[:, k]
        ph = _bisect(lambda p: float(np.mean(col < p)), theta, tol)
        p_hat.append(ph)
        se.append(_crossing_stderr(col, ph, theta))
    return PcEstimate(list(n_list), p_hat, se, int(trials), theta, seed, tol)
