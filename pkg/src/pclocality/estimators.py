"""scikit-learn style wrappers around the functional API.

The "data" passed to ``fit`` is a graph, not a feature matrix; the wrappers
exist so that estimator settings can be cloned, compared with
``get_params`` and swept like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_graph, check_increasing, check_int, check_probability, check_seed
from .percolation import DEFAULT_THETA_STAR, PC_TOLERANCE, _bisect, _check_theta, _crossing_stderr, reach_thresholds
from .walks import spectral_estimate


class CriticalProbabilityEstimator(BaseEstimator):
    """Finite-size crossing estimate of the critical retention probability.

    Parameters
    ----------
    n_list : sequence of int
        Increasing radii at which ``h_n(p) = theta_star`` is solved.
    theta_star : float
        Crossing level in (0, 1).
    trials : int
        Monte Carlo trials shared by every probe.
    master_seed : int
        Seed of the counter-based edge variates.
    tol : float
        Bisection tolerance on ``p``.

    Attributes
    ----------
    p_hat_ : ndarray
        Crossing point per radius; ``p_hat_[-1]`` is the working estimate.
    stderr_ : ndarray
        Delta-method standard errors.
    thresholds_ : ndarray of shape (trials, len(n_list))
        Per-trial reach thresholds; trial ``t`` reaches radius ``n`` at ``p`` iff below ``p``.
    """

    def __init__(self, n_list=(4, 8), theta_star=DEFAULT_THETA_STAR, trials=20_000, master_seed=0,
                 tol=PC_TOLERANCE):
        self.n_list = n_list
        self.theta_star = theta_star
        self.trials = trials
        self.master_seed = master_seed
        self.tol = tol

    def fit(self, graph, y=None):
        check_graph(graph)
        n_list = check_increasing(self.n_list, "n_list")
        theta = _check_theta(self.theta_star)
        trials = check_int(self.trials, "trials", minimum=1)
        seed = check_seed(self.master_seed)
        thr = reach_thresholds(graph, n_list, trials, seed)
        self.thresholds_ = thr
        self.n_list_ = np.asarray(n_list)
        self.p_hat_ = np.array([_bisect(lambda p, c=thr[:, k]: float(np.mean(c < p)), theta, self.tol)
                                for k in range(len(n_list))])
        self.stderr_ = np.array([_crossing_stderr(thr[:, k], ph, theta) for k, ph in enumerate(self.p_hat_)])
        return self

    @property
    def estimate_(self) -> float:
        check_is_fitted(self, "p_hat_")
        return float(self.p_hat_[-1])

    def predict(self, p):
        """Reach probabilities ``h_n(p)`` at the largest radius for each ``p``."""
        check_is_fitted(self, "thresholds_")
        ps = np.atleast_1d(np.asarray(p, dtype=float))
        for v in ps:
            check_probability(float(v))
        col = np.sort(self.thresholds_[:, -1])
        return np.searchsorted(col, ps, side="left") / len(col)


class SpectralRadiusEstimator(BaseEstimator):
    """Spectral radius bounds from exact return probabilities.

    Parameters
    ----------
    tmax : int
        Largest even walk length.
    schur_radius : int
        Radius of the ball used for the certified upper bound.

    Attributes
    ----------
    rho_hat_, rho_fit_, rho_upper_ : float
        Certified lower bound, fitted value and pessimistic upper end.
    lambda1_lower_ : float
        ``1 - rho_upper_``.
    """

    def __init__(self, tmax=20, schur_radius=6):
        self.tmax = tmax
        self.schur_radius = schur_radius

    def fit(self, graph, y=None):
        check_graph(graph)
        est = spectral_estimate(graph, check_int(self.tmax, "tmax", minimum=2),
                                schur_radius=check_int(self.schur_radius, "schur_radius", minimum=3))
        self.result_ = est
        self.rho_hat_ = est.rho_hat
        self.rho_fit_ = est.rho_fit
        self.rho_upper_ = est.rho_upper
        self.lambda1_lower_ = est.lambda1_lower
        self.upper_certified_ = est.upper_certified
        return self

    def transform(self, graph=None):
        """The per-time sequence ``p^{2t}(o,o)^{1/(2t)}``."""
        check_is_fitted(self, "result_")
        return np.column_stack([self.result_.t, self.result_.roots])
