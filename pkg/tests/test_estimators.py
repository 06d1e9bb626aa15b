import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pclocality.estimators import CriticalProbabilityEstimator, SpectralRadiusEstimator
from pclocality.graphs import tree
from pclocality.percolation import pc_estimate


def test_params_and_clone():
    est = CriticalProbabilityEstimator(n_list=(3, 5), trials=500, master_seed=3)
    assert est.get_params()["n_list"] == (3, 5)
    twin = clone(est).set_params(trials=700)
    assert twin.trials == 700 and est.trials == 500


def test_critical_matches_functional_api():
    g = tree(3)
    est = CriticalProbabilityEstimator(n_list=(3, 6), theta_star=0.3, trials=4_000, master_seed=5).fit(g)
    ref = pc_estimate(g, [3, 6], 0.3, 4_000, 5)
    assert np.allclose(est.p_hat_, ref.p_hat) and est.estimate_ == ref.estimate
    h = est.predict([0.0, est.estimate_, 1.0])
    assert h[0] == 0.0 and h[-1] == 1.0 and abs(h[1] - 0.3) < 0.01
    assert np.all(np.diff(est.predict(np.linspace(0, 1, 21))) >= 0)


def test_unfitted_and_invalid():
    with pytest.raises(NotFittedError):
        CriticalProbabilityEstimator().predict(0.5)
    with pytest.raises(ValueError):
        CriticalProbabilityEstimator(n_list=(5, 3), master_seed=1).fit(tree(3))


def test_spectral_estimator_tree():
    est = SpectralRadiusEstimator(tmax=12).fit(tree(3))
    exact = 2 * np.sqrt(2) / 3
    assert est.upper_certified_ and abs(est.rho_upper_ - exact) < 1e-6
    assert est.rho_hat_ <= exact + 1e-12
    assert est.transform().shape == (6, 2)
