import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from morse_maslov.estimators import MorseMaslovIndex, SmallTauExpansion, check_potential
from morse_maslov.exceptions import InputError
from morse_maslov.grid import PotentialField


def test_params_round_trip():
    est = MorseMaslovIndex(n=9, tau=0.2, bc=("robin", 0.3))
    params = est.get_params()
    assert params["n"] == 9 and params["bc"] == ("robin", 0.3)
    est2 = clone(est).set_params(n=11)
    assert est2.n == 11 and est.n == 9


def test_not_fitted():
    with pytest.raises(NotFittedError):
        MorseMaslovIndex().theorem_holds_
    with pytest.raises(NotFittedError):
        SmallTauExpansion().predict(0.1)


def test_dirichlet_fit():
    est = MorseMaslovIndex(n=9, tau=0.15, n_samples=120).fit(-25.0)
    assert est.theorem_holds_
    assert est.morse_index_ == -est.maslov_["crossing-form"]["Sigma2"]
    assert est.loop_total_ == {"crossing-form": 0, "spectral-flow": 0}
    assert est.correction_ is None


def test_robin_fit_with_correction():
    V = PotentialField.polynomial([((0, 0), [[-8.0]]), ((2, 0), [[3.0]])])
    est = MorseMaslovIndex(n=9, tau=0.1, bc=("robin", 0.3), n_samples=120,
                           methods=("crossing-form",)).fit(V)
    assert est.correction_ == 1
    assert est.theorem_holds_


def test_small_tau_expansion_predict():
    V = np.array([[0.5, 0.2], [0.2, -1.0]])
    est = SmallTauExpansion(n=9, bc=("robin", np.diag([0.3, 0.0]))).fit(V)
    assert np.allclose(np.sort(est.slopes_), est.expected_slopes_, atol=1e-8)
    assert est.predict([0.01, 0.02]).shape == (2, 2)
    assert est.morse_report_["pass"]


@pytest.mark.parametrize("bad", [[[1.0, 2.0, 3.0]], "nonsense"])
def test_input_validation(bad):
    with pytest.raises((InputError, ValueError)):
        check_potential(bad, 2)


def test_unknown_bc():
    with pytest.raises(InputError):
        MorseMaslovIndex(bc="periodic").fit(1.0)
