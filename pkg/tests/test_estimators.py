import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from graphschrod import Potential, make_chain, make_path
from graphschrod.estimators import SchrodingerResolvent


def test_p2_resolvent_rows():
    est = SchrodingerResolvent(make_path(2), alpha=1.0).fit()
    np.testing.assert_allclose(est.transform([[1.0, 0.0], [0.0, 1.0]]), [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], rtol=1e-14)


def test_default_alpha_and_round_trip():
    V = Potential(lambda n: -3.0 * n)
    est = SchrodingerResolvent(make_chain(), V, vertices=range(8))
    X = np.random.default_rng(0).standard_normal((5, 8))
    Y = est.fit_transform(X)
    assert est.alpha_ == pytest.approx(1.0 - est.lambda0_)
    np.testing.assert_allclose(est.inverse_transform(Y), X, atol=1e-10)


def test_params_and_clone():
    est = SchrodingerResolvent(make_path(3), alpha=2.0, tol=1e-9)
    params = est.get_params()
    assert params["alpha"] == 2.0 and params["tol"] == 1e-9
    assert clone(est).get_params()["alpha"] == 2.0


def test_unfitted_and_shape_errors():
    est = SchrodingerResolvent(make_path(3))
    with pytest.raises(NotFittedError):
        est.transform(np.ones((1, 3)))
    est.fit()
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 4)))
    with pytest.raises(ValueError):
        est.transform([[np.nan, 0.0, 0.0]])
