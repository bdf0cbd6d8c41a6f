import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from relabc import EntropyCalibrator, GammaParams, NormalGammaParams, RejectionABC, sufficient_statistic
from relabc.calibrate import calibrate_ellipse_closed
from relabc.exceptions import InvalidParameterError, InvalidStatisticError
from relabc.expansion import re_form_normal
from relabc.models import update


@pytest.fixture
def data():
    return np.random.default_rng(3).normal(0.4, 1.5, size=200)


def test_sufficient_statistic(data):
    stat = sufficient_statistic(data)
    assert stat.n == 200
    assert stat.tau[0] == pytest.approx(sum(data) / 200)
    assert stat.tau[1] == pytest.approx(sum((x - stat.tau[0]) ** 2 for x in data) / 199)
    rate = sufficient_statistic(np.abs(data), "exponential_rate")
    assert rate.tau == pytest.approx((np.abs(data).mean(),))
    with pytest.raises(InvalidStatisticError):
        sufficient_statistic([1.0])
    with pytest.raises(InvalidStatisticError):
        sufficient_statistic(data, "exponential_rate")
    with pytest.raises(InvalidParameterError):
        sufficient_statistic(data, "poisson")
    with pytest.raises(ValueError):
        sufficient_statistic([1.0, np.nan, 2.0])


def test_params_and_clone():
    est = RejectionABC(tol=0.5, n_particles=10, random_state=3)
    params = est.get_params()
    assert params["tol"] == 0.5 and params["n_particles"] == 10 and params["geometry"] == "ellipse"
    twin = clone(est)
    assert twin is not est and twin.get_params() == params
    assert est.set_params(tol=0.1).tol == 0.1


def test_calibrator_matches_functions(data):
    prior = NormalGammaParams(0.0, 1.0, 1.0, 1.0)
    cal = EntropyCalibrator(tol=0.3)
    assert cal.fit(data) is cal
    post = update(prior, sufficient_statistic(data))
    want = calibrate_ellipse_closed(re_form_normal(post, 200), 0.3).epsilon
    np.testing.assert_allclose(cal.epsilon_, want)
    assert cal.region().axes.tolist() == want.tolist()
    ball = EntropyCalibrator(tol=0.3, geometry="ball").fit(data)
    assert ball.epsilon_[0] == ball.epsilon_[1]


def test_not_fitted():
    with pytest.raises(NotFittedError):
        EntropyCalibrator().region()
    with pytest.raises(NotFittedError):
        RejectionABC().estimate()


def test_invalid_settings(data):
    with pytest.raises(InvalidParameterError):
        EntropyCalibrator(geometry="cube").fit(data)
    with pytest.raises(InvalidParameterError):
        EntropyCalibrator(prior=GammaParams(1.0, 1.0)).fit(data)


def test_rejection_abc(data):
    abc = RejectionABC(tol=0.5, n_particles=200, random_state=5).fit(data)
    assert abc.particles_.shape == (200, 2)
    assert abc.R_hat_ == pytest.approx(abc.run_.rejections.mean())
    est = abc.estimate()
    assert est.estimate == pytest.approx(abc.particles_[:, 0].mean())
    again = RejectionABC(tol=0.5, n_particles=200, random_state=5).fit(data)
    np.testing.assert_array_equal(abc.particles_, again.particles_)
    draws = abc.sample(50, random_state=0)
    assert draws.shape == (50, 2)
    assert {tuple(r) for r in draws} <= {tuple(r) for r in abc.particles_}


def test_rate_model():
    x = np.random.default_rng(8).exponential(0.5, size=150)
    abc = RejectionABC(model="exponential_rate", tol=0.5, n_particles=100, random_state=2).fit(x)
    assert abc.particles_.shape == (100, 1)
    assert abc.estimate().estimate == pytest.approx(2.0, rel=0.3)
