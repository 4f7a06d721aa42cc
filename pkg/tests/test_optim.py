import numpy as np
import pytest

from beamlearn.errors import ConfigurationError
from beamlearn.optim import OGD, Adam, make_optimizer


def test_ogd_first_step():
    opt = OGD(step_scale=1.0)
    assert opt.update(np.zeros(2), np.array([1.0, -2.0])).tolist() == [-1.0, 2.0]


def test_ogd_step_decays_with_sqrt_t():
    opt = OGD(step_scale=2.0)
    theta = np.zeros(1)
    for _ in range(3):
        theta = opt.update(theta, np.ones(1))
    assert theta[0] == pytest.approx(-2.0 * (1 + 1 / np.sqrt(2) + 1 / np.sqrt(3)))


@pytest.mark.parametrize("opt", [OGD(), Adam()])
def test_zero_gradient_keeps_params(opt):
    theta = np.array([0.5, -1.5, 2.0])
    for _ in range(5):
        theta2 = opt.update(theta, np.zeros(3))
        assert np.array_equal(theta2, theta)


def test_adam_two_steps_by_hand():
    g = np.array([0.5, -2.0])
    opt = Adam(step=0.1)
    theta = np.zeros(2)
    m = v = np.zeros(2)
    want = np.zeros(2)
    for t in (1, 2):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        want = want - 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        theta = opt.update(theta, g)
    assert np.allclose(theta, want, rtol=0, atol=1e-15)
    # a constant gradient moves each coordinate by about one step per update
    assert np.allclose(theta, -0.2 * np.sign(g), atol=1e-6)


@pytest.mark.parametrize("opt", [OGD(), Adam()])
def test_non_finite_gradient_is_skipped_and_logged(opt):
    theta = np.ones(2)
    out = opt.update(theta, np.array([np.nan, 1.0]))
    assert np.array_equal(out, theta)
    assert len(opt.skipped) == 1 and opt.skipped[0].round == 1
    out = opt.update(theta, np.array([1.0, 1.0]))
    assert not np.array_equal(out, theta)


def test_shape_mismatch_and_bad_hyperparameters():
    with pytest.raises(ConfigurationError):
        OGD().update(np.zeros(2), np.zeros(3))
    with pytest.raises(ConfigurationError):
        OGD(step_scale=0)
    with pytest.raises(ConfigurationError):
        Adam(beta1=1.0)
    with pytest.raises(ConfigurationError):
        make_optimizer("sgd")
    assert isinstance(make_optimizer("ADAM", step=0.5), Adam)
