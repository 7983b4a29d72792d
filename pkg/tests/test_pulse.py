import numpy as np
import pytest

from dnainverse import PulseModel, branch_inverse, psi_derivative, psi_eval

MODEL = PulseModel()


def test_zero_before_experiment():
    assert psi_eval(MODEL, -3.0) == 0.0
    assert psi_eval(MODEL, 0.0) == 0.0


def test_peak_at_split_point():
    assert psi_eval(MODEL, MODEL.tau0) == pytest.approx(MODEL.psi_max, abs=1e-12)


def test_decay_approaches_residual():
    t = MODEL.tau0 + 50.0 / MODEL.decay_rate
    assert psi_eval(MODEL, t) == pytest.approx(MODEL.residual, abs=1e-6)


def test_continuity_at_branch_junction():
    eps = 1e-9
    left = psi_eval(MODEL, MODEL.tau0 - eps)
    right = psi_eval(MODEL, MODEL.tau0 + eps)
    assert abs(left - right) < 1e-8


def test_derivative_zero_on_negatives_and_at_peak():
    assert psi_derivative(MODEL, -1.0) == 0.0
    assert psi_derivative(MODEL, MODEL.tau0) == 0.0


def test_derivative_matches_central_difference():
    h = 1e-6
    for t in (MODEL.tau0 / 2, 0.3, 1.7, 3.0, 8.0):
        fd = (psi_eval(MODEL, t + h) - psi_eval(MODEL, t - h)) / (2 * h)
        an = psi_derivative(MODEL, t)
        assert abs(an - fd) <= 1e-5 * (1 + abs(an))


def test_derivative_signs():
    ts = np.linspace(0.05, MODEL.tau0 - 0.05, 50)
    assert np.all(psi_derivative(MODEL, ts) > 0)
    ts = np.linspace(MODEL.tau0 + 0.05, 20, 50)
    assert np.all(psi_derivative(MODEL, ts) < 0)


def test_branch_inverse_examples():
    assert branch_inverse(MODEL, 0, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert branch_inverse(MODEL, 1, MODEL.psi_max) == pytest.approx(MODEL.tau0, abs=1e-12)
    assert branch_inverse(MODEL, 1, MODEL.residual / 2) is None
    assert branch_inverse(MODEL, 0, MODEL.psi_max * 1.5) is None


def test_round_trip_branch_0():
    for t in np.linspace(0.0, MODEL.tau0, 101):
        b = psi_eval(MODEL, t) if t > 0 else 0.0
        assert branch_inverse(MODEL, 0, b) == pytest.approx(t, abs=1e-10)


def test_round_trip_branch_1():
    for t in np.linspace(MODEL.tau0, MODEL.tau0 + 30, 101):
        b = psi_eval(MODEL, t)
        assert branch_inverse(MODEL, 1, b) == pytest.approx(t, abs=1e-8)


def test_preimage_cardinality():
    rng = np.random.default_rng(0)
    bs = rng.uniform(0.0, MODEL.psi_max, size=1000)
    for b in bs:
        inv = [branch_inverse(MODEL, k, b) for k in (0, 1)]
        count = sum(x is not None for x in inv)
        assert count <= 2
        expected_two = MODEL.residual < b <= MODEL.psi_max
        assert (count == 2) == expected_two


def test_shape_concave_rise_convex_decay():
    ts = np.linspace(1e-4, MODEL.tau0, 1000)
    d2 = np.diff(psi_eval(MODEL, ts), 2)
    assert np.all(d2 <= 1e-12)
    ts = np.linspace(MODEL.tau0, MODEL.tau0 + 25, 1000)
    d2 = np.diff(psi_eval(MODEL, ts), 2)
    assert np.all(d2 >= -1e-12)


def test_branch_inverse_monotonicity():
    bs = np.linspace(1e-4, MODEL.psi_max, 300)
    inv0 = [branch_inverse(MODEL, 0, b) for b in bs]
    assert np.all(np.diff(inv0) > 0)
    bs = np.linspace(MODEL.residual + 1e-4, MODEL.psi_max, 300)
    inv1 = [branch_inverse(MODEL, 1, b) for b in bs]
    assert np.all(np.diff(inv1) < 0)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        PulseModel(tau0=-1.0)
    with pytest.raises(ValueError):
        PulseModel(residual=2.0)
    with pytest.raises(ValueError):
        PulseModel(rise_rate=0.0)
