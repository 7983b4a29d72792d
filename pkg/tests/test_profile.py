import numpy as np
import pytest

from dnainverse import (
    Breakpoints,
    TimingProfile,
    breakpoints,
    membership,
    project_piecewise_linear_refit,
    second_difference,
)
from dnainverse.profile import RefitError

from oracles import ols_line


def pw_linear(n, knots, slopes, start=0.0):
    """Build a profile from explicit knots (0-based, incl. borders) and slopes."""
    v = np.empty(n)
    v[0] = start
    for (a, b), s in zip(zip(knots[:-1], knots[1:]), slopes):
        v[a + 1 : b + 1] = v[a] + s * np.arange(1, b - a + 1)
    return v


def test_second_difference_examples():
    assert np.allclose(second_difference(TimingProfile([1, 2, 3, 4, 5])), [0, 0, 0])
    assert np.allclose(second_difference(TimingProfile([0, 0, 1, 2])), [1, 0])
    assert np.allclose(second_difference(TimingProfile(np.full(7, 3.3))), np.zeros(5))


def test_second_difference_rejects_short():
    with pytest.raises(ValueError):
        TimingProfile([1.0, 2.0])


def test_breakpoints_linear_profile():
    tau = TimingProfile(0.5 + 0.25 * np.arange(20))
    bp = breakpoints(tau, tol=0.0)
    assert bp.count == 0
    assert list(bp.indices) == [0, 19]


def test_breakpoints_single_slope_change():
    n, k = 30, 12
    v = pw_linear(n, [0, k, n - 1], [1.0, 2.0])
    bp = breakpoints(TimingProfile(v), tol=0.0)
    # brute force: the second difference at the knot is the slope change
    d2 = v[k - 1] - 2 * v[k] + v[k + 1]
    assert d2 == pytest.approx(1.0)
    assert list(bp.indices) == [0, k, n - 1]
    assert bp.count == 1


def test_breakpoints_noise_below_tol():
    rng = np.random.default_rng(3)
    v = pw_linear(40, [0, 17, 39], [0.5, -0.25])
    noisy = v + rng.uniform(-1e-12, 1e-12, size=v.size)
    assert list(breakpoints(TimingProfile(noisy), tol=1e-9).indices) == [0, 17, 39]


def test_breakpoint_recovery_on_random_profiles():
    # Collinearity characterization: constructed knots are exactly recovered.
    rng = np.random.default_rng(7)
    for _ in range(500):
        n = int(rng.integers(12, 80))
        p = int(rng.integers(0, 4))
        interior = np.sort(rng.choice(np.arange(2, n - 2), size=p, replace=False))
        if interior.size:
            interior = interior[np.concatenate(([True], np.diff(interior) >= 2))]
        knots = np.concatenate(([0], interior, [n - 1]))
        slopes = rng.uniform(0.2, 1.5, size=knots.size - 1) * rng.choice([-1, 1], knots.size - 1)
        for j in range(1, slopes.size):  # keep every knot real
            if abs(slopes[j] - slopes[j - 1]) < 0.05:
                slopes[j] += 0.1
        v = pw_linear(n, knots, slopes, start=float(rng.normal()))
        bp = breakpoints(TimingProfile(v), tol=1e-9 * max(1.0, np.max(np.abs(v))))
        assert list(bp.indices) == list(knots)


def test_breakpoints_do_not_depend_on_grid():
    v = pw_linear(50, [0, 20, 49], [1.0, -0.5])
    a = breakpoints(TimingProfile(v, dx=0.1)).indices
    b = breakpoints(TimingProfile(v, dx=7.3)).indices
    assert np.array_equal(a, b)


def test_zero_norm_consistency():
    v = pw_linear(60, [0, 15, 40, 59], [0.3, -0.2, 0.9])
    tau = TimingProfile(v)
    tol = 1e-9
    bp = breakpoints(tau, tol)
    assert bp.count == int(np.count_nonzero(np.abs(second_difference(tau)) > tol))


def test_membership_examples():
    lin = TimingProfile(np.linspace(0.5, 3.0, 20))
    m = membership(lin, C=0)
    assert m == (True, True, True)

    const = TimingProfile(np.full(20, 2.0))
    m = membership(const, C=0)
    assert m.in_PC and not m.in_PC_neq

    v = pw_linear(40, [0, 5, 10, 39], [1.0, -1.0, 0.5], start=50.0)
    m = membership(TimingProfile(v), C=2)
    assert m.in_PC and m.in_PC_neq and not m.in_PC_geq


def test_membership_monotone_in_C():
    v = pw_linear(60, [0, 20, 40, 59], [0.3, -0.2, 0.9], start=1.0)
    tau = TimingProfile(v)
    for C in range(5):
        if membership(tau, C).in_PC:
            assert membership(tau, C + 1).in_PC


def test_refit_interpolates_exact_piecewise_linear():
    n = 50
    v = pw_linear(n, [0, 20, 49], [0.4, -0.3], start=2.0)
    tau = TimingProfile(v)
    bp = breakpoints(tau, tol=1e-9)
    out = project_piecewise_linear_refit(tau, bp, np.ones(n), v)
    assert np.max(np.abs(out.values - v)) < 1e-9


def test_refit_single_segment_matches_ols():
    rng = np.random.default_rng(11)
    n = 30
    x = np.arange(n, dtype=float)
    y = 1.5 + 0.25 * x
    noise = rng.normal(0, 0.3, size=n)
    targets = y + noise
    tau = TimingProfile(targets)
    bp = Breakpoints(indices=np.array([0, n - 1]), count=0)
    out = project_piecewise_linear_refit(tau, bp, np.ones(n), targets)
    icpt, slope = ols_line(x, targets)
    assert np.max(np.abs(out.values - (icpt + slope * x))) < 1e-8


def test_refit_ignores_zero_weight_targets():
    n = 40
    v = pw_linear(n, [0, 18, 39], [0.2, 0.6], start=1.0)
    tau = TimingProfile(v)
    bp = breakpoints(tau, tol=1e-9)
    w = np.ones(n)
    w[[3, 7, 25]] = 0.0
    t1 = v.copy()
    t2 = v.copy()
    t2[[3, 7, 25]] = 1e6
    a = project_piecewise_linear_refit(tau, bp, w, t1).values
    b = project_piecewise_linear_refit(tau, bp, w, t2).values
    assert np.array_equal(a, b)


def test_refit_rejects_underdetermined_segment():
    n = 30
    v = pw_linear(n, [0, 25, 29], [0.5, 1.5])
    tau = TimingProfile(v)
    bp = breakpoints(tau, tol=1e-9)
    w = np.ones(n)
    w[26:] = 0.0  # last segment keeps only the knot at 25
    with pytest.raises(RefitError):
        project_piecewise_linear_refit(tau, bp, w, v)
