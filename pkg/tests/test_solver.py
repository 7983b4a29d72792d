import numpy as np
import pytest

from dnainverse import (
    Breakpoints,
    PulseModel,
    Read,
    SolveParams,
    TimingProfile,
    branch_data,
    breakpoints,
    dna_inverse,
    extract_events,
    generate_profile,
    make_read,
    objective_F,
)

MODEL = PulseModel()


def in_window_mask(report_or_cs, n):
    mask = np.zeros(n, dtype=bool)
    for s, e in report_or_cs:
        mask[s : e + 1] = True
    return mask


def windows_for(read, params=SolveParams()):
    from dnainverse.solver import prepare

    _, cs, _ = prepare(MODEL, read, params)
    return cs.osc_windows


def test_objective_zero_at_branch_consistent_inverse():
    tau = generate_profile(70, n=200, C=2, crossing_policy="single")
    read = make_read(MODEL, tau)
    bd = branch_data(MODEL, read.z, smoothing=False)
    d = read.ground_truth_d
    tau_rec = np.where(d == 1, bd.z1, bd.z0)
    ok = np.isfinite(tau_rec)
    tau_rec[~ok] = 0.0
    # skipped coordinates carry no weight, so F vanishes on the noiseless read
    assert objective_F(bd, d, tau_rec) < 1e-18


def test_objective_quadratic_in_single_offset():
    tau = generate_profile(71, n=150, C=1, crossing_policy="single")
    read = make_read(MODEL, tau)
    bd = branch_data(MODEL, read.z, smoothing=False)
    d = read.ground_truth_d
    tau_rec = np.where(d == 1, bd.z1, bd.z0)
    i = int(np.flatnonzero((d == 1) & (bd.w1 != 0))[3])
    delta = 0.37
    tau_rec[i] += delta
    assert objective_F(bd, d, tau_rec) == pytest.approx(0.5 * bd.w1[i] ** 2 * delta**2)


def test_objective_penalizes_flipped_coordinate():
    tau = generate_profile(72, n=150, C=1, crossing_policy="single")
    read = make_read(MODEL, tau)
    bd = branch_data(MODEL, read.z, smoothing=False)
    d = read.ground_truth_d.copy()
    i = int(np.flatnonzero((d == 0) & np.isfinite(bd.h))[5])
    d[i] = 1
    tau_rec = np.where(read.ground_truth_d == 1, bd.z1, bd.z0)
    f = objective_F(bd, d, tau_rec)
    assert f >= 0.5 * bd.w1[i] ** 2 * bd.h[i] ** 2 * (1 - 1e-12)
    assert f > 0


def test_dna_inverse_noiseless_single_crossing():
    tau = generate_profile(80, n=300, C=2, crossing_policy="single")
    read = make_read(MODEL, tau)
    report = dna_inverse(MODEL, read)
    outside = ~in_window_mask(windows_for(read), len(read))
    assert np.array_equal(report.d_star[outside], read.ground_truth_d[outside])
    err = np.max(np.abs(report.tau_star.values - tau.values))
    assert err <= 0.05 * np.max(tau.values)


def test_dna_inverse_zero_read():
    read = Read(z=np.zeros(80), dx=0.1)
    report = dna_inverse(MODEL, read)
    assert report.degenerate
    assert np.all(report.tau_star.values == 0.0)
    assert report.events == []
    assert report.objective == 0.0


def test_dna_inverse_no_crossing_single_line():
    tau = generate_profile(81, n=120, C=0, crossing_policy="none")
    read = make_read(MODEL, tau)
    report = dna_inverse(MODEL, read)
    assert windows_for(read) == []
    assert np.all(report.d_star == 0)
    err = np.max(np.abs(report.tau_star.values - tau.values))
    assert err <= 1e-3 * np.max(tau.values)


def test_selection_dominance():
    tau = generate_profile(82, n=300, C=3, crossing_policy="v_shape", min_crossing_gap=90)
    read = make_read(MODEL, tau, rng_seed=4, sigma=0.03)
    report = dna_inverse(MODEL, read)
    objs = [c.objective for c in report.per_candidate if c.error is None]
    assert report.objective == min(objs)


def test_noiseless_exact_recovery_batch():
    failures = []
    for k in range(15):
        n = 100 if k % 2 == 0 else 300
        policy = ["single", "v_shape", "none", "free"][k % 4]
        C = [1, 2, 3, 4][k % 4] if n == 300 else [1, 2][k % 2]
        tau = generate_profile((83, k), n=n, C=C, crossing_policy=policy, min_crossing_gap=90)
        read = make_read(MODEL, tau)
        report = dna_inverse(MODEL, read)
        err = np.max(np.abs(report.tau_star.values - tau.values))
        if err > 1e-3 * np.max(tau.values):
            failures.append((k, err))
            continue
        true_bp = breakpoints(tau).interior
        got_bp = report.breakpoints.interior
        for t in true_bp:
            assert np.min(np.abs(got_bp - t)) <= 2, (k, t, got_bp)
    assert not failures, failures


def test_noise_robustness_d_star():
    good = 0
    total = 0
    for k in range(10):
        tau = generate_profile((84, k), n=300, C=2, crossing_policy="single")
        read = make_read(MODEL, tau, rng_seed=(84, k, 1), sigma=0.05, kind="binomial-thinning")
        report = dna_inverse(MODEL, read)
        outside = ~in_window_mask(windows_for(read), len(read))
        match = np.mean(report.d_star[outside] == read.ground_truth_d[outside])
        good += match >= 0.95
        total += 1
    assert good >= total - 1


def test_determinism():
    tau = generate_profile(85, n=200, C=2, crossing_policy="v_shape", min_crossing_gap=90)
    read = make_read(MODEL, tau, rng_seed=5, sigma=0.04)
    a = dna_inverse(MODEL, read)
    b = dna_inverse(MODEL, read)
    assert np.array_equal(a.tau_star.values, b.tau_star.values)
    assert np.array_equal(a.d_star, b.d_star)
    assert a.objective == b.objective
    assert [c.objective for c in a.per_candidate] == [c.objective for c in b.per_candidate]
    assert a.events == b.events


def build_profile(vals, dx=0.1):
    return TimingProfile(np.asarray(vals, dtype=float), dx=dx)


def test_extract_events_v_shape():
    v = np.concatenate([np.arange(10, 0, -1.0), np.arange(2, 12.0)])
    tau = build_profile(v)
    bp = breakpoints(tau, tol=1e-9)
    events = extract_events(tau, bp, min_slope=0.5)
    kinds = [e.kind for e in events]
    assert kinds.count("origin") == 1
    assert kinds.count("fork") == 2
    for e in events:
        if e.kind == "fork":
            assert e.speed == pytest.approx(tau.dx)
    origin = next(e for e in events if e.kind == "origin")
    assert origin.index == 9


def test_extract_events_peak():
    v = np.concatenate([np.arange(0, 10.0), np.arange(10, 0, -1.0)])
    events = extract_events(build_profile(v), breakpoints(build_profile(v), 1e-9), 0.5)
    assert [e.kind for e in events].count("terminus") == 1


def test_extract_events_monotone_slope_change():
    v = np.concatenate([0.5 * np.arange(10.0), 4.5 + 2.0 * np.arange(1, 11.0)])
    tau = build_profile(v)
    events = extract_events(tau, breakpoints(tau, 1e-9), min_slope=0.1)
    kinds = [e.kind for e in events]
    assert kinds.count("fork") == 2
    assert kinds.count("slope_change") == 1
    assert kinds.count("origin") == 0 and kinds.count("terminus") == 0
    directions = [e.direction for e in events if e.kind == "fork"]
    assert directions == [1, 1]
