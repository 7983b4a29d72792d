"""Forward observation operator, synthetic profile generation, and noise models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profile import BREAK_SPACING, TimingProfile, membership
from .pulse import PulseModel, psi_derivative, psi_eval

CROSSING_POLICIES = ("none", "single", "v_shape", "free", "negative_dip")


@dataclass(frozen=True)
class Read:
    """One observed signal over equispaced positions, with optional ground truth."""

    z: np.ndarray
    dx: float = 0.1
    ground_truth: TimingProfile | None = None
    ground_truth_d: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        if np.any(self.z < 0):
            raise ValueError("observed signal must be nonnegative")
        if self.ground_truth is not None and len(self.ground_truth) != self.z.size:
            raise ValueError("ground truth length mismatch")
        if self.ground_truth_d is not None and self.ground_truth_d.size != self.z.size:
            raise ValueError("ground truth branch assignment length mismatch")

    def __len__(self) -> int:
        return self.z.size


def forward(model: PulseModel, tau: TimingProfile) -> np.ndarray:
    """Coordinatewise observation of a timing profile."""
    return psi_eval(model, tau.values)


def jacobian_diag(model: PulseModel, tau: np.ndarray) -> np.ndarray:
    """Diagonal of the forward map's Jacobian (the map is coordinatewise)."""
    return psi_derivative(model, tau)


def crossings(values: np.ndarray, level: float) -> int:
    """Number of sign changes of values - level."""
    s = values - level
    return int(np.count_nonzero(s[:-1] * s[1:] < 0))


def _raw_shape(
    rng: np.random.Generator,
    n: int,
    C: int,
    spacing_min: int,
    slope_range: tuple[float, float],
    signs: np.ndarray,
) -> np.ndarray:
    extra = (n - 1) - (C + 1) * spacing_min
    gaps = spacing_min + rng.multinomial(extra, np.full(C + 1, 1.0 / (C + 1)))
    knots = np.concatenate(([0], np.cumsum(gaps)))
    mags = rng.uniform(slope_range[0], slope_range[1], size=C + 1)
    slopes = signs * mags
    # consecutive equal slopes would erase a knot; nudge until distinct
    for j in range(1, C + 1):
        while abs(slopes[j] - slopes[j - 1]) < 1e-3 * slope_range[0]:
            slopes[j] = signs[j] * rng.uniform(*slope_range)
    v = np.empty(n)
    v[0] = 0.0
    for j in range(C + 1):
        a, b = knots[j], knots[j + 1]
        v[a + 1 : b + 1] = v[a] + slopes[j] * np.arange(1, b - a + 1)
    return v


def _segment_signs(rng: np.random.Generator, C: int, policy: str) -> np.ndarray:
    if policy == "single":
        return np.ones(C + 1)
    if policy in ("v_shape", "negative_dip"):
        down = (C + 2) // 2
        return np.concatenate((-np.ones(down), np.ones(C + 1 - down)))
    signs = rng.choice([-1.0, 1.0], size=C + 1)
    for j in range(1, C + 1):  # avoid sign repeats hiding tiny slope changes
        if rng.random() < 0.5:
            signs[j] = -signs[j - 1]
    return signs


def generate_profile(
    rng_seed: int | tuple[int, ...],
    n: int,
    C: int,
    *,
    tau0: float = 2.0,
    dx: float = 0.1,
    spacing_min: int = BREAK_SPACING,
    slope_range: tuple[float, float] = (0.01, 0.08),
    crossing_policy: str = "free",
    min_crossing_gap: int | None = None,
) -> TimingProfile:
    """Draw a piecewise-linear profile with exactly C well-spaced breakpoints.

    The crossing policy controls how the profile relates to the branch split
    time tau0: "none" stays strictly below it, "single" rises monotonically
    through it once, "v_shape" dips below and back (two crossings), "free"
    is unconstrained, and "negative_dip" additionally goes below 0 so the
    observed signal develops an exact zero run (such profiles are negative
    somewhere and therefore fail the nonnegativity membership test).
    """
    if crossing_policy not in CROSSING_POLICIES:
        raise ValueError(f"unknown crossing policy {crossing_policy!r}")
    if slope_range[0] <= 0 or slope_range[1] <= slope_range[0]:
        raise ValueError("slope_range must be 0 < lo < hi")
    if (C + 1) * spacing_min > n - 1:
        raise ValueError(f"n={n} too small for C={C} with spacing {spacing_min}")
    bands = {
        "none": (0.10 * tau0, 0.90 * tau0),
        "single": (0.15 * tau0, 1.90 * tau0),
        "v_shape": (0.15 * tau0, 1.60 * tau0),
        "free": (0.10 * tau0, 2.20 * tau0),
        "negative_dip": (-0.50 * tau0, 1.40 * tau0),
    }
    want = {"none": 0, "single": 1, "v_shape": 2, "negative_dip": 2}
    lo, hi = bands[crossing_policy]

    for attempt in range(200):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=rng_seed, spawn_key=(attempt,))
        )
        signs = _segment_signs(rng, C, crossing_policy)
        raw = _raw_shape(rng, n, C, spacing_min, slope_range, signs)
        span = raw.max() - raw.min()
        values = lo + (raw - raw.min()) * (hi - lo) / span
        tau = TimingProfile(values=values, dx=dx)

        k = crossings(values, tau0)
        if crossing_policy in want and k != want[crossing_policy]:
            continue
        if min_crossing_gap is not None and k >= 2:
            idx = np.flatnonzero((values[:-1] - tau0) * (values[1:] - tau0) < 0)
            if np.min(np.diff(idx)) < min_crossing_gap:
                continue
        m = membership(tau, C)
        if crossing_policy == "negative_dip":
            if m.in_PC and np.min(values) < 0:
                return tau
        elif m.in_PC_geq:
            return tau
    raise RuntimeError(
        f"could not generate a {crossing_policy} profile for n={n}, C={C}"
    )


def add_noise(
    z_clean: np.ndarray,
    rng_seed: int | tuple[int, ...],
    sigma: float,
    kind: str = "binomial-thinning",
    psi_max: float = 1.0,
) -> np.ndarray:
    """Corrupt a clean signal, keeping exact-zero runs near zero.

    gaussian: additive N(0, sigma^2) clipped at 0, with the noise on
    exact-zero coordinates suppressed by a factor 0.1.
    binomial-thinning: z_i = Binomial(K, z_i/psi_max) * psi_max / K with
    K = round(psi_max^2 / sigma^2), mimicking proportion-type noise; exact
    zeros stay exactly zero.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    z_clean = np.asarray(z_clean, dtype=float)
    if sigma == 0:
        return z_clean.copy()
    rng = np.random.default_rng(rng_seed)
    if kind == "gaussian":
        eps = rng.normal(0.0, sigma, size=z_clean.shape)
        eps[z_clean == 0] *= 0.1
        return np.maximum(0.0, z_clean + eps)
    if kind == "binomial-thinning":
        K = max(1, round(psi_max**2 / sigma**2))
        p = np.clip(z_clean / psi_max, 0.0, 1.0)
        return rng.binomial(K, p) * psi_max / K
    raise ValueError(f"unknown noise kind {kind!r}")


def make_read(
    model: PulseModel,
    tau: TimingProfile,
    rng_seed: int | tuple[int, ...] = 0,
    sigma: float = 0.0,
    kind: str = "binomial-thinning",
) -> Read:
    """Observe a profile through the pulse curve and attach the ground truth."""
    z = add_noise(forward(model, tau), rng_seed, sigma, kind, psi_max=model.psi_max)
    d_true = (tau.values > model.tau0).astype(np.int8)
    return Read(z=z, dx=tau.dx, ground_truth=tau, ground_truth_d=d_true)
