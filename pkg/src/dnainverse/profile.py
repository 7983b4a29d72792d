"""Timing profiles, the second-difference operator, breakpoints, and set membership.

A timing profile is a vector of replication times over equispaced positions.
Interior index i is a breakpoint exactly when the three surrounding samples
are not collinear, i.e. when the discrete second difference at i is nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Minimum index gap between consecutive breakpoints (borders included) required
# for identifiability of the forward map; configurable for experiments.
BREAK_SPACING = 12


class RefitError(ValueError):
    """Raised when a piecewise-linear refit is underdetermined."""


@dataclass(frozen=True)
class TimingProfile:
    """Replication times tau over n >= 3 equispaced positions with spacing dx."""

    values: np.ndarray
    dx: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 3:
            raise ValueError("profile needs at least 3 samples")
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Breakpoints:
    """Sorted 0-based breakpoint indices, borders 0 and n-1 always included."""

    indices: np.ndarray
    count: int

    @property
    def interior(self) -> np.ndarray:
        return self.indices[1:-1]


class Membership(NamedTuple):
    in_PC: bool
    in_PC_neq: bool
    in_PC_geq: bool


def _default_tol(values: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(values))))


def second_difference(tau: TimingProfile) -> np.ndarray:
    """Discrete second difference, borders excluded: output length n - 2."""
    v = tau.values
    return v[:-2] - 2.0 * v[1:-1] + v[2:]


def breakpoints(tau: TimingProfile, tol: float | None = None) -> Breakpoints:
    """Indices where the profile bends by more than tol, plus the two borders."""
    if tol is None:
        tol = _default_tol(tau.values)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    d2 = second_difference(tau)
    interior = np.flatnonzero(np.abs(d2) > tol) + 1
    idx = np.concatenate(([0], interior, [len(tau) - 1]))
    return Breakpoints(indices=idx, count=interior.size)


def membership(
    tau: TimingProfile,
    C: int,
    tol: float | None = None,
    spacing_min: int = BREAK_SPACING,
) -> Membership:
    """Test membership in the nested profile classes.

    in_PC:      at most C breakpoints.
    in_PC_neq:  additionally nonnegative with no constant step (|step| > tol).
    in_PC_geq:  additionally consecutive breakpoint indices (borders included)
                at least spacing_min apart.
    """
    if C < 0:
        raise ValueError("C must be nonnegative")
    if tol is None:
        tol = _default_tol(tau.values)
    bp = breakpoints(tau, tol)
    in_pc = bp.count <= C
    v = tau.values
    steps = np.abs(np.diff(v))
    in_neq = in_pc and bool(np.all(v >= 0)) and bool(np.all(steps > tol))
    gaps = np.diff(bp.indices)
    in_geq = in_neq and bool(np.all(gaps >= spacing_min))
    return Membership(in_pc, in_neq, in_geq)


def project_piecewise_linear_refit(
    tau_reg: TimingProfile,
    bp: Breakpoints,
    weights: np.ndarray,
    targets: np.ndarray,
) -> TimingProfile:
    """Weighted least-squares refit of a continuous piecewise-linear profile.

    Knot locations are fixed at bp; only the values at the knots are free, so
    the fit is a linear problem in the hat-function coefficients. Coordinates
    with zero weight do not influence the result. This removes the slope
    shrinkage introduced by l1 regularization in the solve that produced bp.
    """
    n = len(tau_reg)
    weights = np.asarray(weights, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if weights.shape != (n,) or targets.shape != (n,):
        raise ValueError("weights/targets must match the profile length")
    knots = bp.indices
    if knots[0] != 0 or knots[-1] != n - 1:
        raise ValueError("breakpoints must include both borders")

    for a, b in zip(knots[:-1], knots[1:]):
        if np.count_nonzero(weights[a : b + 1] > 0) < 2:
            raise RefitError(
                f"segment [{a}, {b}] has fewer than 2 positive-weight samples"
            )

    # Hat basis: phi[:, j] is 1 at knot j, linear to 0 at the adjacent knots.
    k = knots.size
    phi = np.zeros((n, k))
    pos = np.arange(n)
    seg = np.clip(np.searchsorted(knots, pos, side="right") - 1, 0, k - 2)
    left, right = knots[seg], knots[seg + 1]
    alpha = (right - pos) / (right - left)
    phi[pos, seg] = alpha
    phi[pos, seg + 1] = 1.0 - alpha

    wcol = weights[:, None]
    theta, *_ = np.linalg.lstsq(wcol * phi, weights * targets, rcond=None)
    return TimingProfile(values=phi @ theta, dx=tau_reg.dx)
