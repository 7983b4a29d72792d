"""Nonlinear pulse/chase observation function and its two injective branches.

The intracellular label concentration follows a pulse shape: zero before the
experiment starts, a strictly concave rise on [0, tau0] up to a peak, then a
convex exponential decay toward a nonzero residual level. Each observed
concentration therefore has at most two antecedent times, one per branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PulseModel:
    """Parametric pulse/chase curve.

    rise:   psi0(t) = psi_max * (1 - exp(-rise_rate*t)) / (1 - exp(-rise_rate*tau0))
    decay:  psi1(t) = residual + (psi_max - residual) * exp(-decay_rate*(t - tau0))

    Both branches are injective with closed-form inverses; the curve is zero
    for all t <= 0 and continuous everywhere.
    """

    tau0: float = 2.0
    psi_max: float = 1.0
    residual: float = 0.1
    rise_rate: float = 1.5
    decay_rate: float = 0.3

    def __post_init__(self) -> None:
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if not 0 < self.residual < self.psi_max:
            raise ValueError("require 0 < residual < psi_max")
        if self.rise_rate <= 0 or self.decay_rate <= 0:
            raise ValueError("rates must be positive")

    @property
    def _rise_norm(self) -> float:
        return -math.expm1(-self.rise_rate * self.tau0)


def psi_eval(model: PulseModel, t):
    """Evaluate the pulse curve at time(s) t. Total, continuous, in [0, psi_max]."""
    t = np.asarray(t, dtype=float)
    rising = model.psi_max * (-np.expm1(-model.rise_rate * t)) / model._rise_norm
    decaying = model.residual + (model.psi_max - model.residual) * np.exp(
        -model.decay_rate * (t - model.tau0)
    )
    out = np.where(t <= 0, 0.0, np.where(t <= model.tau0, rising, decaying))
    return out if out.ndim else float(out)


def psi_derivative(model: PulseModel, t):
    """Derivative of the active branch; 0 for t < 0 and, by convention, at t = tau0.

    The curve is not differentiable at the peak; returning 0 there keeps
    weights built from the derivative from privileging either branch.
    """
    t = np.asarray(t, dtype=float)
    rising = (
        model.psi_max * model.rise_rate * np.exp(-model.rise_rate * t) / model._rise_norm
    )
    decaying = (
        -model.decay_rate
        * (model.psi_max - model.residual)
        * np.exp(-model.decay_rate * (t - model.tau0))
    )
    out = np.where(t < 0, 0.0, np.where(t < model.tau0, rising, decaying))
    out = np.where(t == model.tau0, 0.0, out)
    return out if out.ndim else float(out)


def branch_inverse(model: PulseModel, branch: int, b: float):
    """Inverse of one branch at concentration b, or None when b is unreachable.

    Branch 0 inverts the rise on [0, tau0] for b in [0, psi_max]; branch 1
    inverts the decay on [tau0, inf) for b in (residual, psi_max]. Values at
    or below the residual have no decay-branch antecedent.
    """
    if b < 0:
        raise ValueError("concentration must be nonnegative")
    if branch == 0:
        if b > model.psi_max:
            return None
        return -math.log1p(-b * model._rise_norm / model.psi_max) / model.rise_rate
    if branch == 1:
        if b <= model.residual or b > model.psi_max:
            return None
        return model.tau0 - math.log(
            (b - model.residual) / (model.psi_max - model.residual)
        ) / model.decay_rate
    raise ValueError("branch must be 0 or 1")


def branch_inverse_array(model: PulseModel, branch: int, b: np.ndarray) -> np.ndarray:
    """Vectorized branch inverse with np.inf marking empty preimages."""
    b = np.asarray(b, dtype=float)
    out = np.full(b.shape, np.inf)
    if branch == 0:
        ok = (b >= 0) & (b <= model.psi_max)
        out[ok] = -np.log1p(-b[ok] * model._rise_norm / model.psi_max) / model.rise_rate
    elif branch == 1:
        ok = (b > model.residual) & (b <= model.psi_max)
        out[ok] = (
            model.tau0
            - np.log((b[ok] - model.residual) / (model.psi_max - model.residual))
            / model.decay_rate
        )
    else:
        raise ValueError("branch must be 0 or 1")
    return out
