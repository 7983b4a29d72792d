"""Signal-side preparation: branch inverses, weights, zero runs, candidate set.

Everything here is computed from the observed signal alone. The two branch
inverses give two candidate times per coordinate; the gap between them is
small exactly where the latent profile may cross the branch split, so its
local minima seed the oscillation windows inside which the binary branch
assignment is allowed to switch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .pulse import PulseModel, branch_inverse_array, psi_derivative

# Relative floor applied to nonzero weights so the quadratic fidelity stays
# well conditioned near the flat tail of the decay branch.
WEIGHT_FLOOR_REL = 1e-4


@dataclass(frozen=True)
class BranchData:
    """Per-coordinate branch inverses and fidelity weights.

    Empty preimages are marked with np.inf in z0/z1 and carry weight 0; the
    gap h = z1 - z0 is np.inf wherever either inverse is empty.
    """

    z0: np.ndarray
    z1: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    h: np.ndarray

    def __len__(self) -> int:
        return self.z0.size


@dataclass(frozen=True)
class CandidateSet:
    """Oscillation windows and the reduced set of branch assignments.

    Every candidate is 0 on the zero run set, constant outside the windows,
    and switches at most once inside each window, so the candidate count is
    bounded by 2 * (m_A + 1)^k for k windows.
    """

    osc_windows: list[tuple[int, int]]
    zero_set: np.ndarray
    candidates: list[np.ndarray]
    s_A: int
    m_A: int
    offsets: list[list[int]] = field(default_factory=list)


def smooth(z: np.ndarray, window: int = 5) -> np.ndarray:
    """Moving average with uniform coefficients 1/window.

    Borders use shrunken symmetric windows so the output length matches the
    input and border samples are averaged over what is available.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    z = np.asarray(z, dtype=float)
    n = z.size
    half = window // 2
    out = np.empty(n)
    csum = np.concatenate(([0.0], np.cumsum(z)))
    for i in range(n):
        r = min(half, i, n - 1 - i)
        out[i] = (csum[i + r + 1] - csum[i - r]) / (2 * r + 1)
    return out


def branch_data(model: PulseModel, z: np.ndarray, smoothing: bool = True) -> BranchData:
    """Branch inverses and weights of a signal, optionally from its smoothed version."""
    z = np.asarray(z, dtype=float)
    zs = smooth(z) if smoothing else z
    z0 = branch_inverse_array(model, 0, zs)
    z1 = branch_inverse_array(model, 1, zs)
    w0 = np.where(np.isfinite(z0), psi_derivative(model, np.where(np.isfinite(z0), z0, 0.0)), 0.0)
    w1 = np.where(np.isfinite(z1), psi_derivative(model, np.where(np.isfinite(z1), z1, 0.0)), 0.0)
    w0 = _floor_weights(w0)
    w1 = _floor_weights(w1)
    h = np.full(z.shape, np.inf)
    both = np.isfinite(z0) & np.isfinite(z1)
    h[both] = z1[both] - z0[both]
    return BranchData(z0=z0, z1=z1, w0=w0, w1=w1, h=h)


def _floor_weights(w: np.ndarray) -> np.ndarray:
    nz = w != 0
    if not np.any(nz):
        return w
    floor = WEIGHT_FLOOR_REL * np.max(np.abs(w))
    out = w.copy()
    small = nz & (np.abs(w) < floor)
    out[small] = np.sign(w[small]) * floor
    return out


def zero_set(z: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Indices i with both z_i and z_{i+1} at or below tol."""
    z = np.asarray(z, dtype=float)
    return np.flatnonzero((z[:-1] <= tol) & (z[1:] <= tol))


def _window_centers(h: np.ndarray, s_A: int) -> list[int]:
    """Local minima of the finite part of h under a scale-free prominence rule."""
    finite = np.isfinite(h)
    if not np.any(finite):
        return []
    vals = h[finite]
    med = np.median(vals)
    mad = np.median(np.abs(vals - med))
    thresh = med - 0.5 * mad
    half = s_A // 2
    n = h.size
    hits = []
    for i in np.flatnonzero(finite):
        if i == 0 or i == n - 1 or h[i] >= thresh:
            continue
        lo, hi = max(0, i - half), min(n, i + half + 1)
        seg = h[lo:hi]
        if h[i] <= np.min(seg[np.isfinite(seg)]):
            hits.append(int(i))
    # keep one center per flat run of equal neighborhood minima
    centers = []
    for i in hits:
        if centers and i == centers[-1] + 1 and h[i] == h[centers[-1]]:
            continue
        centers.append(i)
    return centers


def _merge_windows(centers: list[int], s_A: int, n: int) -> list[tuple[int, int]]:
    """One window of width s_A per center; centers closer than s_A/2 merge."""
    half = s_A // 2
    windows: list[tuple[int, int]] = []
    if not centers:
        return windows
    group = [centers[0]]
    for c in centers[1:]:
        if c - group[-1] < s_A / 2:
            group.append(c)
        else:
            windows.append((max(0, group[0] - half), min(n - 1, group[-1] + half)))
            group = [c]
    windows.append((max(0, group[0] - half), min(n - 1, group[-1] + half)))
    return windows


def _transition_offsets(window: tuple[int, int], m_A: int, n: int) -> list[int]:
    """m_A equispaced transition positions inside a window.

    A transition at t flips the assignment between t-1 and t, so t-1 must lie
    inside the window.
    """
    s, e = window
    width = e - s + 1
    offs = []
    for q in range(m_A):
        t = s + int(width * (2 * q + 1) // (2 * m_A))
        offs.append(int(np.clip(t, s + 1, min(e + 1, n - 1))))
    return sorted(set(offs))


def candidate_set(
    bd: BranchData,
    zero: np.ndarray,
    s_A: int = 60,
    m_A: int = 3,
) -> CandidateSet:
    """Enumerate the reduced set of admissible branch assignments.

    Each window contributes a choice among m_A transition positions or no
    transition; a global polarity fixes the leftmost segment. Assignments
    violating d = 0 on the zero run set are dropped, duplicates removed, and
    the result is sorted lexicographically.
    """
    if s_A < 1 or m_A < 1:
        raise ValueError("s_A and m_A must be >= 1")
    n = len(bd)
    windows = _merge_windows(_window_centers(bd.h, s_A), s_A, n)
    offsets = [_transition_offsets(w, m_A, n) for w in windows]
    zero = np.asarray(zero, dtype=int)

    seen = set()
    cands: list[np.ndarray] = []
    choice_space = [([None] + offs) for offs in offsets] or [[None]]
    for polarity in (0, 1):
        for picks in product(*choice_space):
            d = np.full(n, polarity, dtype=np.int8)
            val = polarity
            for t in picks:
                if t is None:
                    continue
                val = 1 - val
                d[t:] = val
            if zero.size and np.any(d[zero] != 0):
                continue
            key = d.tobytes()
            if key not in seen:
                seen.add(key)
                cands.append(d)
    cands.sort(key=lambda d: tuple(d))
    return CandidateSet(
        osc_windows=windows,
        zero_set=zero,
        candidates=cands,
        s_A=s_A,
        m_A=m_A,
        offsets=offsets,
    )
