"""Weighted generalized lasso solved through its dual box-constrained QP.

Primal problem:  min_tau 1/2 ||w . (tau - target)||^2 + lam * ||L tau||_1
with L the second-difference operator. Zero-weight coordinates do not enter
the fidelity; the dual enforces (L^T u)_i = 0 there and the primal solution
is extended across them by linear interpolation.

The dual quadratic uses the inverse squared weights on the positive-weight
set (the form consistent with the primal optimality conditions):

    min_u 1/2 sum_{i: w_i != 0} (L^T u)_i^2 / w_i^2 - <L target, u>
    s.t.  ||u||_inf <= lam,  (L^T u)_i = 0 for w_i = 0,

with primal recovery tau_i = target_i - (L^T u)_i / w_i^2 on the weighted set.

The box QP is solved by a projected-Newton active-set iteration: coordinates
pressed against the box by the gradient are frozen, the remaining ones take a
Newton step (a pentadiagonal solve; the Hessian L D L^T has bandwidth 2, and
dropping rows/columns never widens a band), and an Armijo backtrack along the
projected arc guarantees descent. Plain projected first-order iterations are
not an option here: the Hessian's condition number grows like n^4, which
stalls them for hundreds of samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded


class RankDeficientError(ValueError):
    """The zero-weight structure leaves the profile underdetermined."""


@dataclass(frozen=True)
class GenLassoProblem:
    """Fidelity target, weights (sign immaterial, squared in the objective),
    and l1 penalty strength. Zero weights mark ignored coordinates."""

    target: np.ndarray
    weights: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.target.shape != self.weights.shape or self.target.ndim != 1:
            raise ValueError("target and weights must be 1-d with equal length")
        if self.target.size < 3:
            raise ValueError("need at least 3 samples")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not np.all(np.isfinite(self.target[self.weights != 0])):
            raise ValueError("target must be finite on weighted coordinates")


@dataclass
class GenLassoSolution:
    tau: np.ndarray
    dual_u: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool


def apply_L(v: np.ndarray) -> np.ndarray:
    """Second difference of v, length n - 2."""
    return v[:-2] - 2.0 * v[1:-1] + v[2:]


def apply_Lt(u: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of apply_L: maps length n - 2 to length n."""
    out = np.zeros(n)
    out[: n - 2] += u
    out[1 : n - 1] -= 2.0 * u
    out[2:] += u
    return out


def fill_by_anchors(values: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Fill non-anchor entries by interpolating anchor values linearly,
    extrapolating the first/last anchor pair beyond the ends."""
    n = values.size
    x = anchors
    y = values[anchors]
    out = np.interp(np.arange(n), x, y)
    if x[0] > 0:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        left = np.arange(x[0])
        out[left] = y[0] + slope * (left - x[0])
    if x[-1] < n - 1:
        slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
        right = np.arange(x[-1] + 1, n)
        out[right] = y[-1] + slope * (right - x[-1])
    return out


class _ReducedSpace:
    """Null-space parameterization of {u : (L^T u)_i = 0 for i in I0}.

    The constraints force u to be affine across a window around each run of
    zero-weight coordinates, with virtual zero values just outside the valid
    index range. Dependent coordinates are convex combinations of the free
    window endpoints, so a box on the free coordinates is exactly the box on
    the full vector intersected with the constraints.
    """

    def __init__(self, zero_mask: np.ndarray, n: int) -> None:
        m = n - 2
        self.m = m
        dep: dict[int, list[tuple[int, float]]] = {}
        for a, b in _runs(zero_mask):
            lo, hi = a - 2, b
            pins = [j for j in range(lo, hi + 1) if j < 0 or j > m - 1]
            reals = [j for j in range(max(lo, 0), min(hi, m - 1) + 1)]
            if len(pins) >= 2:
                # affine through two zeros: the whole window vanishes
                for j in reals:
                    dep[j] = []
            elif len(pins) == 1:
                p = pins[0]
                f = hi if p == lo else lo
                for j in reals:
                    if j != f:
                        dep[j] = [(f, (j - p) / (f - p))]
            else:
                span = hi - lo
                for j in range(lo + 1, hi):
                    dep[j] = [(lo, (hi - j) / span), (hi, (j - lo) / span)]
        # windows only ever share endpoints, but an endpoint referenced by one
        # window may be pinned to zero by another; drop those terms
        pinned_zero = {j for j, terms in dep.items() if not terms}
        for j in list(dep):
            dep[j] = [(e, c) for e, c in dep[j] if e not in pinned_zero]
        free = np.array([j for j in range(m) if j not in dep], dtype=int)
        self.free = free
        self.identity = not dep
        if self.identity:
            return
        pos = -np.ones(m, dtype=int)
        pos[free] = np.arange(free.size)
        dj, i1, w1, i2, w2 = [], [], [], [], []
        for j, terms in sorted(dep.items()):
            dj.append(j)
            i1.append(pos[terms[0][0]] if len(terms) > 0 else 0)
            w1.append(terms[0][1] if len(terms) > 0 else 0.0)
            i2.append(pos[terms[1][0]] if len(terms) > 1 else 0)
            w2.append(terms[1][1] if len(terms) > 1 else 0.0)
        self.dep_j = np.array(dj, dtype=int)
        self.dep_i1 = np.array(i1, dtype=int)
        self.dep_w1 = np.array(w1)
        self.dep_i2 = np.array(i2, dtype=int)
        self.dep_w2 = np.array(w2)
        assert np.all(self.dep_i1[self.dep_w1 != 0] >= 0)
        assert np.all(self.dep_i2[self.dep_w2 != 0] >= 0)

    @property
    def dim(self) -> int:
        return self.free.size

    def expand(self, v: np.ndarray) -> np.ndarray:
        if self.identity:
            return v
        u = np.zeros(self.m)
        if v.size:
            u[self.free] = v
            u[self.dep_j] = self.dep_w1 * v[self.dep_i1] + self.dep_w2 * v[self.dep_i2]
        return u

    def reduce(self, g: np.ndarray) -> np.ndarray:
        if self.identity:
            return g
        out = g[self.free].copy()
        if out.size:
            np.add.at(out, self.dep_i1, g[self.dep_j] * self.dep_w1)
            np.add.at(out, self.dep_i2, g[self.dep_j] * self.dep_w2)
        return out

    def matrix(self) -> np.ndarray:
        """Dense basis of the constraint null space, one column per free coord."""
        N = np.zeros((self.m, self.dim))
        N[self.free, np.arange(self.dim)] = 1.0
        if not self.identity and self.dep_j.size:
            N[self.dep_j, self.dep_i1] += self.dep_w1
            N[self.dep_j, self.dep_i2] += self.dep_w2
        return N


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    splits = np.flatnonzero(np.diff(idx) > 1) + 1
    return [(int(g[0]), int(g[-1])) for g in np.split(idx, splits)]


def _banded_free_solve(
    d0: np.ndarray, d1: np.ndarray, d2: np.ndarray, free: np.ndarray, rhs: np.ndarray
) -> np.ndarray:
    """Solve H[free, free] x = rhs for the pentadiagonal H given by its
    diagonals. Compressing to the free indices keeps the bandwidth at 2."""
    mf = free.size
    ab = np.zeros((3, mf))
    ab[2] = d0[free]
    if mf > 1:
        gap = free[1:] - free[:-1]
        ab[1, 1:] = np.where(gap == 1, d1[free[:-1]], 0.0)
        two = gap == 2
        ab[1, 1:][two] = d2[free[:-1][two]]
    if mf > 2:
        gap2 = free[2:] - free[:-2]
        ab[0, 2:] = np.where(gap2 == 2, d2[free[:-2]], 0.0)
    return solveh_banded(ab, rhs, lower=False)


def _kkt_residual_box(v, g, lam):
    r = g.copy()
    hi = v >= lam * (1 - 1e-12)
    lo = v <= -lam * (1 - 1e-12)
    r[hi] = np.maximum(g[hi], 0.0)
    r[lo] = np.minimum(g[lo], 0.0)
    return float(np.linalg.norm(r))


def _active_set_polish(hessmul, solve_free, b, lam, sign, tol_abs, budget):
    """Exact working-set refinement: pin coordinates at +/-lam, solve the free
    block, clip new violators, release wrong-signed multipliers; falls back to
    releasing one coordinate at a time if a sweep revisits a working set."""
    dim = b.size
    seen: set[bytes] = set()
    single_release = False
    v = lam * sign
    used = 0
    for _ in range(budget):
        used += 1
        free = np.flatnonzero(sign == 0)
        v = lam * sign
        if free.size:
            rhs = b - hessmul(v)
            try:
                v[free] = solve_free(free, rhs[free])
            except np.linalg.LinAlgError:
                break
        g = hessmul(v) - b
        if np.all(np.abs(v) <= lam * (1 + 1e-12)):
            if _kkt_residual_box(np.clip(v, -lam, lam), g, lam) <= tol_abs:
                return np.clip(v, -lam, lam), used, True
        new_sign = sign.copy()
        over_hi = (sign == 0) & (v > lam)
        over_lo = (sign == 0) & (v < -lam)
        new_sign[over_hi] = 1.0
        new_sign[over_lo] = -1.0
        if single_release:
            if not (over_hi.any() or over_lo.any()):
                mult = np.zeros(dim)
                mult[sign > 0] = np.maximum(g[sign > 0], 0.0)
                mult[sign < 0] = -np.minimum(g[sign < 0], 0.0)
                worst = int(np.argmax(mult))
                if mult[worst] <= 0:
                    break
                new_sign[worst] = 0.0
        else:
            new_sign[(sign > 0) & (g > 0)] = 0.0
            new_sign[(sign < 0) & (g < 0)] = 0.0
            key = new_sign.tobytes()
            if key in seen:
                single_release = True
                seen.clear()
            else:
                seen.add(key)
        if np.array_equal(new_sign, sign):
            break
        sign = new_sign
    return np.clip(v, -lam, lam), used, False


def _box_qp(hessmul, solve_free, solve_shifted, b, lam, dim, tol_abs, max_iter, u0=None):
    """min 1/2 v'Hv - b'v over the box |v| <= lam.

    A short primal-dual interior-point phase locates the active set (its
    iteration count does not depend on how many coordinates end up at the
    box), then an exact active-set polish drives the KKT residual to solver
    precision. A warm start skips straight to the polish when it suffices.
    """
    total = 0
    if u0 is not None:
        sign0 = np.where(np.abs(u0) >= lam * (1 - 1e-12), np.sign(u0), 0.0)
        v, used, ok = _active_set_polish(hessmul, solve_free, b, lam, sign0, tol_abs, 25)
        total += used
        if ok:
            return v, total, True

    # interior point: slacks s+- = lam -+ v, multipliers z+- > 0
    v = np.zeros(dim)
    z_hi = np.ones(dim)
    z_lo = np.ones(dim)
    frac = 0.995
    stalls = 0
    gap0 = lam
    slack_floor = 1e-14 * (1.0 + lam)
    for it_ip in range(60):
        if total >= max_iter:
            break
        total += 1
        s_hi = np.maximum(lam - v, slack_floor)
        s_lo = np.maximum(lam + v, slack_floor)
        g = hessmul(v) - b
        r_d = g + z_hi - z_lo
        gap = (s_hi @ z_hi + s_lo @ z_lo) / (2 * dim)
        if it_ip == 0:
            gap0 = max(gap, 1e-300)
        if gap <= max(1e-9 * gap0, 1e-13 * (1.0 + lam)) and np.linalg.norm(r_d) <= 10 * tol_abs:
            break
        mu = 0.15 * gap
        shift = z_hi / s_hi + z_lo / s_lo
        rhs = -r_d + (mu - s_hi * z_hi) / s_hi - (mu - s_lo * z_lo) / s_lo
        try:
            dv = solve_shifted(shift, rhs)
        except np.linalg.LinAlgError:
            break
        dz_hi = (mu - s_hi * z_hi + z_hi * dv) / s_hi
        dz_lo = (mu - s_lo * z_lo - z_lo * dv) / s_lo
        alpha = 1.0
        for delta, spc in ((-dv, s_hi), (dv, s_lo), (dz_hi, z_hi), (dz_lo, z_lo)):
            neg = delta < 0
            if neg.any():
                alpha = min(alpha, frac * float(np.min(-spc[neg] / delta[neg])))
        if alpha < 1e-10:
            stalls += 1
            if stalls >= 3:
                break  # numerically at the central-path floor
            continue
        stalls = 0
        v = v + alpha * dv
        z_hi = z_hi + alpha * dz_hi
        z_lo = z_lo + alpha * dz_lo

    # crossover: classify actives from the slack/multiplier ratio
    s_hi = lam - v
    s_lo = lam + v
    sign = np.zeros(dim)
    sign[z_hi * s_lo > z_lo * s_hi * 1e6] = 1.0
    sign[z_lo * s_hi > z_hi * s_lo * 1e6] = -1.0
    v2, used, ok = _active_set_polish(
        hessmul, solve_free, b, lam, sign, tol_abs, max(5, max_iter - total)
    )
    total += used
    if ok:
        return v2, total, True
    g = hessmul(v) - b
    if _kkt_residual_box(v, g, lam) <= _kkt_residual_box(v2, hessmul(v2) - b, lam):
        return v, total, False
    return v2, total, False


def solve_dual(
    p: GenLassoProblem,
    tol: float = 1e-8,
    max_iter: int = 2000,
    u0: np.ndarray | None = None,
) -> GenLassoSolution:
    """Projected-Newton active-set iteration on the reduced dual, from u = 0.

    Declares convergence when the projected-gradient norm falls below
    tol * (1 + ||L target||). On max_iter the best iterate is returned with
    converged=False and its KKT residual reported. An optional u0 warm-starts
    the iteration (it is projected onto the constraints first).
    """
    n = p.target.size
    w2 = p.weights**2
    zero_mask = w2 == 0
    anchors = np.flatnonzero(~zero_mask)
    if anchors.size < 2:
        raise RankDeficientError("need at least 2 weighted coordinates")
    inv_w2 = np.where(zero_mask, 0.0, 1.0 / np.where(zero_mask, 1.0, w2))
    zmask = np.where(zero_mask, 0.0, p.target)
    lz = apply_L(zmask)
    scale = 1.0 + float(np.linalg.norm(lz))

    reduced = _ReducedSpace(zero_mask, n)
    b = reduced.reduce(lz)

    def hessmul(v: np.ndarray) -> np.ndarray:
        return reduced.reduce(apply_L(inv_w2 * apply_Lt(reduced.expand(v), n)))

    m = n - 2
    if reduced.identity:
        D = inv_w2
        d0 = D[:m] + 4.0 * D[1 : m + 1] + D[2 : m + 2]
        d1 = -2.0 * (D[1:m] + D[2 : m + 1])
        d2 = D[2:m]
        H_dense = None
    else:
        N = reduced.matrix()
        ltn = np.zeros((n, reduced.dim))
        ltn[:m] += N
        ltn[1 : m + 1] -= 2.0 * N
        ltn[2 : m + 2] += N
        H_dense = ltn.T @ (inv_w2[:, None] * ltn)

    def solve_free(free: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        if H_dense is None:
            return _banded_free_solve(d0, d1, d2, free, rhs)
        return np.linalg.solve(H_dense[np.ix_(free, free)], rhs)

    def solve_shifted(shift: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        if H_dense is None:
            mf = shift.size
            ab = np.zeros((3, mf))
            ab[2] = d0 + shift
            ab[1, 1:] = d1
            ab[0, 2:] = d2
            return solveh_banded(ab, rhs, lower=False)
        return np.linalg.solve(H_dense + np.diag(shift), rhs)

    lam = p.lam
    iterations = 0
    converged = True
    dim = reduced.dim
    if lam == 0 or dim == 0:
        v = np.zeros(dim)
    else:
        v, iterations, converged = _box_qp(
            hessmul, solve_free, solve_shifted, b, lam, dim, tol * scale, max_iter, u0=
            (np.clip(u0[reduced.free], -lam, lam) if u0 is not None else None),
        )

    u = reduced.expand(v)
    s = apply_Lt(u, n)
    tau = np.where(zero_mask, 0.0, p.target - inv_w2 * s)
    if zero_mask.any():
        tau = fill_by_anchors(tau, anchors)
    sol = GenLassoSolution(
        tau=tau, dual_u=u, kkt_residual=0.0, iterations=iterations, converged=converged
    )
    sol.kkt_residual = kkt_check(p, sol)
    return sol


def kkt_check(p: GenLassoProblem, s: GenLassoSolution) -> float:
    """Maximum violation of the optimality conditions.

    Checks stationarity on weighted coordinates, box feasibility, the
    complementary-slackness pairing between the dual and the bends of tau,
    and linearity of tau across zero-weight coordinates.
    """
    n = p.target.size
    w2 = p.weights**2
    pos = w2 > 0
    st = apply_Lt(s.dual_u, n)
    res = 0.0
    if pos.any():
        stat = w2 * (s.tau - np.where(pos, p.target, 0.0)) + st
        res = float(np.max(np.abs(stat[pos])))
    res = max(res, float(np.max(np.abs(s.dual_u), initial=0.0) - p.lam), 0.0)

    ltau = apply_L(s.tau)
    act = 1e-6 * (1.0 + float(np.max(np.abs(ltau))))
    interior = np.abs(s.dual_u) < p.lam * (1.0 - 1e-6) - 1e-12
    if interior.any():
        res = max(res, float(np.max(np.abs(ltau[interior]))))
    kinks = np.abs(ltau) > act
    if kinks.any():
        res = max(res, float(np.max(np.abs(s.dual_u[kinks] - p.lam * np.sign(ltau[kinks])))))

    zero_interior = np.flatnonzero(~pos)
    zero_interior = zero_interior[(zero_interior >= 1) & (zero_interior <= n - 2)]
    if zero_interior.size:
        res = max(res, float(np.max(np.abs(ltau[zero_interior - 1]))))
    return res
