"""Global solve: loop over candidate branch assignments, score, select, refit.

Each candidate assignment turns the nonconvex recovery into a weighted
generalized lasso; candidates are compared by the unregularized weighted
fidelity of their relaxed solutions. The winner's profile is then refit as an
exact piecewise-linear function with knots frozen at the detected bends,
which removes the l1 slope shrinkage before events are extracted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .forward import Read
from .genlasso import GenLassoProblem, RankDeficientError, solve_dual
from .preprocess import BranchData, CandidateSet, branch_data, candidate_set, zero_set
from .profile import Breakpoints, RefitError, TimingProfile, breakpoints, project_piecewise_linear_refit
from .pulse import PulseModel


class NoCandidatesError(RuntimeError):
    """The candidate set came out empty after filtering."""


class AllSolvesFailedError(RuntimeError):
    """Every candidate subproblem failed; per-candidate errors attached."""

    def __init__(self, per_candidate):
        super().__init__("all candidate solves failed")
        self.per_candidate = per_candidate


@dataclass(frozen=True)
class SolveParams:
    """Tuning knobs for the candidate loop.

    zero_tol=None resolves to 1e-6 * psi_max. min_slope for fork events is
    dx / max_fork_speed. Refit knots are bends of the regularized solution
    above max(refit_bp_rel * max|L tau|, 1e-6 * (1 + max|tau|)).
    """

    s_A: int = 60
    m_A: int = 3
    lam: float = 8.0
    tol: float = 1e-8
    max_iter: int = 50000
    smoothing: bool = True
    zero_tol: float | None = None
    max_fork_speed: float = 5.0
    refit_bp_rel: float = 1e-3
    refit: bool = True


@dataclass(frozen=True)
class Event:
    kind: str  # origin | terminus | fork | slope_change
    index: int
    time: float
    speed: float | None
    direction: int


@dataclass
class CandidateResult:
    d: np.ndarray
    objective: float
    kkt: float | None
    ms: float
    error: str | None = None


@dataclass
class SolveReport:
    tau_star: TimingProfile
    tau_star_regularized: TimingProfile
    d_star: np.ndarray
    objective: float
    per_candidate: list[CandidateResult]
    breakpoints: Breakpoints
    events: list[Event]
    wall_ms: float
    solver: str = "dna-inverse"
    degenerate: bool = False


def objective_F(bd: BranchData, d: np.ndarray, tau: np.ndarray) -> float:
    """Unregularized weighted fidelity of tau under assignment d.

    Coordinates whose selected branch has an empty preimage (weight 0) are
    skipped.
    """
    on1 = (d == 1) & (bd.w1 != 0)
    on0 = (d == 0) & (bd.w0 != 0)
    f = 0.5 * np.sum((bd.w1[on1] * (tau[on1] - bd.z1[on1])) ** 2)
    f += 0.5 * np.sum((bd.w0[on0] * (tau[on0] - bd.z0[on0])) ** 2)
    return float(f)


def assemble_problem(bd: BranchData, d: np.ndarray, lam: float) -> GenLassoProblem:
    """Target and weights of the per-candidate convex subproblem."""
    target = np.where(d == 1, bd.z1, bd.z0)
    w = np.where(d == 1, bd.w1, bd.w0)
    target = np.where(w != 0, target, 0.0)
    return GenLassoProblem(target=target, weights=w, lam=lam)


def refit_tolerance(tau_reg: TimingProfile, rel: float) -> float:
    d2 = np.abs(tau_reg.values[:-2] - 2 * tau_reg.values[1:-1] + tau_reg.values[2:])
    mx = float(np.max(d2)) if d2.size else 0.0
    return max(rel * mx, 1e-6 * (1.0 + float(np.max(np.abs(tau_reg.values)))))


def _refit_winner(
    tau_reg: TimingProfile, problem: GenLassoProblem, params: SolveParams
) -> tuple[TimingProfile, bool]:
    bp = breakpoints(tau_reg, refit_tolerance(tau_reg, params.refit_bp_rel))
    try:
        refit = project_piecewise_linear_refit(
            tau_reg, bp, np.abs(problem.weights), problem.target
        )
        return refit, True
    except RefitError:
        return tau_reg, False


def extract_events(
    tau: TimingProfile, bp: Breakpoints, min_slope: float
) -> list[Event]:
    """Classify knots by slope sign change and emit fork events per segment.

    A knot where the slope flips from negative to positive is an origin, the
    opposite flip a terminus, a same-sign bend a slope change. Segments at
    least as steep as min_slope (time per sample) carry a moving fork with
    speed dx / |slope|.
    """
    v = tau.values
    k = bp.indices
    slopes = (v[k[1:]] - v[k[:-1]]) / (k[1:] - k[:-1])
    events: list[Event] = []
    for j, s in enumerate(slopes):
        if abs(s) >= min_slope:
            mid = int((k[j] + k[j + 1]) // 2)
            events.append(
                Event(
                    kind="fork",
                    index=mid,
                    time=float(v[mid]),
                    speed=float(tau.dx / abs(s)),
                    direction=1 if s > 0 else -1,
                )
            )
        if j + 1 < slopes.size:
            knot = int(k[j + 1])
            s_next = slopes[j + 1]
            if s < 0 < s_next:
                kind = "origin"
            elif s > 0 > s_next:
                kind = "terminus"
            else:
                kind = "slope_change"
            events.append(Event(kind=kind, index=knot, time=float(v[knot]), speed=None, direction=0))
    return events


def _trivial_zero_report(read: Read, solver: str) -> SolveReport:
    n = len(read)
    zero = TimingProfile(values=np.zeros(n), dx=read.dx)
    return SolveReport(
        tau_star=zero,
        tau_star_regularized=zero,
        d_star=np.zeros(n, dtype=np.int8),
        objective=0.0,
        per_candidate=[],
        breakpoints=Breakpoints(indices=np.array([0, n - 1]), count=0),
        events=[],
        wall_ms=0.0,
        solver=solver,
        degenerate=True,
    )


def prepare(
    model: PulseModel, read: Read, params: SolveParams
) -> tuple[BranchData, CandidateSet, float]:
    zero_tol = params.zero_tol if params.zero_tol is not None else 1e-6 * model.psi_max
    bd = branch_data(model, read.z, smoothing=params.smoothing)
    cs = candidate_set(bd, zero_set(read.z, zero_tol), params.s_A, params.m_A)
    return bd, cs, zero_tol


def dna_inverse(
    model: PulseModel, read: Read, params: SolveParams | None = None
) -> SolveReport:
    """Recover (tau*, d*) by exhausting the reduced candidate set.

    Candidates are evaluated in lexicographic order and ties in the fidelity
    objective keep the earlier candidate, so the result is deterministic.
    """
    params = params or SolveParams()
    t_start = time.perf_counter()
    zero_tol = params.zero_tol if params.zero_tol is not None else 1e-6 * model.psi_max
    if np.all(read.z <= zero_tol):
        return _trivial_zero_report(read, "dna-inverse")

    bd, cs, _ = prepare(model, read, params)
    if not cs.candidates:
        raise NoCandidatesError("empty candidate set")

    results: list[CandidateResult] = []
    best = None  # (objective, index, tau, problem)
    for d in cs.candidates:
        problem = assemble_problem(bd, d, params.lam)
        t0 = time.perf_counter()
        try:
            sol = solve_dual(problem, tol=params.tol, max_iter=params.max_iter)
        except (RankDeficientError, ValueError) as exc:
            results.append(
                CandidateResult(
                    d=d,
                    objective=float("inf"),
                    kkt=None,
                    ms=(time.perf_counter() - t0) * 1e3,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        f = objective_F(bd, d, sol.tau)
        results.append(
            CandidateResult(
                d=d, objective=f, kkt=sol.kkt_residual, ms=(time.perf_counter() - t0) * 1e3
            )
        )
        if best is None or f < best[0]:
            best = (f, len(results) - 1, sol.tau, problem)

    if best is None:
        raise AllSolvesFailedError(results)

    f_star, idx, tau_vals, problem = best
    d_star = cs.candidates[idx]
    tau_reg = TimingProfile(values=tau_vals, dx=read.dx)
    if params.refit:
        tau_star, _ = _refit_winner(tau_reg, problem, params)
    else:
        tau_star = tau_reg
    bp_star = breakpoints(tau_star)
    events = extract_events(tau_star, bp_star, min_slope=read.dx / params.max_fork_speed)
    return SolveReport(
        tau_star=tau_star,
        tau_star_regularized=tau_reg,
        d_star=d_star,
        objective=f_star,
        per_candidate=results,
        breakpoints=bp_star,
        events=events,
        wall_ms=(time.perf_counter() - t_start) * 1e3,
    )
