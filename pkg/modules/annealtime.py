from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.integrate

from modules.errors import DegenerateDynamicsError, DivergentLimitError, DomainError, SingularScheduleError
from modules.evolve import Trajectory
from modules.hamiltonian import AnnealSetup, PauliSum, apply
from modules.schedule import (
    Schedule,
    eval_schedule,
    eval_schedule_derivative,
    eval_schedule_second_derivative,
)

logger = logging.getLogger(__name__)

COMMUTE_TOL = 1e-10
ZERO_TOL = 1e-14


@dataclass
class AnnealTimeReport:
    """
    Predicted annealing time next to the simulated one.

    Attributes:
        t_f_actual (float): T of the simulated run.
        t_f_predicted (float): Prediction from the full numerator, boundary term included when nonzero.
        t_f_predicted_printed (float): Prediction from the numerator ⟨H_i⟩_T + ⟨H_f⟩_0 − ⟨H_f⟩_T + C.
        coefficient_C (float): The schedule correction integral.
        denominator (float): i·Tr(ρ̄[H_f, H_i]).
        boundary_term_tf (float): Limit of R31⟨H_aux⟩/FΣ at t_f.
        boundary_included (bool): Whether boundary_term_tf entered t_f_predicted.
        reduced (bool): True when F3 ≡ 0 and FΣ ≡ 1, so C and the boundary term vanish identically.
        residual (float): |t_f_predicted − T|/T.
        ehrenfest (dict): Max-abs Ehrenfest residual per observable.
        skipped (str | None): Reason the prediction was withheld.
    """

    t_f_actual: float
    t_f_predicted: float = math.nan
    t_f_predicted_printed: float = math.nan
    coefficient_C: float = math.nan
    denominator: float = math.nan
    boundary_term_tf: float = math.nan
    boundary_included: bool = False
    reduced: bool = False
    residual: float = math.nan
    ehrenfest: dict = field(default_factory=dict)
    skipped: Optional[str] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class EhrenfestResiduals:
    """Finite-difference derivative minus the commutator right-hand side, at interior samples."""

    times: np.ndarray
    series: dict

    def max_abs(self) -> dict[str, float]:
        return {k: float(np.max(np.abs(v))) for k, v in self.series.items()}

    def rms(self) -> dict[str, float]:
        return {k: float(np.sqrt(np.mean(v * v))) for k, v in self.series.items()}


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    w = np.zeros(times.size)
    h = np.diff(times)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    return w


def time_averaged_density(traj: Trajectory) -> np.ndarray:
    """
    ρ̄ = (1/T)∫|ψ(t)⟩⟨ψ(t)|dt by the trapezoid rule over the sampled states.

    Raises:
        DomainError: If the trajectory was propagated without keep_states.
    """
    if traj.states is None:
        raise DomainError("Trajectory carries no states; propagate with keep_states=True")
    w = trapezoid_weights(traj.times) / traj.total_time
    states = np.asarray(traj.states)
    return (states.T * w) @ states.conj()


def commutator_expectation(rho, A: PauliSum, B: PauliSum) -> float:
    """
    i·Tr(ρ[A, B]) for a density matrix, or i⟨ψ|[A, B]|ψ⟩ for a state vector.

    Raises:
        DomainError: If the result carries an imaginary residue above 1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        value = complex(-2.0 * np.vdot(apply(A, rho), apply(B, rho)).imag)
    else:
        value = complex(np.trace(rho @ A.icommutator(B).to_dense()))
    if abs(value.imag) > 1e-10:
        raise DomainError(f"Commutator expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def ehrenfest_residual(traj: Trajectory, setup: AnnealSetup) -> EhrenfestResiduals:
    """
    Checks d⟨H_x⟩/dt against its commutator right-hand side.

    With c_fi = i⟨[H_f,H_i]⟩, c_ai = i⟨[H_aux,H_i]⟩ and c_fa = i⟨[H_f,H_aux]⟩:

        d⟨H_i⟩/dt   =  F2·c_fi + F3·c_ai
        d⟨H_f⟩/dt   = −F1·c_fi − F3·c_fa
        d⟨H_aux⟩/dt = −F1·c_ai + F2·c_fa

    Derivatives are central differences, so the residual falls with the square
    of the sampling interval.
    """
    t = traj.times
    if t.size < 3:
        raise DomainError("Central differences need at least three samples")
    s = t[1:-1] / traj.total_time
    f1, f2, f3 = (eval_schedule(F, s) for F in setup.schedules)
    inner = slice(1, -1)
    c_fi, c_ai, c_fa = (traj[k][inner] for k in ("c_fi", "c_ai", "c_fa"))

    def rate(values):
        return (values[2:] - values[:-2]) / (t[2:] - t[:-2])

    series = {
        "h_i": rate(traj["h_i"]) - (f2 * c_fi + f3 * c_ai),
        "h_f": rate(traj["h_f"]) - (-f1 * c_fi - f3 * c_fa),
        "h_aux": rate(traj["h_aux"]) - (-f1 * c_ai + f2 * c_fa),
    }
    return EhrenfestResiduals(times=t[inner], series=series)


def endpoint_ratio_limit(F3: Schedule, F1: Schedule, tol: float = 1e-12) -> float:
    """
    lim_{s→1} F3(s)/F1(s), escalating from values to first and then second derivatives.

    Raises:
        DivergentLimitError: If the limit is infinite.
        SingularScheduleError: If F3 and F1 both vanish at s=1 up to second derivatives.
    """
    orders = (eval_schedule, eval_schedule_derivative, eval_schedule_second_derivative)
    for order, evaluate in enumerate(orders):
        num, den = evaluate(F3, 1.0), evaluate(F1, 1.0)
        if abs(den) > tol:
            return num / den
        if abs(num) > tol:
            raise DivergentLimitError(f"F3/F1 diverges at s=1 (order {order}: {num:.3e}/{den:.3e})")
    raise SingularScheduleError("F3/F1 stays indeterminate at s=1 up to second derivatives")


def _check_grid(schedules, n_cells: int) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, 4 * n_cells + 1)
    knots = [getattr(F, "knots", np.array([])) for F in schedules]
    return np.unique(np.concatenate([grid, *knots]))


def check_schedules(schedules, n_cells: int = 1000) -> None:
    """
    Raises SingularScheduleError where the integrand of C is undefined.

    FΣ must stay positive on [0, 1] and F1 may vanish inside (0, 1) only where F3 does too.
    """
    F1, F2, F3 = schedules
    s = _check_grid(schedules, n_cells)
    f1, f2, f3 = (eval_schedule(F, s) for F in (F1, F2, F3))
    if np.any(f1 + f2 <= ZERO_TOL):
        where = s[np.argmax(f1 + f2 <= ZERO_TOL)]
        raise SingularScheduleError(f"F1 + F2 vanishes at s={where:.6f}")
    interior = (s > 0.0) & (s < 1.0)
    bad = interior & (np.abs(f1) <= ZERO_TOL) & (np.abs(f3) > ZERO_TOL)
    if np.any(bad):
        raise SingularScheduleError(f"F1 vanishes at s={s[np.argmax(bad)]:.6f} while F3 does not")


def is_reduced(schedules, n_cells: int = 1000, tol: float = 1e-12) -> bool:
    """True when F3 ≡ 0 and FΣ ≡ 1 on the check grid."""
    F1, F2, F3 = schedules
    s = _check_grid(schedules, n_cells)
    return bool(np.all(np.abs(eval_schedule(F3, s)) <= tol) and np.all(np.abs(eval_schedule(F1, s) + eval_schedule(F2, s) - 1.0) <= tol))


def _integrand_factors(schedules, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d/ds(1/FΣ) and d/ds(R31/FΣ) at points strictly inside (0, 1)."""
    F1, F2, F3 = schedules
    f1, f2, f3 = (eval_schedule(F, s) for F in (F1, F2, F3))
    d1, d2, d3 = (eval_schedule_derivative(F, s) for F in (F1, F2, F3))
    fs = f1 + f2
    ds = d1 + d2
    inv_sum = -ds / (fs * fs)
    active = np.abs(f1) > ZERO_TOL
    safe_f1 = np.where(active, f1, 1.0)
    # d/ds [F3/(F1·FΣ)]
    ratio = (d3 * safe_f1 * fs - f3 * (d1 * fs + safe_f1 * ds)) / (safe_f1 * fs) ** 2
    return inv_sum, np.where(active, ratio, 0.0)


def coefficient_C(traj: Trajectory, schedules, h_final: PauliSum, h_aux: PauliSum, stride: int = 1) -> float:
    """
    The correction integral

        C = ∫_0^T [(⟨H_f⟩ − ⟨H_i⟩)·d/dt(1/FΣ) − ⟨H_aux⟩·d/dt(R31/FΣ)] dt

    with FΣ = F1 + F2 and R31 = F3/F1. Since d/dt = (1/T)d/ds the integral is
    evaluated over s by the open midpoint rule, with cell-midpoint expectations
    averaged from neighbouring samples and analytic schedule derivatives.

    Args:
        traj (Trajectory): Sampled run; only every stride-th sample is used.
        schedules (tuple): (F1, F2, F3).
        h_final (PauliSum): H_f.
        h_aux (PauliSum): H_aux; must commute with H_f.
        stride (int): Subsampling factor for resolution checks.

    Returns:
        float: C in units of energy·time.

    Raises:
        DomainError: If [H_f, H_aux] ≠ 0 or the samples are not uniform in time.
        SingularScheduleError: If FΣ or F1 vanishes where the integrand needs it.
    """
    if h_final.icommutator(h_aux).norm() >= COMMUTE_TOL:
        raise DomainError("C is defined only for an auxiliary term commuting with H_f")
    idx = np.arange(0, traj.times.size, stride)
    if idx[-1] != traj.times.size - 1:
        raise DomainError(f"Stride {stride} does not divide the {traj.times.size - 1} sample intervals")
    s = traj.times[idx] / traj.total_time
    h = np.diff(s)
    if not np.allclose(h, h[0], rtol=1e-9):
        raise DomainError("C needs uniformly spaced samples")
    check_schedules(schedules, n_cells=s.size - 1)

    mid = (s[:-1] + s[1:]) / 2.0

    def at_mid(key):
        values = traj[key][idx]
        return (values[:-1] + values[1:]) / 2.0

    inv_sum, ratio = _integrand_factors(schedules, mid)
    integrand = (at_mid("h_f") - at_mid("h_i")) * inv_sum - at_mid("h_aux") * ratio
    return float(np.sum(integrand * h))


def annealing_time_prediction(
    traj: Trajectory,
    setup: AnnealSetup,
    boundary_tol: float = 1e-10,
    denominator_tol: float = 1e-10,
) -> AnnealTimeReport:
    """
    Predicts T from the endpoint expectations, C and the time-averaged commutator.

    The full numerator is ⟨H_i⟩_T − ⟨H_f⟩_T − ⟨H_i⟩_0 + ⟨H_f⟩_0 + C, plus the
    boundary term R31⟨H_aux⟩/FΣ at t_f when it exceeds boundary_tol. The
    denominator is the trapezoid time average of i⟨[H_f,H_i]⟩, which equals
    i·Tr(ρ̄[H_f,H_i]). When F3 ≡ 0 and FΣ ≡ 1, C and the boundary term are
    zero and are not integrated.

    Args:
        traj (Trajectory): Run of setup sampled uniformly in time.
        setup (AnnealSetup): The evolution that produced traj.
        boundary_tol (float): Threshold for including the boundary term.
        denominator_tol (float): Smallest |denominator| accepted.

    Returns:
        AnnealTimeReport: The report; skipped is set for a non-commuting auxiliary term.

    Raises:
        DegenerateDynamicsError: If |denominator| ≤ denominator_tol.
        SingularScheduleError: If FΣ or F1 vanishes where the integrand needs it, or
            the boundary limit stays indeterminate.
        DivergentLimitError: If the boundary limit is infinite.
    """
    T = traj.total_time
    report = AnnealTimeReport(t_f_actual=T)
    if setup.h_final.icommutator(setup.h_aux).norm() >= COMMUTE_TOL:
        report.skipped = "auxiliary term does not commute with H_f"
        logger.warning("Annealing-time prediction skipped: %s", report.skipped)
        return report

    report.denominator = float(scipy.integrate.trapezoid(traj["c_fi"], traj.times) / T)
    if abs(report.denominator) <= denominator_tol:
        raise DegenerateDynamicsError(
            f"i·Tr(ρ̄[H_f,H_i]) = {report.denominator:.3e} is within {denominator_tol:.1e} of zero"
        )

    hi, hf = traj["h_i"], traj["h_f"]
    report.reduced = is_reduced(setup.schedules)
    if report.reduced:
        report.coefficient_C = 0.0
        report.boundary_term_tf = 0.0
    else:
        F1, F2, F3 = setup.schedules
        report.coefficient_C = coefficient_C(traj, setup.schedules, setup.h_final, setup.h_aux)
        if setup.h_aux.terms:
            f_sum = eval_schedule(F1, 1.0) + eval_schedule(F2, 1.0)
            report.boundary_term_tf = endpoint_ratio_limit(F3, F1) * float(traj["h_aux"][-1]) / f_sum
        else:
            report.boundary_term_tf = 0.0

    numerator = hi[-1] - hf[-1] - hi[0] + hf[0] + report.coefficient_C
    report.boundary_included = bool(abs(report.boundary_term_tf) > boundary_tol)
    if report.boundary_included:
        numerator += report.boundary_term_tf
    report.t_f_predicted = float(numerator / report.denominator)
    report.t_f_predicted_printed = float((hi[-1] + hf[0] - hf[-1] + report.coefficient_C) / report.denominator)
    report.residual = abs(report.t_f_predicted - T) / T
    if traj.times.size >= 3:
        report.ehrenfest = ehrenfest_residual(traj, setup).max_abs()
    logger.info("Annealing time: predicted %.6f vs actual %.6f (residual %.2e)", report.t_f_predicted, T, report.residual)
    return report
