from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import pandas as pd

from modules.errors import DomainError, ScheduleValidationError

logger = logging.getLogger(__name__)

# Fixed boundary values (F(0), F(1)) of each schedule role.
BOUNDARY = {
    "F1": (1.0, 0.0),
    "F2": (0.0, 1.0),
    "F3": (0.0, 0.0),
}

CONVENTION = {
    "h3_sign": "standard",
    "endpoint_slopes": "zero",
    "knots": "uniform",
}


def convention() -> dict[str, str]:
    """Returns the interpolation convention flags recorded in every result file."""
    return dict(CONVENTION)


@dataclass(frozen=True)
class ScheduleSpec:
    """
    Variational parameters of one schedule function.

    Attributes:
        boundary (tuple[float, float]): Fixed values (p_{j,0}, p_{j,f}); not seen by the optimizer.
        params (tuple[float, ...]): Interior knot values p_{j,1..N_j}.
        bounds (tuple[float, float]): Box constraint (p_lo, p_hi) on every interior value.
    """

    boundary: tuple[float, float]
    params: tuple[float, ...] = ()
    bounds: tuple[float, float] = (0.0, 1.0)

    @classmethod
    def for_role(cls, role: str, params=(), bounds: tuple[float, float] = (0.0, 1.0)) -> "ScheduleSpec":
        """
        Builds a spec whose boundary values follow the schedule's role.

        Args:
            role (str): One of "F1", "F2", "F3".
            params: Interior knot values.
            bounds (tuple[float, float]): Box constraint for the interior values.

        Returns:
            ScheduleSpec: The spec with boundary taken from BOUNDARY.
        """
        if role not in BOUNDARY:
            raise DomainError(f"Unknown schedule role: {role}")
        return cls(boundary=BOUNDARY[role], params=tuple(float(p) for p in params), bounds=tuple(bounds))

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_params + 1)

    def validate(self) -> None:
        """Raises ScheduleValidationError listing every interior value outside the bounds."""
        lo, hi = self.bounds
        if lo > hi:
            raise ScheduleValidationError(f"Empty bounds [{lo}, {hi}]", [])
        bad = [i + 1 for i, p in enumerate(self.params) if not (lo <= p <= hi) or not np.isfinite(p)]
        if bad:
            raise ScheduleValidationError(f"Schedule parameters outside [{lo}, {hi}]", bad)


@dataclass(frozen=True, eq=False)
class PiecewiseHermite:
    """
    A C¹ monotone piecewise cubic Hermite schedule on equally spaced knots.

    Attributes:
        knots (np.ndarray): x_k = kΔ for k = 0..N+1.
        values (np.ndarray): p_k at each knot.
        slopes (np.ndarray): m_k at each knot (per unit normalized time).
    """

    knots: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    spacing: float = field(init=False)

    def __post_init__(self):
        for name in ("knots", "values", "slopes"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "spacing", 1.0 / (len(self.knots) - 1))

    def _locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > 1.0) or np.any(~np.isfinite(x)):
            raise DomainError(f"Schedule argument outside [0, 1]: {x}")
        n_pieces = len(self.knots) - 1
        k = np.minimum(np.floor(x / self.spacing).astype(int), n_pieces - 1)
        t_hat = np.clip((x - self.knots[k]) / self.spacing, 0.0, 1.0)
        # x = 1 must hit the last knot exactly
        t_hat = np.where(x >= 1.0, 1.0, t_hat)
        return k, t_hat

    def __call__(self, x):
        k, t = self._locate(x)
        h0, h1, h2, h3 = hermite_basis(t)
        d = self.spacing
        out = h0 * self.values[k] + h1 * self.values[k + 1] + d * (h2 * self.slopes[k] + h3 * self.slopes[k + 1])
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, x):
        k, t = self._locate(x)
        d0 = 6.0 * t * t - 6.0 * t
        d2 = 3.0 * t * t - 4.0 * t + 1.0
        d3 = 3.0 * t * t - 2.0 * t
        d = self.spacing
        out = (d0 * (self.values[k] - self.values[k + 1])) / d + d2 * self.slopes[k] + d3 * self.slopes[k + 1]
        return float(out) if np.ndim(out) == 0 else out

    def second_derivative(self, x):
        k, t = self._locate(x)
        dd0 = 12.0 * t - 6.0
        dd2 = 6.0 * t - 4.0
        dd3 = 6.0 * t - 2.0
        d = self.spacing
        out = (dd0 * (self.values[k] - self.values[k + 1])) / (d * d) + (dd2 * self.slopes[k] + dd3 * self.slopes[k + 1]) / d
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LinearSchedule:
    """Exact affine schedule F(x) = intercept + slope·x, used for the ramp."""

    intercept: float
    slope: float

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > 1.0) or np.any(~np.isfinite(x)):
            raise DomainError(f"Schedule argument outside [0, 1]: {x}")
        return x

    def __call__(self, x):
        out = self.intercept + self.slope * self._check(x)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, x):
        out = np.full(np.shape(self._check(x)), self.slope)
        return float(out) if np.ndim(out) == 0 else out

    def second_derivative(self, x):
        out = np.zeros(np.shape(self._check(x)))
        return float(out) if np.ndim(out) == 0 else out


Schedule = Union[PiecewiseHermite, LinearSchedule]


def hermite_basis(t_hat):
    """
    Cubic Hermite basis on the unit interval.

    h3 uses the standard sign t̂²(t̂−1), which makes each piece's right-end
    derivative equal to the slope stored at that knot.

    Args:
        t_hat: Scalar or array in [0, 1].

    Returns:
        tuple: (h0, h1, h2, h3) with the same shape as t_hat.

    Raises:
        DomainError: If any t_hat is outside [0, 1].
    """
    t = np.asarray(t_hat, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0) or np.any(~np.isfinite(t)):
        raise DomainError(f"Hermite parameter outside [0, 1]: {t_hat}")
    one_minus = 1.0 - t
    h0 = (1.0 + 2.0 * t) * one_minus * one_minus
    h1 = t * t * (3.0 - 2.0 * t)
    h2 = t * one_minus * one_minus
    h3 = t * t * (t - 1.0)
    if np.ndim(t) == 0:
        return float(h0), float(h1), float(h2), float(h3)
    return h0, h1, h2, h3


def monotone_slopes(values, spacing: float) -> np.ndarray:
    """
    Knot slopes by the harmonic-mean rule; zero at sign changes and at both ends.

    Args:
        values: Knot values p_0..p_{N+1}.
        spacing (float): Uniform knot spacing Δ.

    Returns:
        np.ndarray: Slopes m_0..m_{N+1}.

    Raises:
        DomainError: With fewer than two points or a non-positive spacing.
    """
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DomainError("At least two knot values are required")
    if not spacing > 0.0:
        raise DomainError(f"Knot spacing must be positive, got {spacing}")
    slopes = np.zeros_like(p)
    left = p[1:-1] - p[:-2]
    right = p[2:] - p[1:-1]
    same_sign = left * right > 0.0
    total = p[2:] - p[:-2]
    safe_total = np.where(same_sign, total, 1.0)
    slopes[1:-1] = np.where(same_sign, 2.0 * left * right / (spacing * safe_total), 0.0)
    return slopes


def build_schedule(spec: ScheduleSpec) -> PiecewiseHermite:
    """
    Interpolates the knots (0, p_0), (Δ, p_1), ..., (1, p_f) of a spec.

    Args:
        spec (ScheduleSpec): Validated against its bounds first.

    Returns:
        PiecewiseHermite: The interpolating schedule.
    """
    spec.validate()
    values = np.array([spec.boundary[0], *spec.params, spec.boundary[1]], dtype=float)
    knots = np.arange(values.size) * spec.spacing
    knots[-1] = 1.0
    return PiecewiseHermite(knots=knots, values=values, slopes=monotone_slopes(values, spec.spacing))


def eval_schedule(F: Schedule, x):
    """Evaluates F at normalized time x ∈ [0, 1]."""
    return F(x)


def eval_schedule_derivative(F: Schedule, x):
    """Analytic dF/dx at normalized time x ∈ [0, 1]."""
    return F.derivative(x)


def eval_schedule_second_derivative(F: Schedule, x):
    """Analytic d²F/dx² of the piece containing x (right piece at interior knots)."""
    return F.second_derivative(x)


def ramp_profile() -> tuple[LinearSchedule, LinearSchedule, LinearSchedule]:
    """Returns the exact linear ramp F1 = 1−x, F2 = x, F3 = 0."""
    return LinearSchedule(1.0, -1.0), LinearSchedule(0.0, 1.0), LinearSchedule(0.0, 0.0)


def ramp_equivalent_specs(
    n_params: tuple[int, int, int] = (2, 2, 2),
    bounds: tuple[tuple[float, float], ...] = ((0.0, 1.0),) * 3,
) -> tuple[ScheduleSpec, ScheduleSpec, ScheduleSpec]:
    """
    Specs whose knots sit on the linear ramp, with a zero auxiliary schedule.

    With flat endpoint slopes the interpolant matches the ramp at every knot but
    bends over the first and last pieces.

    Args:
        n_params (tuple[int, int, int]): Interior knot counts for F1, F2, F3.
        bounds: Per-schedule box constraints.

    Returns:
        tuple: Three ScheduleSpecs.
    """
    n1, n2, n3 = n_params
    f1 = [1.0 - (k + 1) / (n1 + 1) for k in range(n1)]
    f2 = [(k + 1) / (n2 + 1) for k in range(n2)]
    f3 = [min(max(0.0, bounds[2][0]), bounds[2][1])] * n3
    return (
        ScheduleSpec.for_role("F1", f1, bounds[0]),
        ScheduleSpec.for_role("F2", f2, bounds[1]),
        ScheduleSpec.for_role("F3", f3, bounds[2]),
    )


def ramp_equivalent_params(n_params: tuple[int, int, int] = (2, 2, 2), bounds=((0.0, 1.0),) * 3) -> np.ndarray:
    """Flat optimizer vector of ramp_equivalent_specs."""
    specs = ramp_equivalent_specs(n_params, bounds)
    return np.array([p for spec in specs for p in spec.params], dtype=float)


def split_params(
    params,
    n_params: tuple[int, int, int] = (2, 2, 2),
    bounds: tuple[tuple[float, float], ...] = ((0.0, 1.0),) * 3,
) -> tuple[ScheduleSpec, ScheduleSpec, ScheduleSpec]:
    """
    Splits a flat parameter vector into the three schedule specs.

    The layout is F1 first, then F2, then F3.

    Args:
        params: Vector of length n1 + n2 + n3.
        n_params (tuple[int, int, int]): Interior knot counts.
        bounds: Per-schedule box constraints.

    Returns:
        tuple: (spec1, spec2, spec3).

    Raises:
        DomainError: If the vector length does not match n_params.
    """
    params = np.asarray(params, dtype=float).ravel()
    n1, n2, n3 = n_params
    if params.size != n1 + n2 + n3:
        raise DomainError(f"Expected {n1 + n2 + n3} parameters, got {params.size}")
    return (
        ScheduleSpec.for_role("F1", params[:n1], bounds[0]),
        ScheduleSpec.for_role("F2", params[n1:n1 + n2], bounds[1]),
        ScheduleSpec.for_role("F3", params[n1 + n2:], bounds[2]),
    )


def schedules_from_params(params, n_params=(2, 2, 2), bounds=((0.0, 1.0),) * 3) -> tuple[Schedule, Schedule, Schedule]:
    """Builds (F1, F2, F3) from a flat vector; a schedule with no parameters and zero boundary is exactly zero."""
    specs = split_params(params, n_params, bounds)
    return tuple(build_schedule(spec) for spec in specs)


def dump_schedules(schedules: tuple[Schedule, Schedule, Schedule], n_points: int = 101) -> pd.DataFrame:
    """
    Samples (F1, F2, F3) on a uniform grid.

    Args:
        schedules (tuple): The three schedule functions.
        n_points (int): Number of grid points including both ends.

    Returns:
        pd.DataFrame: Columns x, F1, F2, F3.
    """
    if n_points < 2:
        raise DomainError("A schedule dump needs at least two grid points")
    x = np.linspace(0.0, 1.0, n_points)
    f1, f2, f3 = schedules
    return pd.DataFrame({"x": x, "F1": f1(x), "F2": f2(x), "F3": f3(x)})
