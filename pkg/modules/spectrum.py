from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from modules.errors import DomainError
from modules.evolve import aux_for
from modules.hamiltonian import (
    DEFAULT_CAP,
    AnnealSetup,
    PauliSum,
    ProblemInstance,
    assemble,
    final_hamiltonian,
    initial_hamiltonian,
    lowest_eigenpairs,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("ramp", "no-aux", "x-aux", "y-aux", "z-aux")


@dataclass
class GapProfile:
    """
    Δ01(s) on a grid of normalized times.

    Attributes:
        grid (np.ndarray): Strictly increasing s values covering 0 and 1.
        gaps (np.ndarray): E1(s) − E0(s), never negative.
        strategy (str): ramp | no-aux | x-aux | y-aux | z-aux.
        instance_count (int): Number of profiles averaged.
        seeds (list): Instance seeds behind an ensemble average.
        dominance (float | None): Share of the grid where this gap is at least the ramp gap; set by the gap study.
    """

    grid: np.ndarray
    gaps: np.ndarray
    strategy: str = "ramp"
    instance_count: int = 1
    seeds: list = field(default_factory=list)
    dominance: Optional[float] = None


def default_grid(points: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0.0):
        raise DomainError("Grid must be strictly increasing with at least two points")
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise DomainError("Grid must start at 0 and end at 1")
    return grid


def lowest_two(H: PauliSum, cap: int = DEFAULT_CAP) -> tuple[float, float]:
    """
    The two smallest eigenvalues, sorted.

    Args:
        H (PauliSum): Operator.
        cap (int): Largest N accepted.

    Returns:
        tuple[float, float]: (E0, E1) with E1 ≥ E0.
    """
    values, _ = lowest_eigenpairs(H, 2, cap)
    e0, e1 = float(values[0]), float(values[1])
    return e0, max(e0, e1)


def gap_profile(setup: AnnealSetup, grid=None, strategy: str = "ramp", cap: int = DEFAULT_CAP) -> GapProfile:
    """Δ01(s) = E1(s) − E0(s) of H(s) at every grid point; degeneracy gives 0."""
    grid = _check_grid(default_grid() if grid is None else grid)
    gaps = np.empty(grid.size)
    for i, s in enumerate(grid):
        e0, e1 = lowest_two(assemble(setup, float(s)), cap)
        gaps[i] = max(e1 - e0, 0.0)
    return GapProfile(grid=grid, gaps=gaps, strategy=strategy)


def instance_setup(instance: ProblemInstance, schedules, aux_axis: Optional[str] = None, epsilon: float = 1.0) -> AnnealSetup:
    # Gap analysis is time-independent; AnnealSetup still needs a positive T.
    return AnnealSetup(
        h_initial=initial_hamiltonian(instance.n_qubits, epsilon),
        h_final=final_hamiltonian(instance),
        h_aux=aux_for(instance, aux_axis),
        schedules=tuple(schedules),
        total_time=1.0,
        epsilon=epsilon,
    )


def average_gap_profile(
    instances: Sequence[ProblemInstance],
    schedules,
    grid=None,
    aux_axis: Optional[str] = None,
    strategy: str = "ramp",
    epsilon: float = 1.0,
) -> GapProfile:
    """
    Pointwise mean of per-instance gap profiles.

    Args:
        instances (Sequence[ProblemInstance]): Ensemble members.
        schedules: One (F1, F2, F3) shared by every instance, or a list with one triple per instance.
        grid: Normalized times; 101 uniform points by default.
        aux_axis (str, optional): Axis of H_aux, None for no auxiliary term.
        strategy (str): Label stored in the profile.
        epsilon (float): Transverse-field scale.

    Returns:
        GapProfile: The averaged profile.
    """
    if not instances:
        raise DomainError("At least one instance is required")
    grid = _check_grid(default_grid() if grid is None else grid)
    per_instance = schedules if isinstance(schedules, list) else [schedules] * len(instances)
    if len(per_instance) != len(instances):
        raise DomainError("Need one schedule triple per instance")
    profiles = [
        gap_profile(instance_setup(inst, sched, aux_axis, epsilon), grid, strategy).gaps
        for inst, sched in zip(instances, per_instance)
    ]
    return GapProfile(
        grid=grid,
        gaps=np.mean(profiles, axis=0),
        strategy=strategy,
        instance_count=len(instances),
        seeds=[inst.seed for inst in instances],
    )


def mean_of_profiles(profiles: Sequence[GapProfile], strategy: str) -> GapProfile:
    """Averages already computed profiles sharing one grid."""
    grid = profiles[0].grid
    return GapProfile(
        grid=grid,
        gaps=np.mean([p.gaps for p in profiles], axis=0),
        strategy=strategy,
        instance_count=sum(p.instance_count for p in profiles),
        seeds=[s for p in profiles for s in p.seeds],
    )


def gap_summary(profile: GapProfile, tol: float = 1e-9) -> dict:
    """Minimum gap, its location, whether the profile is monotone, and its dominance over the ramp."""
    i = int(np.argmin(profile.gaps))
    steps = np.diff(profile.gaps)
    return {
        "strategy": profile.strategy,
        "min_gap": float(profile.gaps[i]),
        "s_at_min": float(profile.grid[i]),
        "monotone": bool(np.all(steps <= tol) or np.all(steps >= -tol)),
        "dominance": profile.dominance,
    }


def dominance_fraction(candidate: GapProfile, reference: GapProfile) -> float:
    """Share of grid points where candidate's gap is at least the reference's."""
    return float(np.mean(candidate.gaps >= reference.gaps - 1e-12))
