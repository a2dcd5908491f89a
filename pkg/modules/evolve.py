from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
import scipy.linalg

from modules.errors import DomainError, IntegrationError, UndefinedMetricError
from modules.hamiltonian import (
    AnnealSetup,
    CompiledPauli,
    PauliSum,
    ProblemInstance,
    aux_hamiltonian,
    apply,
    empty_sum,
    final_hamiltonian,
    ground_state,
    initial_hamiltonian,
    minus_state,
)
from modules.schedule import LinearSchedule, ramp_profile, schedules_from_params

logger = logging.getLogger(__name__)

# Columns recorded at every sample time.
OBSERVABLES = ("h_i", "h_f", "h_aux", "norm", "c_fi", "c_ai", "c_fa")


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Step control of the propagator.

    Attributes:
        dt_fraction (float): Initial step as a fraction of T (dt = T·dt_fraction).
        tol (float): Final-energy change that stops step halving.
        max_refinements (int): Halvings allowed before giving up.
        n_samples (int): Uniform sample times, both ends included.
        krylov_dim (int): Lanczos subspace size for each exponential.
        krylov_tol (float): Error estimate above which a step is split.
    """

    dt_fraction: float = 1.0 / 500.0
    tol: float = 1e-6
    max_refinements: int = 12
    n_samples: int = 1001
    krylov_dim: int = 12
    krylov_tol: float = 1e-12


@dataclass
class Trajectory:
    """
    Time-sampled record of one propagation.

    Attributes:
        times (np.ndarray): Sample times from 0 to T.
        observables (dict[str, np.ndarray]): ⟨H_i⟩, ⟨H_f⟩, ⟨H_aux⟩, the norm and the
            commutator expectations c_fi = i⟨[H_f,H_i]⟩, c_ai = i⟨[H_aux,H_i]⟩, c_fa = i⟨[H_f,H_aux]⟩.
        final_state (np.ndarray): ψ(T).
        states (np.ndarray | None): Sampled states, one row per time, when kept.
        dt (float): Step used by the accepted run.
        refinements (int): Number of halvings performed.
        energy_history (list[float]): Final ⟨H_f⟩ of each run in the refinement ladder.
    """

    times: np.ndarray
    observables: dict
    final_state: np.ndarray
    states: Optional[np.ndarray] = None
    dt: float = 0.0
    refinements: int = 0
    energy_history: list = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    def __getitem__(self, key: str) -> np.ndarray:
        return self.observables[key]

    def to_frame(self) -> pd.DataFrame:
        """Export columns t, <H_i>, <H_f>, <H_aux>, norm."""
        return pd.DataFrame({
            "t": self.times,
            "<H_i>": self.observables["h_i"],
            "<H_f>": self.observables["h_f"],
            "<H_aux>": self.observables["h_aux"],
            "norm": self.observables["norm"],
        })

    def save(self, path: str) -> None:
        arrays = {f"obs_{k}": v for k, v in self.observables.items()}
        if self.states is not None:
            arrays["states"] = self.states
        meta = {"dt": self.dt, "refinements": self.refinements, "energy_history": self.energy_history}
        np.savez_compressed(path, times=self.times, final_state=self.final_state, meta=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path: str) -> "Trajectory":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            observables = {k[4:]: data[k] for k in data.files if k.startswith("obs_")}
            return cls(
                times=data["times"],
                observables=observables,
                final_state=data["final_state"],
                states=data["states"] if "states" in data.files else None,
                dt=meta["dt"],
                refinements=meta["refinements"],
                energy_history=meta["energy_history"],
            )


@dataclass(frozen=True)
class EvolutionMetrics:
    final_energy: float
    percent_error: float
    fidelity: float
    ground_energy: float
    wall_time: float
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "final_energy": self.final_energy,
            "percent_error": self.percent_error,
            "fidelity": self.fidelity,
            "ground_energy": self.ground_energy,
            "wall_time": self.wall_time,
            **self.diagnostics,
        }


def expm_krylov(matvec, psi: np.ndarray, tau: float, krylov_dim: int = 12, tol: float = 1e-12) -> np.ndarray:
    """
    exp(−iτH)ψ by a Lanczos projection of the Hermitian operator behind matvec.

    The step is split in halves while the a-posteriori estimate
    β_m·|e_mᵀ exp(−iτT_m) e_1| exceeds tol.

    Args:
        matvec: Callable returning Hψ.
        psi (np.ndarray): Start vector.
        tau (float): Time step.
        krylov_dim (int): Maximum subspace size.
        tol (float): Accepted error estimate per step.

    Returns:
        np.ndarray: The propagated vector.
    """
    beta0 = np.linalg.norm(psi)
    if beta0 == 0.0:
        return psi.copy()
    dim = psi.size
    m = min(krylov_dim, dim)
    basis = np.zeros((m + 1, dim), dtype=complex)
    basis[0] = psi / beta0
    alpha = np.zeros(m)
    beta = np.zeros(m)
    k = m
    breakdown = False
    for j in range(m):
        w = matvec(basis[j])
        alpha[j] = np.vdot(basis[j], w).real
        # full reorthogonalization
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-13 * max(1.0, abs(alpha[j])) or j + 1 == dim:
            k = j + 1
            breakdown = True
            break
        basis[j + 1] = w / beta[j]
    if k == 1:
        evals, evecs = alpha[:1], np.ones((1, 1))
    else:
        evals, evecs = scipy.linalg.eigh_tridiagonal(alpha[:k], beta[: k - 1])
    coeffs = evecs @ (np.exp(-1j * tau * evals) * evecs[0, :])
    if not breakdown and beta[k - 1] * abs(coeffs[-1]) > tol:
        half = expm_krylov(matvec, psi, tau / 2.0, krylov_dim, tol)
        return expm_krylov(matvec, half, tau / 2.0, krylov_dim, tol)
    return beta0 * (coeffs @ basis[:k])


def _sample(compiled: tuple[CompiledPauli, CompiledPauli, CompiledPauli], psi: np.ndarray) -> list[float]:
    hi_psi, hf_psi, ha_psi = (c.matvec(psi) for c in compiled)
    return [
        np.vdot(psi, hi_psi).real,
        np.vdot(psi, hf_psi).real,
        np.vdot(psi, ha_psi).real,
        np.linalg.norm(psi),
        -2.0 * np.vdot(hf_psi, hi_psi).imag,
        -2.0 * np.vdot(ha_psi, hi_psi).imag,
        -2.0 * np.vdot(hf_psi, ha_psi).imag,
    ]


def _integrate(setup: AnnealSetup, psi0: np.ndarray, n_samples: int, substeps: int, config: IntegratorConfig, keep_states: bool):
    T = setup.total_time
    times = np.linspace(0.0, T, n_samples)
    interval = T / (n_samples - 1)
    dt = interval / substeps
    compiled = (setup.h_initial.compiled, setup.h_final.compiled, setup.h_aux.compiled)
    F1, F2, F3 = setup.schedules

    rows = [_sample(compiled, psi0)]
    states = [psi0.copy()] if keep_states else None
    psi = psi0.copy()
    for j in range(n_samples - 1):
        for n in range(substeps):
            s_mid = min((times[j] + (n + 0.5) * dt) / T, 1.0)
            H = CompiledPauli.combine([(F1(s_mid), compiled[0]), (F2(s_mid), compiled[1]), (F3(s_mid), compiled[2])])
            psi = expm_krylov(H.matvec, psi, dt, config.krylov_dim, config.krylov_tol)
        rows.append(_sample(compiled, psi))
        if keep_states:
            states.append(psi.copy())
    data = np.array(rows)
    observables = {name: data[:, i] for i, name in enumerate(OBSERVABLES)}
    return times, observables, psi, (np.array(states) if keep_states else None), dt


def evolve_fixed(
    setup: AnnealSetup,
    dt: float,
    n_samples: int = 2,
    config: IntegratorConfig = IntegratorConfig(),
    keep_states: bool = False,
) -> Trajectory:
    """Single run without refinement; the step is the largest ≤ dt that tiles every sample interval."""
    if not dt > 0.0 or n_samples < 2:
        raise DomainError(f"Need dt > 0 and at least two samples (dt={dt}, n_samples={n_samples})")
    T = setup.total_time
    substeps = max(1, math.ceil((T / (n_samples - 1)) / dt - 1e-9))
    times, observables, psi, states, used_dt = _integrate(
        setup, minus_state(setup.n_qubits), n_samples, substeps, config, keep_states
    )
    return Trajectory(times=times, observables=observables, final_state=psi, states=states, dt=used_dt,
                      energy_history=[float(observables["h_f"][-1])])


def propagate(
    setup: AnnealSetup,
    dt: Optional[float] = None,
    tol: Optional[float] = None,
    n_samples: Optional[int] = None,
    config: IntegratorConfig = IntegratorConfig(),
    keep_states: bool = False,
    psi0: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    Integrates i dψ/dt = H(t)ψ from ⊗|−⟩ with exponential-midpoint steps.

    The step is halved until the final ⟨H_f⟩ changes by less than tol between
    two successive runs; the finer run is returned.

    Args:
        setup (AnnealSetup): Evolution definition.
        dt (float, optional): Initial step; defaults to T·config.dt_fraction.
        tol (float, optional): Final-energy tolerance; defaults to config.tol.
        n_samples (int, optional): Sample count; defaults to config.n_samples.
        config (IntegratorConfig): Remaining step-control settings.
        keep_states (bool): Store the sampled states (needed for ρ̄).
        psi0 (np.ndarray, optional): Override of the initial state.

    Returns:
        Trajectory: The accepted run.

    Raises:
        DomainError: On a non-positive dt or tol, or fewer than two samples.
        IntegrationError: If max_refinements halvings do not converge.
    """
    T = setup.total_time
    dt = T * config.dt_fraction if dt is None else dt
    tol = config.tol if tol is None else tol
    n_samples = config.n_samples if n_samples is None else n_samples
    if not dt > 0.0 or not tol > 0.0:
        raise DomainError(f"dt and tol must be positive (dt={dt}, tol={tol})")
    if n_samples < 2:
        raise DomainError(f"At least two samples are required, got {n_samples}")
    psi0 = minus_state(setup.n_qubits) if psi0 is None else np.asarray(psi0, dtype=complex)

    substeps = max(1, math.ceil((T / (n_samples - 1)) / dt - 1e-9))
    previous = _integrate(setup, psi0, n_samples, substeps, config, keep_states)
    history = [float(previous[1]["h_f"][-1])]
    refinements = 0
    while True:
        substeps *= 2
        refinements += 1
        current = _integrate(setup, psi0, n_samples, substeps, config, keep_states)
        history.append(float(current[1]["h_f"][-1]))
        change = abs(history[-1] - history[-2])
        logger.debug("Refinement %d: dt=%.3e, <H_f>_T=%.12f, change=%.3e", refinements, current[4], history[-1], change)
        if change < tol:
            break
        if refinements >= config.max_refinements:
            raise IntegrationError("Step refinement did not converge", (history[-2], history[-1]), refinements)
        previous = current
    times, observables, psi, states, used_dt = current
    return Trajectory(
        times=times,
        observables=observables,
        final_state=psi,
        states=states,
        dt=used_dt,
        refinements=refinements,
        energy_history=history,
    )


def expectation(H: PauliSum, psi: np.ndarray) -> float:
    """
    Real part of ⟨ψ|H|ψ⟩.

    Raises:
        DomainError: If the imaginary part exceeds 1e-10.
    """
    value = np.vdot(psi, apply(H, psi))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise DomainError(f"Expectation of a Hermitian operator has imaginary part {value.imag:.3e}")
    return float(value.real)


def percent_error(psi_T: np.ndarray, H_f: PauliSum, E0: float, e_floor: float = 1e-8) -> float:
    """
    |(E0 − ⟨ψ_T|H_f|ψ_T⟩)/E0|·100.

    Raises:
        UndefinedMetricError: If |E0| ≤ e_floor.
    """
    if abs(E0) <= e_floor:
        raise UndefinedMetricError(f"Ground energy {E0:.3e} is within {e_floor:.1e} of zero; percentage error undefined")
    return abs((E0 - expectation(H_f, psi_T)) / E0) * 100.0


def fidelity(psi_T: np.ndarray, ground_basis: list[np.ndarray]) -> float:
    """Squared norm of the projection of ψ_T onto the ground eigenspace."""
    total = sum(abs(np.vdot(phi, psi_T)) ** 2 for phi in ground_basis)
    return float(min(max(total, 0.0), 1.0))


def aux_for(instance: ProblemInstance, aux_axis: Optional[str]) -> PauliSum:
    if aux_axis is None:
        return empty_sum(instance.n_qubits)
    return aux_hamiltonian(instance, aux_axis)


def ramp_setup(instance: ProblemInstance, total_time: float, epsilon: float = 1.0) -> AnnealSetup:
    """Exact linear ramp F1 = 1−s, F2 = s, F3 = 0."""
    return AnnealSetup(
        h_initial=initial_hamiltonian(instance.n_qubits, epsilon),
        h_final=final_hamiltonian(instance),
        h_aux=empty_sum(instance.n_qubits),
        schedules=ramp_profile(),
        total_time=total_time,
        epsilon=epsilon,
        labels={"strategy": "ramp"},
    )


def setup_from_params(
    instance: ProblemInstance,
    total_time: float,
    params,
    aux_axis: Optional[str] = "z",
    n_params: tuple[int, int, int] = (2, 2, 2),
    bounds=((0.0, 1.0),) * 3,
    epsilon: float = 1.0,
) -> AnnealSetup:
    """
    Setup whose schedules interpolate a flat parameter vector.

    Without an auxiliary axis, F3 carries no parameters and is identically zero.
    """
    if aux_axis is None:
        n_params = (n_params[0], n_params[1], 0)
    schedules = schedules_from_params(params, n_params, bounds)
    if aux_axis is None:
        schedules = (schedules[0], schedules[1], LinearSchedule(0.0, 0.0))
    return AnnealSetup(
        h_initial=initial_hamiltonian(instance.n_qubits, epsilon),
        h_final=final_hamiltonian(instance),
        h_aux=aux_for(instance, aux_axis),
        schedules=schedules,
        total_time=total_time,
        epsilon=epsilon,
        labels={"strategy": f"vcqa-{aux_axis or 'none'}"},
    )


def run_metrics(
    setup: AnnealSetup,
    config: IntegratorConfig = IntegratorConfig(),
    ground: Optional[tuple[float, list[np.ndarray]]] = None,
    keep_states: bool = False,
    n_samples: Optional[int] = None,
) -> tuple[EvolutionMetrics, Trajectory]:
    """
    Propagates a setup and scores ψ_T against the exact ground space of H_f.

    Args:
        setup (AnnealSetup): Evolution definition.
        config (IntegratorConfig): Step control.
        ground (tuple, optional): Precomputed (E0, basis) of H_f.
        keep_states (bool): Keep sampled states in the returned trajectory.
        n_samples (int, optional): Override of config.n_samples.

    Returns:
        tuple[EvolutionMetrics, Trajectory]: Metrics and the trajectory they came from.
    """
    start = time.perf_counter()
    trajectory = propagate(setup, config=config, keep_states=keep_states, n_samples=n_samples)
    e0, basis = ground if ground is not None else ground_state(setup.h_final)
    psi_T = trajectory.final_state
    metrics = EvolutionMetrics(
        final_energy=expectation(setup.h_final, psi_T),
        percent_error=percent_error(psi_T, setup.h_final, e0),
        fidelity=fidelity(psi_T, basis),
        ground_energy=e0,
        wall_time=time.perf_counter() - start,
        diagnostics={
            "dt": trajectory.dt,
            "refinements": trajectory.refinements,
            "norm_drift": float(np.max(np.abs(trajectory["norm"] - 1.0))),
        },
    )
    logger.debug("Run finished: E%%=%.4f, F=%.4f, dt=%.3e", metrics.percent_error, metrics.fidelity, trajectory.dt)
    return metrics, trajectory
