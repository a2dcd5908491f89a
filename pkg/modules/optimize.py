from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.optimize

from modules.errors import CostEvaluationError, DomainError, OptimizationError, VCQAError
from modules.evolve import EvolutionMetrics, IntegratorConfig, propagate, run_metrics, setup_from_params
from modules.hamiltonian import ProblemInstance
from modules.schedule import ramp_equivalent_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Budget and box of the bounded simplex search.

    Attributes:
        max_evals (int): Cost evaluations allowed per start.
        restarts (int): Independent starts; the first is the ramp-equivalent point.
        init_scale (float): Initial simplex edge as a fraction of each box width.
        seed (int): Seed of the randomized starts.
        xatol (float): Simplex size at which a start stops.
        fatol (float): Cost spread at which a start stops.
        n_params (tuple[int, int, int]): Interior knots per schedule.
        bounds (tuple): (low, high) box per schedule.
    """

    max_evals: int = 400
    restarts: int = 3
    init_scale: float = 0.1
    seed: int = 0
    xatol: float = 1e-4
    fatol: float = 1e-8
    n_params: tuple = (2, 2, 2)
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        if self.restarts < 1:
            raise DomainError(f"At least one start is required, got {self.restarts}")
        if self.max_evals < sum(self.n_params) + 2:
            raise DomainError(f"max_evals={self.max_evals} is below dimension + 2 = {sum(self.n_params) + 2}")
        if not 0.0 < self.init_scale <= 1.0:
            raise DomainError(f"init_scale must lie in (0, 1], got {self.init_scale}")
        for low, high in self.bounds:
            if not low < high:
                raise DomainError(f"Empty parameter box [{low}, {high}]")

    def layout(self, aux_axis: Optional[str]) -> tuple[int, int, int]:
        """Knot counts actually optimized; no auxiliary axis means no F3 parameters."""
        n1, n2, n3 = self.n_params
        return (n1, n2, 0) if aux_axis is None else (n1, n2, n3)

    def box(self, aux_axis: Optional[str]) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate lower and upper limits of the flat parameter vector."""
        counts = self.layout(aux_axis)
        lower = np.concatenate([[b[0]] * n for b, n in zip(self.bounds, counts)]).astype(float)
        upper = np.concatenate([[b[1]] * n for b, n in zip(self.bounds, counts)]).astype(float)
        return lower, upper


@dataclass
class OptimizationResult:
    """
    Outcome of a multi-start search.

    Attributes:
        best_params (np.ndarray): Best point found, inside the box.
        best_cost (float): Cost at best_params.
        eval_count (int): Evaluations over all starts.
        cost_history (list[float]): Every evaluated cost in call order (+inf for failures).
        converged (bool): Whether the start that produced best_params met its tolerances.
        start_costs (list[float]): Best cost of each start.
        failures (int): Evaluations that raised and were scored +inf.
    """

    best_params: np.ndarray
    best_cost: float
    eval_count: int
    cost_history: list = field(default_factory=list)
    converged: bool = False
    start_costs: list = field(default_factory=list)
    failures: int = 0

    def running_minimum(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.cost_history, dtype=float))

    def as_dict(self) -> dict:
        return {
            "best_params": [float(p) for p in self.best_params],
            "best_cost": self.best_cost,
            "eval_count": self.eval_count,
            "converged": self.converged,
            "start_costs": self.start_costs,
            "failures": self.failures,
        }


def cost(
    params,
    instance: ProblemInstance,
    total_time: float,
    aux_axis: Optional[str] = "z",
    config: OptimizerConfig = OptimizerConfig(),
    integrator: IntegratorConfig = IntegratorConfig(),
    epsilon: float = 1.0,
) -> float:
    """
    Final energy ⟨ψ_T|H_f|ψ_T⟩ reached with the schedules encoded by params.

    Args:
        params: Flat vector laid out F1, F2, F3 (no F3 block without an aux axis).
        instance (ProblemInstance): Problem to anneal.
        total_time (float): T in units of 1/ε.
        aux_axis (str, optional): Axis of H_aux; None drops the auxiliary term.
        config (OptimizerConfig): Supplies the layout and box.
        integrator (IntegratorConfig): Step control.
        epsilon (float): Transverse-field scale.

    Returns:
        float: The final energy.

    Raises:
        CostEvaluationError: If building or propagating the setup fails.
    """
    try:
        setup = setup_from_params(
            instance, total_time, params, aux_axis, config.layout(aux_axis), config.bounds, epsilon
        )
        trajectory = propagate(setup, n_samples=2, config=integrator)
    except VCQAError as err:
        raise CostEvaluationError(f"Cost evaluation failed: {type(err).__name__}: {err}") from err
    return float(trajectory["h_f"][-1])


def initial_simplex(x0: np.ndarray, lower: np.ndarray, upper: np.ndarray, scale: float) -> np.ndarray:
    """x0 plus one vertex per coordinate, stepped inward where x0 sits near the upper face."""
    step = scale * (upper - lower)
    vertices = [x0]
    for i in range(x0.size):
        v = x0.copy()
        v[i] = x0[i] + step[i] if x0[i] + step[i] <= upper[i] else x0[i] - step[i]
        vertices.append(v)
    return np.array(vertices)


def _starts(x_ramp: np.ndarray, lower: np.ndarray, upper: np.ndarray, restarts: int, rng: np.random.Generator) -> list[np.ndarray]:
    starts = [np.clip(x_ramp, lower, upper)]
    for _ in range(restarts - 1):
        starts.append(lower + rng.random(lower.size) * (upper - lower))
    return starts


def minimize(
    instance: ProblemInstance,
    total_time: float,
    aux_axis: Optional[str] = "z",
    config: OptimizerConfig = OptimizerConfig(),
    integrator: IntegratorConfig = IntegratorConfig(),
    cost_fn: Optional[Callable[[np.ndarray], float]] = None,
    epsilon: float = 1.0,
) -> OptimizationResult:
    """
    Multi-start bounded Nelder–Mead over the schedule parameters.

    Every candidate is clipped to the box before it is evaluated, and a cost
    that raises CostEvaluationError counts as +inf.

    Args:
        instance (ProblemInstance): Problem to anneal; its seed enters the start stream.
        total_time (float): T in units of 1/ε.
        aux_axis (str, optional): Axis of H_aux, None for the four-parameter search.
        config (OptimizerConfig): Budget, box and seed.
        integrator (IntegratorConfig): Step control of each cost evaluation.
        cost_fn (Callable, optional): Replacement objective taking the flat vector.
        epsilon (float): Transverse-field scale.

    Returns:
        OptimizationResult: Best point over all starts.

    Raises:
        OptimizationError: If no start produced a finite cost.
    """
    layout = config.layout(aux_axis)
    lower, upper = config.box(aux_axis)
    if cost_fn is None:
        def cost_fn(x):
            return cost(x, instance, total_time, aux_axis, config, integrator, epsilon)

    history: list[float] = []
    failures = 0

    def objective(x: np.ndarray) -> float:
        nonlocal failures
        x = np.clip(x, lower, upper)
        try:
            value = float(cost_fn(x))
        except CostEvaluationError as err:
            logger.warning("Scoring failed evaluation as +inf: %s", err)
            failures += 1
            value = np.inf
        history.append(value)
        return value

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, instance.seed or 0]))
    starts = _starts(ramp_equivalent_params(layout, config.bounds), lower, upper, config.restarts, rng)

    best = None
    start_costs = []
    for k, x0 in enumerate(starts):
        result = scipy.optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lower, upper)),
            options={
                "maxfev": config.max_evals,
                "initial_simplex": initial_simplex(x0, lower, upper, config.init_scale),
                "xatol": config.xatol,
                "fatol": config.fatol,
            },
        )
        start_costs.append(float(result.fun))
        logger.debug("Start %d: cost=%.10f after %d evaluations (success=%s)", k, result.fun, result.nfev, result.success)
        if np.isfinite(result.fun) and (best is None or result.fun < best.fun):
            best = result

    if best is None:
        raise OptimizationError(f"None of {len(starts)} starts produced a finite cost")
    return OptimizationResult(
        best_params=np.clip(best.x, lower, upper),
        best_cost=float(best.fun),
        eval_count=len(history),
        cost_history=history,
        converged=bool(best.success),
        start_costs=start_costs,
        failures=failures,
    )


def vcqa_run(
    instance: ProblemInstance,
    total_time: float,
    aux_axis: Optional[str] = "z",
    config: OptimizerConfig = OptimizerConfig(),
    integrator: IntegratorConfig = IntegratorConfig(),
    ground: Optional[tuple] = None,
    epsilon: float = 1.0,
) -> tuple[OptimizationResult, EvolutionMetrics]:
    """Optimizes, then scores one final propagation at the best parameters."""
    result = minimize(instance, total_time, aux_axis, config, integrator, epsilon=epsilon)
    setup = setup_from_params(
        instance, total_time, result.best_params, aux_axis, config.layout(aux_axis), config.bounds, epsilon
    )
    metrics, _ = run_metrics(setup, integrator, ground=ground, n_samples=2)
    logger.info(
        "VCQA %s N=%d T=%.3g aux=%s: E%%=%.4f F=%.4f (%d evaluations)",
        instance.connectivity, instance.n_qubits, total_time, aux_axis, metrics.percent_error, metrics.fidelity, result.eval_count,
    )
    return result, metrics
