from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from modules.errors import ConfigError, DomainError, VCQAError
from modules.evolve import IntegratorConfig, Trajectory, ramp_setup, run_metrics, setup_from_params
from modules.hamiltonian import (
    CONNECTIVITIES,
    AnnealSetup,
    HeisenbergParams,
    ProblemInstance,
    edges,
    final_hamiltonian,
    ground_state,
)
from modules.optimize import OptimizerConfig, minimize, vcqa_run
from modules.schedule import convention, ramp_profile
from modules.seeding import child_seed, unit_draws
from modules.spectrum import GapProfile, average_gap_profile, default_grid, dominance_fraction, gap_summary, mean_of_profiles

logger = logging.getLogger(__name__)

SWEEP_STRATEGIES = ("ramp", "vcqa-x", "vcqa-y", "vcqa-z", "vcqa-none")
GAP_STRATEGIES = {"ramp": None, "no-aux": None, "x-aux": "x", "y-aux": "y", "z-aux": "z"}
AGGREGATE_COLUMNS = ["N", "T", "strategy", "mean_err_pct", "mean_fidelity", "n_ok", "n_fail"]
FULL_ENSEMBLE = 100
DOMINANCE_TARGET = 0.9


def parse_strategy(name: str) -> tuple[str, Optional[str]]:
    """Splits a sweep strategy into ("ramp" | "vcqa", aux axis or None)."""
    if name not in SWEEP_STRATEGIES:
        raise DomainError(f"Unknown strategy {name!r}; expected one of {SWEEP_STRATEGIES}")
    if name == "ramp":
        return "ramp", None
    axis = name.split("-", 1)[1]
    return "vcqa", None if axis == "none" else axis


def log_grid(t_min: float, t_max: float, points: int) -> tuple[float, ...]:
    return tuple(float(t) for t in np.geomspace(t_min, t_max, points))


@dataclass(frozen=True)
class GapStudyConfig:
    connectivity: str = "full"
    n_qubits: int = 4
    instance_count: int = 20
    grid_points: int = 101
    optimize_T: float = 5.0
    strategies: tuple = tuple(GAP_STRATEGIES)
    value_range: str = "closed"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a sweep, a gap study or a replay needs.

    Attributes:
        connectivity (str): Graph family of the instances.
        n_qubits (tuple[int, ...]): System sizes to sweep.
        instance_count (int): Instances per size.
        seed (int): Master seed of the instance draws.
        t_grid (tuple[float, ...]): Total times in units of 1/ε, ascending.
        strategies (tuple[str, ...]): Sweep strategies.
        value_range (str): "half-open" or "closed" range of the random draws.
        output_dir (str): Where emitted files go.
        full_ensemble (bool): Use 100 instances regardless of instance_count.
        n_params (tuple[int, int, int]): Interior knots per schedule.
        bounds (tuple): Box per schedule.
        dump_points (int): Grid size of schedule dumps.
        integrator (IntegratorConfig): Step control.
        optimizer (OptimizerConfig): Variational budget.
        epsilon (float): Transverse-field scale.
        dense_cap (int): Largest N diagonalized.
        degeneracy_tol (float): Ground-space grouping tolerance.
        heisenberg (HeisenbergParams): ω_H, g_H and δ of the Heisenberg family.
        gap (GapStudyConfig): Settings of the gap study.
        boundary_tol (float): Threshold for the annealing-time boundary term.
        denominator_tol (float): Smallest accepted annealing-time denominator.
        workers (int): Parallel tasks.
    """

    connectivity: str = "linear"
    n_qubits: tuple = (2, 4, 7, 10)
    instance_count: int = 20
    seed: int = 0
    t_grid: tuple = log_grid(0.5, 5.0, 10)
    strategies: tuple = ("ramp", "vcqa-z")
    value_range: str = "half-open"
    output_dir: str = "results"
    full_ensemble: bool = False
    n_params: tuple = (2, 2, 2)
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    dump_points: int = 101
    integrator: IntegratorConfig = IntegratorConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    epsilon: float = 1.0
    dense_cap: int = 14
    degeneracy_tol: float = 1e-9
    heisenberg: HeisenbergParams = HeisenbergParams()
    gap: GapStudyConfig = GapStudyConfig()
    boundary_tol: float = 1e-10
    denominator_tol: float = 1e-10
    workers: int = 1

    def __post_init__(self):
        if self.connectivity not in CONNECTIVITIES:
            raise ConfigError(f"Unknown connectivity {self.connectivity!r}")
        if self.instance_count < 1:
            raise ConfigError(f"instance_count must be at least 1, got {self.instance_count}")
        if not self.n_qubits or min(self.n_qubits) < 1:
            raise ConfigError(f"n_qubits must list positive sizes, got {self.n_qubits}")
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0.0) or np.any(np.diff(grid) <= 0.0):
            raise ConfigError(f"T grid must be positive and ascending, got {self.t_grid}")
        if not self.strategies:
            raise ConfigError("At least one strategy is required")
        for name in self.strategies:
            if name not in SWEEP_STRATEGIES:
                raise ConfigError(f"Unknown strategy {name!r}; expected one of {SWEEP_STRATEGIES}")
        if self.value_range not in ("half-open", "closed"):
            raise ConfigError(f"range must be 'half-open' or 'closed', got {self.value_range!r}")
        for name in self.gap.strategies:
            if name not in GAP_STRATEGIES:
                raise ConfigError(f"Unknown gap strategy {name!r}; expected one of {tuple(GAP_STRATEGIES)}")
        if self.gap.value_range not in ("half-open", "closed"):
            raise ConfigError(f"spectrum.range must be 'half-open' or 'closed', got {self.gap.value_range!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")

    @property
    def ensemble_size(self) -> int:
        return FULL_ENSEMBLE if self.full_ensemble else self.instance_count

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ResultRecord:
    """
    One (instance, strategy, T) run, successful or not.

    Attributes:
        instance_id (int): Position of the instance in its ensemble.
        seed (int): Child seed the instance was drawn from.
        connectivity (str): Graph family.
        n_qubits (int): N.
        strategy (str): Sweep strategy name.
        total_time (float): T.
        err_pct (float): Percentage energy error.
        fidelity (float): Ground-space fidelity.
        final_energy (float): ⟨ψ_T|H_f|ψ_T⟩.
        ground_energy (float): E0 of H_f.
        best_params (list[float]): Optimized schedule parameters (empty for the ramp).
        eval_count (int): Cost evaluations spent.
        wall_time (float): Seconds.
        status (str): "ok" or "failed".
        reason (str | None): Failure description.
        conventions (dict): Schedule and annealing-time convention flags.
    """

    instance_id: int
    seed: int
    connectivity: str
    n_qubits: int
    strategy: str
    total_time: float
    err_pct: float = math.nan
    fidelity: float = math.nan
    final_energy: float = math.nan
    ground_energy: float = math.nan
    best_params: list = field(default_factory=list)
    eval_count: int = 0
    wall_time: float = 0.0
    status: str = "ok"
    reason: Optional[str] = None
    conventions: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.n_qubits, self.total_time, self.strategy, self.instance_id)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        return cls(**data)


def record_conventions() -> dict:
    return {**convention(), "boundary_term": "included-when-nonzero", "numerator": "full"}


def draw_instance(
    connectivity: str,
    n_qubits: int,
    seed: int,
    instance_id: int = 0,
    value_range: str = "half-open",
    heisenberg: HeisenbergParams = HeisenbergParams(),
) -> ProblemInstance:
    """
    Draws one instance from its child seed: N local fields first, then one coupling per edge.

    Heisenberg instances are not random; ω_H, g_H and δ are fixed.
    """
    if connectivity == "heisenberg":
        return ProblemInstance(
            connectivity=connectivity,
            n_qubits=n_qubits,
            omegas=(heisenberg.omega,) * n_qubits,
            couplings=tuple((i, j, heisenberg.g) for i, j in edges(connectivity, n_qubits)),
            heisenberg=heisenberg,
            seed=seed,
            instance_id=instance_id,
        )
    rng = np.random.default_rng(seed)
    graph = edges(connectivity, n_qubits)
    omegas = unit_draws(rng, n_qubits, value_range)
    gs = unit_draws(rng, len(graph), value_range)
    return ProblemInstance(
        connectivity=connectivity,
        n_qubits=n_qubits,
        omegas=tuple(float(w) for w in omegas),
        couplings=tuple((i, j, float(g)) for (i, j), g in zip(graph, gs)),
        seed=seed,
        instance_id=instance_id,
    )


def generate_instances(
    connectivity: str,
    n_qubits: int,
    count: int,
    seed: int,
    value_range: str = "half-open",
    heisenberg: HeisenbergParams = HeisenbergParams(),
) -> list[ProblemInstance]:
    """
    A reproducible ensemble of problem instances.

    Instance k is drawn from child_seed(seed, connectivity index, N, k), so any
    subset can be regenerated on its own.

    Args:
        connectivity (str): linear | cyclic | star | full | heisenberg.
        n_qubits (int): N.
        count (int): Number of instances.
        seed (int): Master seed.
        value_range (str): "half-open" for ]0,1], "closed" for [0,1].
        heisenberg (HeisenbergParams): Chain parameters for the heisenberg family.

    Returns:
        list[ProblemInstance]: The ensemble, ordered by instance id.
    """
    if connectivity not in CONNECTIVITIES:
        raise DomainError(f"Unknown connectivity: {connectivity}")
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    family = CONNECTIVITIES.index(connectivity)
    return [
        draw_instance(connectivity, n_qubits, child_seed(seed, family, n_qubits, k), k, value_range, heisenberg)
        for k in range(count)
    ]


def setup_for(instance: ProblemInstance, strategy: str, total_time: float, params, config: ExperimentConfig) -> AnnealSetup:
    """Rebuilds the AnnealSetup of a strategy run from its parameters."""
    kind, aux_axis = parse_strategy(strategy)
    if kind == "ramp":
        return ramp_setup(instance, total_time, config.epsilon)
    return setup_from_params(
        instance, total_time, params, aux_axis, _optimizer_for(config).layout(aux_axis), config.bounds, config.epsilon
    )


def _optimizer_for(config: ExperimentConfig) -> OptimizerConfig:
    opt = config.optimizer
    if opt.n_params == config.n_params and opt.bounds == config.bounds:
        return opt
    return OptimizerConfig(**{**asdict(opt), "n_params": config.n_params, "bounds": config.bounds})


def run_strategy(
    instance: ProblemInstance,
    strategy: str,
    total_time: float,
    config: ExperimentConfig,
    keep_states: bool = False,
) -> tuple[ResultRecord, Optional[Trajectory]]:
    """
    Runs one strategy on one instance; errors propagate.

    With keep_states the returned trajectory is sampled at config.integrator.n_samples
    points and carries the states needed for the annealing-time report.
    """
    start = time.perf_counter()
    h_final = final_hamiltonian(instance)
    ground = ground_state(h_final, config.dense_cap, config.degeneracy_tol)
    n_samples = None if keep_states else 2
    kind, aux_axis = parse_strategy(strategy)
    params: list = []
    eval_count = 0
    if kind == "ramp":
        metrics, trajectory = run_metrics(
            ramp_setup(instance, total_time, config.epsilon), config.integrator, ground, keep_states, n_samples
        )
    else:
        optimizer = _optimizer_for(config)
        result, metrics = vcqa_run(instance, total_time, aux_axis, optimizer, config.integrator, ground, config.epsilon)
        params = [float(p) for p in result.best_params]
        eval_count = result.eval_count
        trajectory = None
        if keep_states:
            setup = setup_for(instance, strategy, total_time, params, config)
            metrics, trajectory = run_metrics(setup, config.integrator, ground, keep_states=True)
    record = ResultRecord(
        instance_id=instance.instance_id,
        seed=instance.seed,
        connectivity=instance.connectivity,
        n_qubits=instance.n_qubits,
        strategy=strategy,
        total_time=float(total_time),
        err_pct=metrics.percent_error,
        fidelity=metrics.fidelity,
        final_energy=metrics.final_energy,
        ground_energy=metrics.ground_energy,
        best_params=params,
        eval_count=eval_count,
        wall_time=time.perf_counter() - start,
        conventions=record_conventions(),
    )
    return record, trajectory


def _task(instance: ProblemInstance, strategy: str, total_time: float, config: ExperimentConfig) -> ResultRecord:
    try:
        record, _ = run_strategy(instance, strategy, total_time, config)
    except VCQAError as err:
        reason = f"{type(err).__name__}: {err}"
        logger.warning("Run failed (N=%d, T=%.3g, %s, instance %d): %s",
                       instance.n_qubits, total_time, strategy, instance.instance_id, reason)
        return ResultRecord(
            instance_id=instance.instance_id,
            seed=instance.seed,
            connectivity=instance.connectivity,
            n_qubits=instance.n_qubits,
            strategy=strategy,
            total_time=float(total_time),
            status="failed",
            reason=reason,
            conventions=record_conventions(),
        )
    logger.info("N=%d T=%.3g %s instance %d: E%%=%.4f F=%.4f",
                record.n_qubits, record.total_time, strategy, record.instance_id, record.err_pct, record.fidelity)
    return record


def aggregate(records: list[ResultRecord]) -> pd.DataFrame:
    """
    Mean E% and fidelity per (N, T, strategy) over successful records.

    Failed records only count towards n_fail.
    """
    frame = pd.DataFrame([
        {"N": r.n_qubits, "T": r.total_time, "strategy": r.strategy,
         "err_pct": r.err_pct, "fidelity": r.fidelity, "ok": r.ok}
        for r in records
    ])
    if frame.empty:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    frame = frame.assign(err_pct=frame["err_pct"].where(frame["ok"]), fidelity=frame["fidelity"].where(frame["ok"]))
    out = frame.groupby(["N", "T", "strategy"]).agg(
        mean_err_pct=("err_pct", "mean"),
        mean_fidelity=("fidelity", "mean"),
        n_ok=("ok", "sum"),
        n_total=("ok", "size"),
    ).reset_index()
    out["n_ok"] = out["n_ok"].astype(int)
    out["n_fail"] = (out["n_total"] - out["n_ok"]).astype(int)
    return out[AGGREGATE_COLUMNS].sort_values(["N", "T", "strategy"]).reset_index(drop=True)


def run_sweep(config: ExperimentConfig) -> tuple[list[ResultRecord], pd.DataFrame]:
    """
    Every (N, T, instance, strategy) combination of the config.

    Tasks run on a joblib pool of config.workers processes; records come back
    sorted by (N, T, strategy, instance id) whatever the execution order.

    Args:
        config (ExperimentConfig): The experiment.

    Returns:
        tuple[list[ResultRecord], pd.DataFrame]: Records and their aggregates.
    """
    tasks = []
    for n in config.n_qubits:
        instances = generate_instances(
            config.connectivity, n, config.ensemble_size, config.seed, config.value_range, config.heisenberg
        )
        for total_time in config.t_grid:
            for instance in instances:
                for strategy in config.strategies:
                    tasks.append((instance, strategy, total_time))
    logger.info("Sweep: %d tasks on %d worker(s)", len(tasks), config.workers)
    records = Parallel(n_jobs=config.workers)(delayed(_task)(inst, strat, t, config) for inst, strat, t in tasks)
    records = sorted(records, key=lambda r: r.key)
    failed = sum(not r.ok for r in records)
    if failed:
        logger.warning("%d of %d runs failed; see the reason column", failed, len(records))
    return records, aggregate(records)


def time_to_target(aggregates: pd.DataFrame, target_pct: float = 1.0) -> pd.DataFrame:
    """Smallest T per (N, strategy) whose mean E% is at or below target_pct; NaN if never reached."""
    rows = []
    for (n, strategy), group in aggregates.groupby(["N", "strategy"], sort=True):
        hits = group.loc[group["mean_err_pct"] <= target_pct, "T"]
        rows.append({"N": n, "strategy": strategy, "target_pct": target_pct,
                     "t_target": float(hits.min()) if not hits.empty else math.nan})
    return pd.DataFrame(rows, columns=["N", "strategy", "target_pct", "t_target"])


def replay(record: ResultRecord, config: ExperimentConfig) -> ResultRecord:
    """Regenerates a record's instance from its seed and runs the same strategy again."""
    instance = draw_instance(
        record.connectivity, record.n_qubits, record.seed, record.instance_id, config.value_range, config.heisenberg
    )
    rerun, _ = run_strategy(instance, record.strategy, record.total_time, config)
    drift = abs(rerun.err_pct - record.err_pct)
    logger.info("Replay of %s: E%% %.8f -> %.8f (drift %.2e)", record.key, record.err_pct, rerun.err_pct, drift)
    return rerun


def gap_schedules(instance: ProblemInstance, strategy: str, config: ExperimentConfig) -> tuple:
    """(F1, F2, F3) for a gap-study strategy; optimized strategies run minimize at gap.optimize_T."""
    aux_axis = GAP_STRATEGIES[strategy]
    if strategy == "ramp":
        return ramp_profile()
    optimizer = _optimizer_for(config)
    result = minimize(instance, config.gap.optimize_T, aux_axis, optimizer, config.integrator, epsilon=config.epsilon)
    layout = optimizer.layout(aux_axis)
    setup = setup_from_params(instance, config.gap.optimize_T, result.best_params, aux_axis, layout, config.bounds, config.epsilon)
    return setup.schedules


def _instance_gap(instance: ProblemInstance, strategy: str, config: ExperimentConfig, grid: np.ndarray) -> GapProfile:
    schedules = gap_schedules(instance, strategy, config)
    return average_gap_profile([instance], schedules, grid, GAP_STRATEGIES[strategy], strategy, config.epsilon)


def gap_instances(config: ExperimentConfig) -> list[ProblemInstance]:
    """The gap-study ensemble, drawn over the spectrum range (closed [0,1] by default)."""
    gap = config.gap
    count = FULL_ENSEMBLE if config.full_ensemble else gap.instance_count
    return generate_instances(gap.connectivity, gap.n_qubits, count, config.seed, gap.value_range, config.heisenberg)


def run_gap_study(config: ExperimentConfig) -> dict[str, GapProfile]:
    """
    Ensemble-averaged Δ01(s) per strategy on the gap-study instances.

    When the ramp is among the strategies, every other profile carries its
    dominance share (grid fraction where its gap is at least the ramp gap).
    A z-aux share below DOMINANCE_TARGET is logged as a warning; the check
    never fails the study.

    Returns:
        dict[str, GapProfile]: One averaged profile per configured strategy.
    """
    gap = config.gap
    grid = default_grid(gap.grid_points)
    instances = gap_instances(config)
    jobs = [(inst, strategy) for strategy in gap.strategies for inst in instances]
    logger.info("Gap study: %d instances x %d strategies", len(instances), len(gap.strategies))
    per_instance = Parallel(n_jobs=config.workers)(delayed(_instance_gap)(inst, s, config, grid) for inst, s in jobs)

    profiles = {}
    for strategy in gap.strategies:
        members = [p for (_, s), p in zip(jobs, per_instance) if s == strategy]
        profiles[strategy] = mean_of_profiles(members, strategy)

    if "ramp" in profiles:
        for strategy, profile in profiles.items():
            if strategy != "ramp":
                profile.dominance = dominance_fraction(profile, profiles["ramp"])
    for profile in profiles.values():
        logger.info("Gap %s: %s", profile.strategy, gap_summary(profile))

    z_aux = profiles.get("z-aux")
    if z_aux is not None and z_aux.dominance is not None and z_aux.dominance < DOMINANCE_TARGET:
        logger.warning("z-aux gap dominates the ramp gap on only %.0f%% of the grid", 100 * z_aux.dominance)
    return profiles
