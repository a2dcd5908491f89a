import copy
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Mapping, Optional

from modules.errors import ConfigError, VCQAError
from modules.evolve import IntegratorConfig
from modules.hamiltonian import HeisenbergParams
from modules.harness import ExperimentConfig, GapStudyConfig, log_grid
from modules.optimize import OptimizerConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = Path(__file__).resolve().parents[2] / "config" / "default.toml"
WORKERS_ENV = "VCQA_WORKERS"


def read_toml(file_path) -> dict:
    """
    Reads a TOML file into nested dicts.

    Args:
        file_path (str | Path): Path to the file.

    Returns:
        dict: The parsed tables.

    Raises:
        ConfigError: If the file is missing or not valid TOML.
    """
    try:
        with open(file_path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as err:
        raise ConfigError(f"Config file not found: {file_path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"Invalid TOML in {file_path}: {err}") from err


def merge(base: dict, update: Mapping, prefix: str = "") -> dict:
    """Recursively merges update over base; keys absent from base are rejected."""
    for key, value in update.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"Unknown config key: {dotted}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"Config key {dotted} must be a table")
            merge(base[key], value, f"{dotted}.")
        else:
            base[key] = value
    return base


def parse_value(text: str) -> Any:
    """Reads a CLI value as a TOML literal, falling back to the raw string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: Mapping[str, Any]) -> dict:
    """Sets dotted keys such as "optimizer.max_evals"; unknown keys raise ConfigError."""
    for dotted, value in overrides.items():
        *tables, key = dotted.split(".")
        update: dict = {key: value}
        for table in reversed(tables):
            update = {table: update}
        merge(raw, update)
    return raw


def _params_layout(value) -> tuple[int, int, int]:
    if isinstance(value, int):
        return (value, value, value)
    if isinstance(value, list) and len(value) == 3:
        return tuple(int(v) for v in value)
    raise ConfigError(f"schedule.params_per_schedule must be an int or [n1, n2, n3], got {value!r}")


def build_config(raw: dict, workers: int = 1) -> ExperimentConfig:
    """Validates merged tables into an ExperimentConfig."""
    exp, sched, integ, opt, ham, spec, at = (
        raw[k] for k in ("experiment", "schedule", "integrator", "optimizer", "hamiltonian", "spectrum", "annealtime")
    )
    n_params = _params_layout(sched["params_per_schedule"])
    bounds = tuple(tuple(float(b) for b in sched["bounds"][f]) for f in ("f1", "f2", "f3"))
    t_grid = tuple(float(t) for t in exp["t_grid"]) or log_grid(exp["t_min"], exp["t_max"], exp["t_points"])
    try:
        return ExperimentConfig(
            connectivity=exp["connectivity"],
            n_qubits=tuple(int(n) for n in exp["n_qubits"]),
            instance_count=int(exp["instance_count"]),
            seed=int(exp["seed"]),
            t_grid=t_grid,
            strategies=tuple(exp["strategies"]),
            value_range=exp["range"],
            output_dir=exp["output_dir"],
            full_ensemble=bool(exp["full_ensemble"]),
            n_params=n_params,
            bounds=bounds,
            dump_points=int(sched["dump_points"]),
            integrator=IntegratorConfig(
                dt_fraction=float(integ["dt_fraction"]),
                tol=float(integ["tol"]),
                max_refinements=int(integ["max_refinements"]),
                n_samples=int(integ["n_samples"]),
                krylov_dim=int(integ["krylov_dim"]),
            ),
            optimizer=OptimizerConfig(
                max_evals=int(opt["max_evals"]),
                restarts=int(opt["restarts"]),
                init_scale=float(opt["init_scale"]),
                seed=int(opt["seed"]),
                xatol=float(opt["xatol"]),
                fatol=float(opt["fatol"]),
                n_params=n_params,
                bounds=bounds,
            ),
            epsilon=float(ham["epsilon"]),
            dense_cap=int(ham["dense_cap"]),
            degeneracy_tol=float(ham["degeneracy_tol"]),
            heisenberg=HeisenbergParams(**{k: float(v) for k, v in ham["heisenberg"].items()}),
            gap=GapStudyConfig(
                connectivity=spec["connectivity"],
                n_qubits=int(spec["n_qubits"]),
                instance_count=int(spec["instance_count"]),
                grid_points=int(spec["grid_points"]),
                optimize_T=float(spec["optimize_T"]),
                strategies=tuple(spec["strategies"]),
                value_range=spec["range"],
            ),
            boundary_tol=float(at["boundary_tol"]),
            denominator_tol=float(at["denominator_tol"]),
            workers=workers,
        )
    except ConfigError:
        raise
    except (VCQAError, TypeError, ValueError) as err:
        raise ConfigError(f"Invalid configuration: {err}") from err


def workers_from_env(env: Optional[Mapping[str, str]] = None) -> int:
    value = (os.environ if env is None else env).get(WORKERS_ENV, "1")
    try:
        workers = int(value)
    except ValueError as err:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}") from err
    return workers


def load_raw(file_path=None, overrides: Optional[Mapping[str, Any]] = None) -> dict:
    """Default tables, merged with the user file and then the dotted overrides."""
    raw = copy.deepcopy(read_toml(DEFAULT_CONFIG))
    if file_path is not None:
        merge(raw, read_toml(file_path))
    if overrides:
        apply_overrides(raw, overrides)
    return raw


def load_config(
    file_path=None,
    overrides: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """
    Loads the experiment configuration.

    The user file is merged over config/default.toml, then CLI overrides are
    applied. The worker count comes from the VCQA_WORKERS environment variable only.

    Args:
        file_path (str, optional): User TOML file.
        overrides (Mapping, optional): Dotted keys mapped to values.
        env (Mapping, optional): Environment to read VCQA_WORKERS from; os.environ by default.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        ConfigError: On unknown keys, bad values or an unreadable file.
    """
    raw = load_raw(file_path, overrides)
    config = build_config(raw, workers_from_env(env))
    logger.debug("Loaded config from %s with %d override(s)", file_path or DEFAULT_CONFIG, len(overrides or {}))
    return config
