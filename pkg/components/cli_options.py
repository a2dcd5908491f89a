import argparse

from modules.errors import ConfigError
from modules.utils.config_loader import parse_value

# CLI flag destination -> dotted config key.
OPTION_KEYS = {
    "connectivity": "experiment.connectivity",
    "n_qubits": "experiment.n_qubits",
    "count": "experiment.instance_count",
    "seed": "experiment.seed",
    "t_grid": "experiment.t_grid",
    "strategies": "experiment.strategies",
    "range": "experiment.range",
    "output_dir": "experiment.output_dir",
    "full_ensemble": "experiment.full_ensemble",
    "max_evals": "optimizer.max_evals",
    "restarts": "optimizer.restarts",
    "optimizer_seed": "optimizer.seed",
    "tol": "integrator.tol",
    "n_samples": "integrator.n_samples",
    "grid_points": "spectrum.grid_points",
}


def add_config_options(parser: argparse.ArgumentParser) -> None:
    """
    Registers the flags shared by every subcommand.

    Every flag defaults to None so that only flags given on the command line
    override the configuration.
    """
    parser.add_argument("--config", help="TOML file merged over config/default.toml")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override any dotted config key, e.g. optimizer.max_evals=200")
    parser.add_argument("--connectivity", choices=["linear", "cyclic", "star", "full", "heisenberg"])
    parser.add_argument("--n", dest="n_qubits", type=int, nargs="+", help="System sizes")
    parser.add_argument("--count", type=int, help="Instances per size")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--T", dest="t_grid", type=float, nargs="+", help="Total times in units of 1/epsilon")
    parser.add_argument("--strategies", nargs="+")
    parser.add_argument("--range", choices=["half-open", "closed"])
    parser.add_argument("--output-dir")
    parser.add_argument("--full-ensemble", action="store_const", const=True)
    parser.add_argument("--max-evals", type=int)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--optimizer-seed", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--n-samples", type=int)
    parser.add_argument("--grid-points", type=int)


def cli_overrides(args: argparse.Namespace) -> dict:
    """
    Collects the config overrides given on the command line.

    Args:
        args (argparse.Namespace): Parsed arguments.

    Returns:
        dict: Dotted config keys mapped to values; --set entries come last and win.
    """
    overrides = {}
    for dest, key in OPTION_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    for item in getattr(args, "set", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        overrides[key.strip()] = parse_value(text.strip())
    return overrides
