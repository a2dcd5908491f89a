import pytest

from app import build_parser
from components.cli_options import cli_overrides
from modules.errors import ConfigError
from modules.utils.config_loader import apply_overrides, load_config, load_raw, parse_value, workers_from_env


def test_defaults():
    config = load_config(env={})
    assert config.connectivity == "linear"
    assert config.n_qubits == (2, 4, 7, 10)
    assert len(config.t_grid) == 10
    assert config.t_grid[0] == pytest.approx(0.5) and config.t_grid[-1] == pytest.approx(5.0)
    assert config.optimizer.max_evals == 400
    assert config.optimizer.n_params == (2, 2, 2)
    assert config.integrator.n_samples == 1001
    assert config.heisenberg.delta == 5.0
    assert config.gap.strategies == ("ramp", "no-aux", "x-aux", "y-aux", "z-aux")
    assert config.value_range == "half-open"
    assert config.gap.value_range == "closed"
    assert config.workers == 1


def test_user_file_is_merged(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[optimizer]\nmax_evals = 50\n\n[experiment]\nt_grid = [1.0, 2.0]\nconnectivity = "star"\n')
    config = load_config(path, env={})
    assert config.optimizer.max_evals == 50
    assert config.optimizer.restarts == 3
    assert config.t_grid == (1.0, 2.0)
    assert config.connectivity == "star"


def test_unknown_key_in_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[optimizer]\nmax_iters = 50\n")
    with pytest.raises(ConfigError, match="optimizer.max_iters"):
        load_config(path, env={})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml", env={})
    path = tmp_path / "broken.toml"
    path.write_text("[optimizer\n")
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_dotted_overrides():
    config = load_config(overrides={"optimizer.restarts": 1, "experiment.n_qubits": [3], "hamiltonian.heisenberg.delta": 1.0}, env={})
    assert config.optimizer.restarts == 1
    assert config.n_qubits == (3,)
    assert config.heisenberg.delta == 1.0


def test_override_of_unknown_key():
    with pytest.raises(ConfigError):
        apply_overrides(load_raw(), {"integrator.order": 4})
    with pytest.raises(ConfigError):
        apply_overrides(load_raw(), {"schedule.bounds": 1.0})


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError):
        load_config(overrides={"optimizer.restarts": 0}, env={})
    with pytest.raises(ConfigError):
        load_config(overrides={"experiment.strategies": ["vcqa-w"]}, env={})
    with pytest.raises(ConfigError):
        load_config(overrides={"schedule.params_per_schedule": [1, 2]}, env={})


def test_spectrum_range():
    config = load_config(overrides={"spectrum.range": "half-open"}, env={})
    assert config.gap.value_range == "half-open"
    assert config.value_range == "half-open"
    with pytest.raises(ConfigError):
        load_config(overrides={"spectrum.range": "open"}, env={})


def test_per_schedule_knot_counts():
    config = load_config(overrides={"schedule.params_per_schedule": [3, 2, 1]}, env={})
    assert config.n_params == (3, 2, 1)
    assert config.optimizer.n_params == (3, 2, 1)


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("2.5") == 2.5
    assert parse_value("[1, 2]") == [1, 2]
    assert parse_value("true") is True
    assert parse_value("vcqa-z") == "vcqa-z"


def test_workers_come_from_the_environment():
    assert workers_from_env({}) == 1
    assert workers_from_env({"VCQA_WORKERS": "4"}) == 4
    assert load_config(env={"VCQA_WORKERS": "3"}).workers == 3
    with pytest.raises(ConfigError):
        workers_from_env({"VCQA_WORKERS": "many"})
    with pytest.raises(ConfigError):
        load_config(env={"VCQA_WORKERS": "0"})


def test_cli_flags_become_overrides():
    args = build_parser().parse_args(
        ["sweep", "--n", "2", "4", "--T", "1", "2", "--max-evals", "80", "--set", "optimizer.restarts=1"]
    )
    overrides = cli_overrides(args)
    assert overrides == {
        "experiment.n_qubits": [2, 4],
        "experiment.t_grid": [1.0, 2.0],
        "optimizer.max_evals": 80,
        "optimizer.restarts": 1,
    }
    config = load_config(args.config, overrides, env={})
    assert config.n_qubits == (2, 4)
    assert config.optimizer.max_evals == 80


def test_malformed_set_flag():
    args = build_parser().parse_args(["sweep", "--set", "optimizer.restarts"])
    with pytest.raises(ConfigError):
        cli_overrides(args)
