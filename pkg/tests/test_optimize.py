import numpy as np
import pytest

from modules.errors import CostEvaluationError, DomainError, OptimizationError
from modules.evolve import ramp_setup, run_metrics
from modules.hamiltonian import ground_state, spin_glass
from modules.optimize import OptimizerConfig, cost, initial_simplex, minimize, vcqa_run
from modules.schedule import ramp_equivalent_params

TARGET = np.array([0.3, 0.4, 0.5, 0.5, 0.6, 0.7])


def bowl(x):
    return float(np.sum((np.asarray(x) - TARGET) ** 2))


def test_config_validation():
    with pytest.raises(DomainError):
        OptimizerConfig(restarts=0)
    with pytest.raises(DomainError):
        OptimizerConfig(max_evals=7)
    with pytest.raises(DomainError):
        OptimizerConfig(init_scale=0.0)
    with pytest.raises(DomainError):
        OptimizerConfig(bounds=((0.0, 1.0), (0.5, 0.5), (0.0, 1.0)))


def test_layout_and_box():
    config = OptimizerConfig(bounds=((0.0, 1.0), (0.1, 0.9), (-1.0, 1.0)))
    assert config.layout("z") == (2, 2, 2)
    assert config.layout(None) == (2, 2, 0)
    lower, upper = config.box("x")
    np.testing.assert_array_equal(lower, [0.0, 0.0, 0.1, 0.1, -1.0, -1.0])
    np.testing.assert_array_equal(upper, [1.0, 1.0, 0.9, 0.9, 1.0, 1.0])


def test_initial_simplex_stays_in_the_box():
    lower, upper = np.zeros(3), np.ones(3)
    simplex = initial_simplex(np.array([0.0, 0.95, 0.5]), lower, upper, 0.1)
    assert simplex.shape == (4, 3)
    assert np.all(simplex >= lower) and np.all(simplex <= upper)
    assert simplex[2, 1] == pytest.approx(0.85)


def test_convex_bowl_is_solved(pair_instance):
    config = OptimizerConfig(max_evals=3000, restarts=2, xatol=1e-8, fatol=1e-14)
    result = minimize(pair_instance, 1.0, "z", config, cost_fn=bowl)
    np.testing.assert_allclose(result.best_params, TARGET, atol=1e-4)
    assert result.best_cost < 1e-8
    assert len(result.start_costs) == 2


def test_bowl_outside_the_box_ends_on_the_boundary(pair_instance):
    target = np.array([1.4, 0.5, 0.5, 0.5])
    config = OptimizerConfig(max_evals=2000, restarts=1, xatol=1e-8, fatol=1e-14)
    result = minimize(pair_instance, 1.0, None, config, cost_fn=lambda x: float(np.sum((x - target) ** 2)))
    assert result.best_params.size == 4
    assert 0.9 < result.best_params[0] <= 1.0
    assert result.best_cost < result.cost_history[0]


def test_every_candidate_is_clipped(pair_instance):
    seen = []

    def recording(x):
        seen.append(np.array(x))
        return bowl(-x)

    config = OptimizerConfig(max_evals=200, restarts=2)
    minimize(pair_instance, 1.0, "z", config, cost_fn=recording)
    points = np.array(seen)
    assert points.min() >= 0.0 and points.max() <= 1.0


def test_history_and_running_minimum(pair_instance):
    config = OptimizerConfig(max_evals=150, restarts=2)
    result = minimize(pair_instance, 1.0, "z", config, cost_fn=bowl)
    assert result.eval_count == len(result.cost_history)
    running = result.running_minimum()
    assert np.all(np.diff(running) <= 0.0)
    assert result.cost_history[0] == pytest.approx(bowl(ramp_equivalent_params()))
    assert result.best_cost <= result.cost_history[0]
    assert result.best_cost >= running[-1]


def test_starts_are_reproducible(pair_instance):
    config = OptimizerConfig(max_evals=120, restarts=3, seed=5)
    first = minimize(pair_instance, 1.0, "z", config, cost_fn=bowl)
    second = minimize(pair_instance, 1.0, "z", config, cost_fn=bowl)
    np.testing.assert_array_equal(first.best_params, second.best_params)
    assert first.cost_history == second.cost_history


def test_failed_evaluations_count_as_infinite(pair_instance):
    def fragile(x):
        if x[0] > 0.7:
            raise CostEvaluationError("integrator diverged")
        return bowl(x)

    config = OptimizerConfig(max_evals=300, restarts=2)
    result = minimize(pair_instance, 1.0, "z", config, cost_fn=fragile)
    assert np.isfinite(result.best_cost)
    assert result.failures == sum(np.isinf(result.cost_history))


def test_all_failures_raise(pair_instance):
    def broken(x):
        raise CostEvaluationError("always")

    with pytest.raises(OptimizationError):
        minimize(pair_instance, 1.0, "z", OptimizerConfig(max_evals=20, restarts=2), cost_fn=broken)


def test_cost_is_bounded_by_the_ground_energy(pair_instance, fast_integrator, rng):
    e0, _ = ground_state(spin_glass(pair_instance))
    for x in rng.random((3, 6)):
        assert cost(x, pair_instance, 2.0, "z", integrator=fast_integrator) >= e0 - 1e-9


def test_cost_wraps_validation_errors(pair_instance, fast_integrator):
    with pytest.raises(CostEvaluationError):
        cost([0.5, 1.5, 0.2, 0.6, 0.1, 0.1], pair_instance, 2.0, "z", integrator=fast_integrator)


def test_cost_without_aux_takes_four_parameters(pair_instance, fast_integrator):
    value = cost(ramp_equivalent_params()[:4], pair_instance, 2.0, None, integrator=fast_integrator)
    assert np.isfinite(value)


def test_vcqa_improves_on_its_first_start(pair_instance, fast_integrator):
    config = OptimizerConfig(max_evals=30, restarts=1)
    result, metrics = vcqa_run(pair_instance, 2.0, "z", config, fast_integrator)
    start = cost(ramp_equivalent_params(), pair_instance, 2.0, "z", config, fast_integrator)
    assert result.best_cost <= start
    assert metrics.final_energy == pytest.approx(result.best_cost, abs=1e-9)
    assert metrics.percent_error >= 0.0
    assert 0.0 <= metrics.fidelity <= 1.0


@pytest.mark.slow
def test_optimized_schedule_beats_the_ramp(pair_instance):
    config = OptimizerConfig(max_evals=400, restarts=3)
    ramp, _ = run_metrics(ramp_setup(pair_instance, 5.0))
    _, metrics = vcqa_run(pair_instance, 5.0, "z", config)
    assert metrics.percent_error <= ramp.percent_error
