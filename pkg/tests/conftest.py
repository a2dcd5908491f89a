import numpy as np
import pytest

from modules.evolve import IntegratorConfig
from modules.hamiltonian import ProblemInstance


@pytest.fixture
def pair_instance():
    # Antiferromagnetic pair with unequal fields: unique ground state |01⟩.
    return ProblemInstance(
        connectivity="linear",
        n_qubits=2,
        omegas=(0.3, 0.7),
        couplings=((1, 2, 0.9),),
        seed=11,
    )


@pytest.fixture
def degenerate_pair():
    return ProblemInstance(connectivity="linear", n_qubits=2, omegas=(0.0, 0.0), couplings=((1, 2, 1.0),), seed=3)


@pytest.fixture
def fast_integrator():
    return IntegratorConfig(dt_fraction=0.01, tol=1e-5, max_refinements=10, n_samples=101)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
