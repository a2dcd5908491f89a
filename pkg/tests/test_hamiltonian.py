from functools import reduce

import numpy as np
import pytest

from modules.errors import DomainError, InstanceValidationError, ResourceLimitError
from modules.evolve import ramp_setup, setup_from_params
from modules.hamiltonian import (
    AnnealSetup,
    PauliSum,
    ProblemInstance,
    apply,
    assemble,
    aux_hamiltonian,
    edges,
    final_hamiltonian,
    ground_state,
    heisenberg_chain,
    initial_hamiltonian,
    lowest_eigenpairs,
    minus_state,
    spin_glass,
    z_local_form,
)
from modules.harness import generate_instances
from modules.schedule import ramp_profile, schedules_from_params

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def kron_dense(H: PauliSum) -> np.ndarray:
    out = np.zeros((H.dim, H.dim), dtype=complex)
    for c, label in H.terms:
        out += c * reduce(np.kron, [PAULI[ch] for ch in label])
    return out


def classical_energies(instance: ProblemInstance) -> np.ndarray:
    n = instance.n_qubits
    energies = []
    for b in range(1 << n):
        z = [1 - 2 * ((b >> (n - q)) & 1) for q in range(1, n + 1)]
        e = sum(w * z[j] for j, w in enumerate(instance.omegas))
        e += sum(g * z[i - 1] * z[j - 1] for i, j, g in instance.couplings)
        energies.append(e)
    return np.array(energies)


def random_pauli_sum(rng, n, count=12):
    labels = ["".join(rng.choice(list("IXYZ"), n)) for _ in range(count)]
    return PauliSum.from_terms(n, [(float(c), lab) for c, lab in zip(rng.normal(size=count), labels)])


def test_single_qubit_transverse_field():
    np.testing.assert_allclose(np.linalg.eigvalsh(initial_hamiltonian(1).to_dense()), [-1.0, 1.0], atol=1e-14)


def test_initial_ground_state_is_minus_state():
    e0, basis = ground_state(initial_hamiltonian(3))
    assert e0 == pytest.approx(-3.0)
    assert len(basis) == 1
    assert abs(np.vdot(basis[0], minus_state(3))) == pytest.approx(1.0)


def test_initial_spectrum_scales_with_epsilon():
    values = np.linalg.eigvalsh(initial_hamiltonian(2, 0.5).to_dense())
    np.testing.assert_allclose(values, [-1.0, 0.0, 0.0, 1.0], atol=1e-14)


def test_minus_state_amplitudes():
    np.testing.assert_allclose(minus_state(1), np.array([1.0, -1.0]) / np.sqrt(2.0))
    np.testing.assert_allclose(minus_state(2), np.array([1.0, -1.0, -1.0, 1.0]) / 2.0)
    psi = minus_state(4)
    assert np.vdot(psi, apply(initial_hamiltonian(4), psi)).real == pytest.approx(-4.0)


def test_degenerate_antiferromagnetic_pair(degenerate_pair):
    e0, basis = ground_state(spin_glass(degenerate_pair))
    assert e0 == -1.0
    support = sorted(int(np.flatnonzero(v)[0]) for v in basis)
    assert support == [1, 2]


def test_frustrated_triangle():
    inst = ProblemInstance("cyclic", 3, (0.0, 0.0, 0.0), ((1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)))
    e0, basis = ground_state(spin_glass(inst))
    assert e0 == -1.0
    assert len(basis) == 6


def test_star_matches_brute_force():
    inst = ProblemInstance("star", 3, (0.2, -0.5, 0.7), ((1, 2, 0.4), (1, 3, -0.9)))
    e0, _ = ground_state(spin_glass(inst))
    assert e0 == pytest.approx(classical_energies(inst).min(), abs=1e-12)


@pytest.mark.parametrize("index", range(200))
def test_random_diagonal_ground_states(index):
    connectivity = ("linear", "cyclic", "star", "full")[index % 4]
    n = 2 + index % 9
    inst = generate_instances(connectivity, n, 1, seed=index)[0]
    e0, basis = ground_state(spin_glass(inst))
    energies = classical_energies(inst)
    assert e0 == pytest.approx(energies.min(), abs=1e-12)
    assert len(basis) == int(np.sum(np.abs(energies - energies.min()) <= 1e-9 * max(1.0, abs(e0))))


def relabel(instance, perm):
    """Moves site j to perm[j]; perm must map the graph's edges onto edges."""
    n = instance.n_qubits
    omegas = [0.0] * n
    for j, w in enumerate(instance.omegas, start=1):
        omegas[perm[j] - 1] = w
    moved = {frozenset((perm[i], perm[j])): g for i, j, g in instance.couplings}
    couplings = tuple((i, j, moved[frozenset((i, j))]) for i, j in edges(instance.connectivity, n))
    return ProblemInstance(instance.connectivity, n, tuple(omegas), couplings, seed=instance.seed)


@pytest.mark.parametrize(
    "connectivity, perm",
    [
        ("linear", {1: 5, 2: 4, 3: 3, 4: 2, 5: 1}),
        ("cyclic", {1: 2, 2: 3, 3: 4, 4: 5, 5: 1}),
        ("star", {1: 1, 2: 4, 3: 5, 4: 2, 5: 3}),
        ("full", {1: 3, 2: 1, 3: 5, 4: 2, 5: 4}),
    ],
)
def test_graph_automorphisms_keep_the_spectrum(connectivity, perm):
    inst = generate_instances(connectivity, 5, 1, seed=17)[0]
    moved = relabel(inst, perm)
    assert moved != inst
    params = [0.7, 0.3, 0.2, 0.6, 0.3, 0.2]
    for s in (0.0, 0.35, 0.8, 1.0):
        a = assemble(setup_from_params(inst, 1.0, params, "z"), s)
        b = assemble(setup_from_params(moved, 1.0, params, "z"), s)
        np.testing.assert_allclose(np.linalg.eigvalsh(a.to_dense()), np.linalg.eigvalsh(b.to_dense()), atol=1e-10)
    assert ground_state(spin_glass(moved))[0] == pytest.approx(ground_state(spin_glass(inst))[0], abs=1e-12)


def test_lanczos_branch_for_eleven_qubits():
    values, vectors = lowest_eigenpairs(initial_hamiltonian(11), 2)
    np.testing.assert_allclose(values, [-11.0, -9.0], atol=1e-9)
    ground = vectors[:, 0]
    assert abs(np.vdot(minus_state(11), ground)) == pytest.approx(1.0, abs=1e-9)


def test_lanczos_matches_dense_mid_anneal():
    inst = generate_instances("linear", 11, 1, seed=4)[0]
    H = assemble(ramp_setup(inst, 1.0), 0.6)
    values, vectors = lowest_eigenpairs(H, 2)
    dense = np.linalg.eigvalsh(H.to_dense())[:2]
    np.testing.assert_allclose(values, dense, atol=1e-8)
    for e, v in zip(values, vectors.T):
        assert np.linalg.norm(apply(H, v) - e * v) < 1e-6


def test_diagonal_eleven_qubits_matches_enumeration():
    inst = generate_instances("star", 11, 1, seed=8)[0]
    values, _ = lowest_eigenpairs(spin_glass(inst), 2)
    energies = np.sort(classical_energies(inst))
    np.testing.assert_allclose(values, energies[:2], atol=1e-12)


def test_missing_coupling_is_rejected():
    inst = ProblemInstance("cyclic", 3, (0.1, 0.2, 0.3), ((1, 2, 1.0), (2, 3, 1.0)))
    with pytest.raises(InstanceValidationError):
        spin_glass(inst)


def test_wrong_field_count_is_rejected():
    with pytest.raises(InstanceValidationError):
        spin_glass(ProblemInstance("linear", 3, (0.1, 0.2), ((1, 2, 1.0), (2, 3, 1.0))))


@pytest.mark.parametrize("connectivity, count", [("linear", 3), ("cyclic", 4), ("star", 3), ("full", 6)])
def test_edge_counts_for_four_sites(connectivity, count):
    assert len(edges(connectivity, 4)) == count


def test_edge_count_formulas():
    for n in range(2, 13):
        assert len(edges("linear", n)) == n - 1
        assert len(edges("cyclic", n)) == n
        assert len(edges("star", n)) == n - 1
        assert len(edges("full", n)) == n * (n - 1) // 2
        assert len(edges("heisenberg", n)) == n - 1


def test_unknown_connectivity():
    with pytest.raises(DomainError):
        edges("ladder", 4)


def test_heisenberg_matches_dense():
    H = heisenberg_chain(3, 1.0, 0.1, 5.0)
    np.testing.assert_allclose(H.to_dense(), kron_dense(H), atol=1e-14)
    e0, _ = ground_state(H)
    assert e0 == pytest.approx(np.linalg.eigvalsh(kron_dense(H))[0], abs=1e-10)


def test_isotropic_heisenberg_conserves_magnetization():
    H = heisenberg_chain(4, 0.0, 0.3, 1.0)
    total_z = PauliSum.from_terms(4, [(1.0, "ZIII"), (1.0, "IZII"), (1.0, "IIZI"), (1.0, "IIIZ")])
    assert H.icommutator(total_z).terms == ()


def test_uncoupled_heisenberg_spectrum():
    values = np.linalg.eigvalsh(heisenberg_chain(2, 1.0, 0.0, 5.0).to_dense())
    np.testing.assert_allclose(values, [-2.0, 0.0, 0.0, 2.0], atol=1e-14)


def test_z_aux_commutes_with_spin_glass(pair_instance):
    assert spin_glass(pair_instance).icommutator(aux_hamiltonian(pair_instance, "z")).terms == ()


def test_x_aux_with_unit_fields_is_the_transverse_field():
    inst = ProblemInstance("linear", 3, (1.0, 1.0, 1.0), ((1, 2, 0.5), (2, 3, 0.5)))
    assert aux_hamiltonian(inst, "x") == initial_hamiltonian(3, 1.0)


def test_y_aux_single_qubit():
    inst = ProblemInstance("linear", 1, (0.7,))
    np.testing.assert_allclose(np.linalg.eigvalsh(aux_hamiltonian(inst, "y").to_dense()), [-0.7, 0.7], atol=1e-14)


def test_unknown_aux_axis(pair_instance):
    with pytest.raises(DomainError):
        aux_hamiltonian(pair_instance, "w")


def test_commutator_algebra():
    Z = PauliSum.from_terms(1, [(1.0, "Z")])
    X = PauliSum.from_terms(1, [(1.0, "X")])
    assert Z.icommutator(X).terms == ((-2.0, "Y"),)
    assert X.icommutator(X).terms == ()


def test_from_terms_merges_and_drops_zeros():
    H = PauliSum.from_terms(2, [(0.5, "XZ"), (0.25, "XZ"), (1.0, "IZ"), (-1.0, "IZ")])
    assert H.terms == ((0.75, "XZ"),)


def test_from_terms_rejects_bad_input():
    with pytest.raises(DomainError):
        PauliSum.from_terms(2, [(1.0, "XQ")])
    with pytest.raises(DomainError):
        PauliSum.from_terms(2, [(1.0, "XZZ")])
    with pytest.raises(DomainError):
        PauliSum.from_terms(1, [(1j, "X")])


def test_apply_matches_kronecker_products(rng):
    for _ in range(10):
        H = random_pauli_sum(rng, 5)
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        np.testing.assert_allclose(apply(H, psi), kron_dense(H) @ psi, atol=1e-12)


def test_dense_form_is_hermitian(rng):
    M = random_pauli_sum(rng, 4).to_dense()
    np.testing.assert_allclose(M, M.conj().T, atol=1e-14)


def test_identity_and_single_z():
    psi = np.arange(1, 9, dtype=complex)
    identity = PauliSum.from_terms(3, [(2.5, "III")])
    np.testing.assert_allclose(apply(identity, psi), 2.5 * psi)
    z2 = PauliSum.from_terms(3, [(1.0, "IZI")])
    signs = np.array([1, 1, -1, -1, 1, 1, -1, -1])
    np.testing.assert_allclose(apply(z2, psi), signs * psi)


def test_apply_rejects_wrong_dimension():
    with pytest.raises(DomainError):
        apply(initial_hamiltonian(2), np.ones(8))


def test_norm_is_coefficient_two_norm():
    H = PauliSum.from_terms(2, [(3.0, "XI"), (-4.0, "ZZ")])
    assert H.norm() == pytest.approx(5.0)
    assert np.trace(H.to_dense() @ H.to_dense()).real / H.dim == pytest.approx(25.0)


def test_ground_state_respects_cap():
    with pytest.raises(ResourceLimitError):
        ground_state(initial_hamiltonian(3), cap=2)
    with pytest.raises(ResourceLimitError):
        ground_state(PauliSum.from_terms(3, [(1.0, "ZII")]), cap=2)


def test_assemble_at_the_ends(pair_instance):
    setup = ramp_setup(pair_instance, 5.0)
    assert assemble(setup, 0.0) == setup.h_initial
    assert assemble(setup, 1.0) == setup.h_final


def test_assemble_with_z_aux_at_the_ends(pair_instance):
    setup = setup_from_params(pair_instance, 5.0, [0.7, 0.3, 0.2, 0.6, 0.4, 0.2], aux_axis="z")
    assert assemble(setup, 0.0) == setup.h_initial
    assert assemble(setup, 1.0) == setup.h_final


def test_z_local_form_matches_assembly(rng):
    inst = generate_instances("full", 4, 1, seed=5)[0]
    schedules = schedules_from_params([0.8, 0.4, 0.3, 0.7, 0.5, 0.1])
    setup = AnnealSetup(
        h_initial=initial_hamiltonian(4),
        h_final=final_hamiltonian(inst),
        h_aux=aux_hamiltonian(inst, "z"),
        schedules=schedules,
        total_time=1.0,
    )
    for s in rng.random(100):
        np.testing.assert_allclose(
            z_local_form(inst, schedules, float(s)).to_dense(), assemble(setup, float(s)).to_dense(), atol=1e-12
        )


def test_setup_rejects_broken_boundaries(pair_instance):
    F1, F2, F3 = ramp_profile()
    with pytest.raises(DomainError):
        AnnealSetup(initial_hamiltonian(2), spin_glass(pair_instance), aux_hamiltonian(pair_instance, "z"),
                    (F2, F1, F3), 1.0)
    with pytest.raises(DomainError):
        AnnealSetup(initial_hamiltonian(2), spin_glass(pair_instance), aux_hamiltonian(pair_instance, "z"),
                    (F1, F2, F3), 0.0)


def test_instance_json_round_trip(pair_instance):
    assert ProblemInstance.from_json(pair_instance.to_json()) == pair_instance
    heis = generate_instances("heisenberg", 3, 1, seed=0)[0]
    assert ProblemInstance.from_json(heis.to_json()) == heis
