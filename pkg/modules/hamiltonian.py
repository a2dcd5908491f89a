from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from modules.errors import DomainError, EigensolverError, InstanceValidationError, ResourceLimitError
from modules.schedule import BOUNDARY, Schedule

logger = logging.getLogger(__name__)

CONNECTIVITIES = ("linear", "cyclic", "star", "full", "heisenberg")
AXES = ("x", "y", "z")

DENSE_LIMIT = 10
DEFAULT_CAP = 14
DEGENERACY_TOL = 1e-9

# (a, b) -> (phase, c) with a·b = phase·c for single-qubit Paulis.
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "Z"): (1j, "X"), ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"), ("Z", "Y"): (-1j, "X"), ("X", "Z"): (-1j, "Y"),
}


def _multiply_strings(a: str, b: str) -> tuple[complex, str]:
    phase = 1 + 0j
    chars = []
    for pa, pb in zip(a, b):
        ph, c = _PRODUCT[(pa, pb)]
        phase *= ph
        chars.append(c)
    return phase, "".join(chars)


def _anticommute(a: str, b: str) -> bool:
    clashes = sum(1 for pa, pb in zip(a, b) if pa != "I" and pb != "I" and pa != pb)
    return clashes % 2 == 1


@dataclass(frozen=True)
class CompiledPauli:
    """
    Matrix-free form of a Pauli sum: terms grouped by their bit-flip mask.

    For each mask x the group holds a weight vector w_x, and
    (Hψ)[b] = Σ_x w_x[b] · ψ[b XOR x].
    """

    dim: int
    groups: dict

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        for perm, weight in self.groups.values():
            if perm is None:
                out += weight * psi
            else:
                out += weight * psi[perm]
        return out

    @staticmethod
    def combine(parts: Iterable[tuple[float, "CompiledPauli"]]) -> "CompiledPauli":
        """Linear combination Σ c_k·H_k without recompiling any term."""
        groups: dict = {}
        dim = None
        for coeff, compiled in parts:
            dim = compiled.dim
            if coeff == 0.0:
                continue
            for mask, (perm, weight) in compiled.groups.items():
                if mask in groups:
                    groups[mask] = (perm, groups[mask][1] + coeff * weight)
                else:
                    groups[mask] = (perm, coeff * weight)
        if dim is None:
            raise DomainError("Cannot combine an empty list of operators")
        return CompiledPauli(dim=dim, groups=groups)


@dataclass(frozen=True)
class PauliSum:
    """
    Hermitian operator Σ c·P over N qubits, with real coefficients.

    Qubit 1 is the leftmost character of each label and the most significant
    bit of the basis index.

    Attributes:
        n_qubits (int): Number of qubits N.
        terms (tuple[tuple[float, str], ...]): Merged (coefficient, label) pairs sorted by label.
    """

    n_qubits: int
    terms: tuple = ()

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[complex, str]], atol: float = 1e-12) -> "PauliSum":
        """
        Validates labels, merges duplicate strings and drops exact zeros.

        Args:
            n_qubits (int): Number of qubits.
            terms: (coefficient, label) pairs; coefficients must be real up to atol.
            atol (float): Tolerance on the imaginary part of merged coefficients.

        Returns:
            PauliSum: The merged operator.
        """
        if n_qubits < 1:
            raise DomainError(f"A Pauli sum needs at least one qubit, got {n_qubits}")
        merged: dict[str, complex] = {}
        for coeff, label in terms:
            if len(label) != n_qubits or set(label) - set("IXYZ"):
                raise DomainError(f"Invalid Pauli label {label!r} for {n_qubits} qubits")
            merged[label] = merged.get(label, 0.0) + coeff
        out = []
        for label in sorted(merged):
            c = complex(merged[label])
            if abs(c.imag) > atol:
                raise DomainError(f"Non-Hermitian coefficient {c} on {label}")
            if c.real != 0.0:
                out.append((float(c.real), label))
        return cls(n_qubits=n_qubits, terms=tuple(out))

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def as_dict(self) -> dict[str, float]:
        return {label: c for c, label in self.terms}

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check_width(other)
        return PauliSum.from_terms(self.n_qubits, [*self.terms, *other.terms])

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum.from_terms(self.n_qubits, [(scalar * c, label) for c, label in self.terms])

    __rmul__ = __mul__

    def _check_width(self, other: "PauliSum") -> None:
        if other.n_qubits != self.n_qubits:
            raise DomainError(f"Qubit counts differ: {self.n_qubits} vs {other.n_qubits}")

    def icommutator(self, other: "PauliSum") -> "PauliSum":
        """
        Returns the Hermitian operator i[self, other] by exact Pauli algebra.

        Args:
            other (PauliSum): Right operand.

        Returns:
            PauliSum: i(AB − BA).
        """
        self._check_width(other)
        out = []
        for ca, a in self.terms:
            for cb, b in other.terms:
                if not _anticommute(a, b):
                    continue
                phase, label = _multiply_strings(a, b)
                out.append((2j * phase * ca * cb, label))
        return PauliSum.from_terms(self.n_qubits, out)

    def norm(self) -> float:
        """Normalized Frobenius norm sqrt(Tr(H²)/2^N) = sqrt(Σc²)."""
        return float(np.sqrt(sum(c * c for c, _ in self.terms)))

    def is_diagonal(self) -> bool:
        return all(set(label) <= {"I", "Z"} for _, label in self.terms)

    @cached_property
    def compiled(self) -> CompiledPauli:
        n = self.n_qubits
        idx = np.arange(self.dim, dtype=np.int64)
        groups: dict = {}
        for coeff, label in self.terms:
            xmask = 0
            zmask = 0
            n_y = 0
            for q, ch in enumerate(label):
                bit = 1 << (n - 1 - q)
                if ch in "XY":
                    xmask |= bit
                if ch in "YZ":
                    zmask |= bit
                if ch == "Y":
                    n_y += 1
            source = idx ^ xmask
            parity = np.zeros(self.dim, dtype=np.int64)
            masked = source & zmask
            for q in range(n):
                parity ^= (masked >> q) & 1
            weight = coeff * (1j ** n_y) * (1.0 - 2.0 * parity)
            perm = None if xmask == 0 else source
            if xmask in groups:
                groups[xmask] = (perm, groups[xmask][1] + weight)
            else:
                groups[xmask] = (perm, weight.astype(complex))
        return CompiledPauli(dim=self.dim, groups=groups)

    def diagonal(self) -> np.ndarray:
        """Diagonal in the computational basis (real part of the mask-0 group)."""
        group = self.compiled.groups.get(0)
        if group is None:
            return np.zeros(self.dim)
        return group[1].real.copy()

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        idx = np.arange(self.dim, dtype=np.int64)
        rows, cols, vals = [], [], []
        for perm, weight in self.compiled.groups.values():
            rows.append(idx)
            cols.append(idx if perm is None else perm)
            vals.append(weight)
        if not rows:
            return scipy.sparse.csr_matrix((self.dim, self.dim), dtype=complex)
        return scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        ).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


@dataclass(frozen=True)
class HeisenbergParams:
    omega: float = 1.0
    g: float = 0.1
    delta: float = 5.0


@dataclass(frozen=True)
class ProblemInstance:
    """
    One seeded draw of a final Hamiltonian.

    Attributes:
        connectivity (str): linear | cyclic | star | full | heisenberg.
        n_qubits (int): Number of qubits N.
        omegas (tuple[float, ...]): Local fields ω_j (Heisenberg: ω_H on every site).
        couplings (tuple[tuple[int, int, float], ...]): (j, k, g) with 1-based sites, in edge order.
        heisenberg (HeisenbergParams | None): Chain parameters for the heisenberg family.
        seed (int | None): Child seed the instance was drawn from.
        instance_id (int): Position in its ensemble.
    """

    connectivity: str
    n_qubits: int
    omegas: tuple
    couplings: tuple = ()
    heisenberg: Optional[HeisenbergParams] = None
    seed: Optional[int] = None
    instance_id: int = 0

    def coupling_map(self) -> dict[tuple[int, int], float]:
        return {(i, j): g for i, j, g in self.couplings}

    def to_json(self) -> str:
        payload = {
            "connectivity": self.connectivity,
            "N": self.n_qubits,
            "seed": self.seed,
            "instance_id": self.instance_id,
            "omegas": list(self.omegas),
            "couplings": [{"i": i, "j": j, "g": g} for i, j, g in self.couplings],
        }
        if self.heisenberg is not None:
            payload["heisenberg"] = {"omega": self.heisenberg.omega, "g": self.heisenberg.g, "delta": self.heisenberg.delta}
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        data = json.loads(text) if isinstance(text, str) else text
        heis = data.get("heisenberg")
        return cls(
            connectivity=data["connectivity"],
            n_qubits=int(data["N"]),
            omegas=tuple(float(w) for w in data["omegas"]),
            couplings=tuple((int(c["i"]), int(c["j"]), float(c["g"])) for c in data.get("couplings", [])),
            heisenberg=HeisenbergParams(**heis) if heis else None,
            seed=data.get("seed"),
            instance_id=int(data.get("instance_id", 0)),
        )


@dataclass(frozen=True)
class AnnealSetup:
    """
    One complete evolution H(t) = F1(t/T)H_i + F2(t/T)H_f + F3(t/T)H_aux.

    Attributes:
        h_initial (PauliSum): H_i.
        h_final (PauliSum): H_f.
        h_aux (PauliSum): H_aux (may be the empty sum).
        schedules (tuple): (F1, F2, F3).
        total_time (float): T in units of 1/ε.
        epsilon (float): Transverse-field scale ε.
        enforce_boundary (bool): Check F1(0)=F2(1)=1 and the zero conditions.
        labels (dict): Free-form provenance (strategy, aux axis, ...).
    """

    h_initial: PauliSum
    h_final: PauliSum
    h_aux: PauliSum
    schedules: tuple
    total_time: float
    epsilon: float = 1.0
    enforce_boundary: bool = True
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        widths = {self.h_initial.n_qubits, self.h_final.n_qubits, self.h_aux.n_qubits}
        if len(widths) != 1:
            raise DomainError(f"Operators act on different qubit counts: {sorted(widths)}")
        if not self.total_time > 0.0:
            raise DomainError(f"Total time must be positive, got {self.total_time}")
        if self.enforce_boundary:
            for role, F in zip(("F1", "F2", "F3"), self.schedules):
                start, end = BOUNDARY[role]
                if abs(F(0.0) - start) > 1e-12 or abs(F(1.0) - end) > 1e-12:
                    raise DomainError(f"{role} violates its boundary conditions ({start} -> {end})")

    @property
    def n_qubits(self) -> int:
        return self.h_final.n_qubits


def edges(connectivity: str, n_qubits: int) -> list[tuple[int, int]]:
    """
    Edge list (1-based) of a connectivity family.

    Args:
        connectivity (str): linear, cyclic, star, full or heisenberg (open chain).
        n_qubits (int): Number of sites.

    Returns:
        list[tuple[int, int]]: Edges in canonical order.
    """
    n = n_qubits
    if connectivity in ("linear", "heisenberg"):
        return [(j, j + 1) for j in range(1, n)]
    if connectivity == "cyclic":
        return [(j, j + 1) for j in range(1, n)] + ([(n, 1)] if n >= 2 else [])
    if connectivity == "star":
        return [(1, j) for j in range(2, n + 1)]
    if connectivity == "full":
        return list(combinations(range(1, n + 1), 2))
    raise DomainError(f"Unknown connectivity: {connectivity}")


def _label(n: int, sites: dict[int, str]) -> str:
    return "".join(sites.get(q, "I") for q in range(1, n + 1))


def initial_hamiltonian(n_qubits: int, epsilon: float = 1.0) -> PauliSum:
    """H_i = ε Σ_j σ^x_j."""
    if n_qubits < 1:
        raise DomainError(f"N must be at least 1, got {n_qubits}")
    return PauliSum.from_terms(n_qubits, [(epsilon, _label(n_qubits, {j: "X"})) for j in range(1, n_qubits + 1)])


def minus_state(n_qubits: int) -> np.ndarray:
    """⊗|−⟩: amplitude (−1)^popcount(b) / 2^(N/2) on every basis state."""
    if n_qubits < 1:
        raise DomainError(f"N must be at least 1, got {n_qubits}")
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    parity = np.zeros_like(idx)
    for q in range(n_qubits):
        parity ^= (idx >> q) & 1
    return (1.0 - 2.0 * parity).astype(complex) / np.sqrt(1 << n_qubits)


def spin_glass(instance: ProblemInstance) -> PauliSum:
    """
    Diagonal spin-glass H_f = Σ ω_j σ^z_j + Σ g_jk σ^z_j σ^z_k on the instance's graph.

    Raises:
        InstanceValidationError: If a declared edge has no coupling or omegas has the wrong length.
    """
    n = instance.n_qubits
    if len(instance.omegas) != n:
        raise InstanceValidationError(f"Expected {n} local fields, got {len(instance.omegas)}")
    cmap = instance.coupling_map()
    terms = [(w, _label(n, {j: "Z"})) for j, w in enumerate(instance.omegas, start=1)]
    for i, j in edges(instance.connectivity, n):
        if (i, j) not in cmap:
            raise InstanceValidationError(f"Missing coupling for edge ({i}, {j}) of {instance.connectivity} graph")
        terms.append((cmap[(i, j)], _label(n, {i: "Z", j: "Z"})))
    return PauliSum.from_terms(n, terms)


def heisenberg_chain(n_qubits: int, omega_h: float, g_h: float, delta: float) -> PauliSum:
    """Open Heisenberg chain ω_H Σσ^z + g_H Σ(σ^xσ^x + δσ^yσ^y + σ^zσ^z)."""
    n = n_qubits
    if n < 1:
        raise DomainError(f"N must be at least 1, got {n}")
    terms = [(omega_h, _label(n, {j: "Z"})) for j in range(1, n + 1)]
    for i, j in edges("heisenberg", n):
        terms.append((g_h, _label(n, {i: "X", j: "X"})))
        terms.append((g_h * delta, _label(n, {i: "Y", j: "Y"})))
        terms.append((g_h, _label(n, {i: "Z", j: "Z"})))
    return PauliSum.from_terms(n, terms)


def final_hamiltonian(instance: ProblemInstance) -> PauliSum:
    """Dispatches to heisenberg_chain or spin_glass by connectivity."""
    if instance.connectivity == "heisenberg":
        h = instance.heisenberg or HeisenbergParams()
        return heisenberg_chain(instance.n_qubits, h.omega, h.g, h.delta)
    return spin_glass(instance)


def aux_hamiltonian(instance: ProblemInstance, axis: str) -> PauliSum:
    """H_aux = Σ ω_j σ^α_j with the instance's local fields on axis α."""
    if axis not in AXES:
        raise DomainError(f"Auxiliary axis must be one of {AXES}, got {axis!r}")
    n = instance.n_qubits
    label = axis.upper()
    return PauliSum.from_terms(n, [(w, _label(n, {j: label})) for j, w in enumerate(instance.omegas, start=1)])


def empty_sum(n_qubits: int) -> PauliSum:
    return PauliSum(n_qubits=n_qubits, terms=())


def assemble(setup: AnnealSetup, s: float) -> PauliSum:
    """H(s) = F1(s)H_i + F2(s)H_f + F3(s)H_aux with duplicate strings merged."""
    f1, f2, f3 = (F(s) for F in setup.schedules)
    terms = [(f1 * c, label) for c, label in setup.h_initial.terms]
    terms += [(f2 * c, label) for c, label in setup.h_final.terms]
    terms += [(f3 * c, label) for c, label in setup.h_aux.terms]
    return PauliSum.from_terms(setup.n_qubits, terms)


def z_local_form(instance: ProblemInstance, schedules: tuple[Schedule, Schedule, Schedule], s: float, epsilon: float = 1.0) -> PauliSum:
    """
    Grouped form F1·εΣσ^x + (F2+F3)Σω_jσ^z + F2Σg σ^zσ^z for a z-local auxiliary term.
    """
    f1, f2, f3 = (F(s) for F in schedules)
    n = instance.n_qubits
    terms = [(f1 * epsilon, _label(n, {j: "X"})) for j in range(1, n + 1)]
    terms += [((f2 + f3) * w, _label(n, {j: "Z"})) for j, w in enumerate(instance.omegas, start=1)]
    terms += [(f2 * g, _label(n, {i: "Z", j: "Z"})) for i, j, g in instance.couplings]
    return PauliSum.from_terms(n, terms)


def apply(H: PauliSum, psi: np.ndarray) -> np.ndarray:
    """H|ψ⟩ without materializing the 2^N × 2^N matrix."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (H.dim,):
        raise DomainError(f"State of shape {psi.shape} does not match dimension {H.dim}")
    return H.compiled.matvec(psi)


def linear_operator(H: PauliSum) -> scipy.sparse.linalg.LinearOperator:
    compiled = H.compiled
    return scipy.sparse.linalg.LinearOperator(
        (H.dim, H.dim), matvec=compiled.matvec, rmatvec=compiled.matvec, dtype=complex
    )


def _degenerate(energies: np.ndarray, e0: float, tol: float) -> np.ndarray:
    return np.abs(energies - e0) <= tol * max(1.0, abs(e0))


def lowest_eigenpairs(H: PauliSum, k: int, cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """
    The k smallest eigenpairs, sorted ascending.

    Diagonal operators are read off exactly, N ≤ 10 uses dense eigh and larger
    systems up to the cap use Lanczos (eigsh) on the matrix-free operator.

    Raises:
        ResourceLimitError: If N exceeds the cap.
        EigensolverError: If Lanczos does not converge.
    """
    n = H.n_qubits
    if n > cap:
        raise ResourceLimitError(f"N = {n} exceeds the diagonalization cap of {cap} qubits")
    k = min(k, H.dim)
    if H.is_diagonal():
        diag = H.diagonal()
        order = np.argsort(diag, kind="stable")[:k]
        vecs = np.zeros((H.dim, k), dtype=complex)
        vecs[order, np.arange(k)] = 1.0
        return diag[order], vecs
    if n <= DENSE_LIMIT or k >= H.dim - 1:
        logger.debug("Dense eigh for %d qubits", n)
        values, vectors = scipy.linalg.eigh(H.to_dense(), subset_by_index=[0, k - 1])
        return values, vectors
    logger.debug("Lanczos eigsh for %d qubits, k=%d", n, k)
    try:
        values, vectors = scipy.sparse.linalg.eigsh(linear_operator(H), k=k, which="SA", tol=1e-12)
    except scipy.sparse.linalg.ArpackNoConvergence as err:
        residuals = [float(np.linalg.norm(apply(H, v) - e * v)) for e, v in zip(err.eigenvalues, err.eigenvectors.T)]
        raise EigensolverError("Lanczos eigensolver did not converge", residuals) from err
    order = np.argsort(values)
    return values[order], vectors[:, order]


def ground_state(H: PauliSum, cap: int = DEFAULT_CAP, degeneracy_tol: float = DEGENERACY_TOL) -> tuple[float, list[np.ndarray]]:
    """
    Smallest eigenvalue and an orthonormal basis of its eigenspace.

    Args:
        H (PauliSum): Operator to diagonalize.
        cap (int): Largest N accepted.
        degeneracy_tol (float): Relative tolerance grouping eigenvalues with E0.

    Returns:
        tuple[float, list[np.ndarray]]: (E0, eigenspace basis).
    """
    if H.is_diagonal():
        if H.n_qubits > cap:
            raise ResourceLimitError(f"N = {H.n_qubits} exceeds the diagonalization cap of {cap} qubits")
        diag = H.diagonal()
        e0 = float(diag.min())
        members = np.flatnonzero(_degenerate(diag, e0, degeneracy_tol))
        basis = []
        for b in members:
            v = np.zeros(H.dim, dtype=complex)
            v[b] = 1.0
            basis.append(v)
        return e0, basis
    k = 4
    while True:
        values, vectors = lowest_eigenpairs(H, k, cap)
        e0 = float(values[0])
        mask = _degenerate(values, e0, degeneracy_tol)
        if not mask[-1] or k >= H.dim:
            break
        k = min(2 * k, H.dim)
    return e0, [vectors[:, i] for i in np.flatnonzero(mask)]
