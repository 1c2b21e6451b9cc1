"""Dense quantum primitives: Hamiltonians, states, observables, spectra.

Matrices are plain ``numpy`` arrays. Hermitian operators are validated on entry
rather than wrapped; the structured objects (spectral decompositions,
observables, states, distributions) are frozen dataclasses.

Units: hbar = 1, energies dimensionless.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Mapping

import numpy as np

from .errors import NumericError, ResourceError, ValidationError
from .rng import as_rng

MAX_DIM = 4096

HERMITIAN_RTOL = 1e-12
ORTHONORMAL_TOL = 1e-10

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

MODELS = ("ising", "xxz", "random")


def check_dim(dim, max_dim=None):
    cap = MAX_DIM if max_dim is None else max_dim
    if dim < 1:
        raise ValidationError(f"dimension must be >= 1, got {dim}")
    if dim > cap:
        raise ResourceError(f"dimension {dim} exceeds the dense cap {cap}")


def check_hermitian(m, name="operator"):
    """Return ``m`` as a square array after checking max|M - M^dag| <= 1e-12 max|M|."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_RTOL * scale:
        raise ValidationError(f"{name} is not Hermitian")
    return m


def embed(op, site, n_sites):
    """Single-site operator ``op`` acting on ``site`` of an ``n_sites`` qubit chain."""
    factors = [ID2] * n_sites
    factors[site] = op
    return reduce(np.kron, factors)


def _bits(n_sites):
    # bits[i, x] = value of qubit i in basis state x, qubit 0 most significant
    x = np.arange(2**n_sites)
    return np.array([(x >> (n_sites - 1 - i)) & 1 for i in range(n_sites)])


def ising_hamiltonian(n_sites, J=1.0, h=1.0, g=0.0, max_dim=None):
    """Open transverse-field Ising chain ``-J sum Z_i Z_{i+1} - h sum X_i - g sum Z_i``.

    ``g`` is an optional longitudinal field; ``g != 0`` breaks integrability.
    """
    if n_sites < 1:
        raise ValidationError("Ising chain needs at least one site")
    dim = 2**n_sites
    check_dim(dim, max_dim)
    z = 1 - 2 * _bits(n_sites)  # +1 for |0>, -1 for |1>
    diag = -g * z.sum(axis=0).astype(float)
    for i in range(n_sites - 1):
        diag = diag - J * z[i] * z[i + 1]
    H = np.diag(diag)
    x = np.arange(dim)
    for i in range(n_sites):
        H[x, x ^ (1 << (n_sites - 1 - i))] -= h
    return H


def xxz_hamiltonian(n_sites, J=1.0, delta=1.0, h=0.0, max_dim=None):
    """Open XXZ chain ``J sum (X X + Y Y + delta Z Z) + h sum Z_i``."""
    if n_sites < 1:
        raise ValidationError("XXZ chain needs at least one site")
    dim = 2**n_sites
    check_dim(dim, max_dim)
    b = _bits(n_sites)
    z = 1 - 2 * b
    diag = h * z.sum(axis=0).astype(float)
    x = np.arange(dim)
    H = np.zeros((dim, dim))
    for i in range(n_sites - 1):
        diag = diag + J * delta * z[i] * z[i + 1]
        # XX + YY = 2 (s+ s- + s- s+): flips anti-aligned neighbours with amplitude 2
        anti = b[i] != b[i + 1]
        mask = (1 << (n_sites - 1 - i)) | (1 << (n_sites - 2 - i))
        H[x[anti], x[anti] ^ mask] += 2 * J
    H[x, x] += diag
    return H


def random_hermitian(dim, seed=None, max_dim=None):
    """GUE-like matrix with E|H_ij|^2 = 1/D, so the spectrum fills roughly [-2, 2]."""
    check_dim(dim, max_dim)
    rng = as_rng(seed)
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    return (a + a.conj().T) / np.sqrt(2 * dim)


@dataclass(frozen=True)
class ModelSpec:
    """Descriptor of a testbed Hamiltonian."""

    model: str
    n_sites: int | None = None
    J: float = 1.0
    h: float = 1.0
    g: float = 0.0
    delta: float = 1.0
    dim: int | None = None
    seed: int = 0

    @classmethod
    def from_mapping(cls, d: Mapping):
        d = dict(d)
        model = d.pop("model", None)
        if model is None:
            raise ValidationError("model descriptor needs a 'model' entry")
        known = {f for f in cls.__dataclass_fields__ if f != "model"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown model parameters: {sorted(extra)}")
        return cls(model=model, **d)

    @property
    def hilbert_dim(self):
        if self.model == "random":
            return self.dim
        return 2**self.n_sites


def build_hamiltonian(spec, max_dim=None):
    """Build a testbed Hamiltonian from a :class:`ModelSpec` or an equivalent mapping.

    Chains (``ising``, ``xxz``) have dimension ``2**n_sites``; ``random`` has
    dimension ``dim`` and is reproducible for a fixed ``seed``.
    """
    if not isinstance(spec, ModelSpec):
        spec = ModelSpec.from_mapping(spec)
    if spec.model not in MODELS:
        raise ValidationError(f"unknown model {spec.model!r}; expected one of {MODELS}")
    if spec.model == "random":
        if spec.dim is None:
            raise ValidationError("random model needs 'dim'")
        return random_hermitian(spec.dim, spec.seed, max_dim)
    if spec.n_sites is None:
        raise ValidationError(f"{spec.model} model needs 'n_sites'")
    if spec.n_sites > 62 or 2**spec.n_sites > (MAX_DIM if max_dim is None else max_dim):
        raise ResourceError(f"2**{spec.n_sites} exceeds the dense cap")
    if spec.model == "ising":
        return ising_hamiltonian(spec.n_sites, spec.J, spec.h, spec.g, max_dim)
    return xxz_hamiltonian(spec.n_sites, spec.J, spec.delta, spec.h, max_dim)


def group_degenerate(values, tol):
    """Split ascending ``values`` into maximal runs whose consecutive gaps are <= ``tol``."""
    if len(values) == 0:
        return []
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    return [np.asarray(g) for g in np.split(np.arange(len(values)), breaks)]


def default_degeneracy_tol(values):
    span = float(values[-1] - values[0]) if len(values) else 0.0
    scale = max(span, float(np.max(np.abs(values))) if len(values) else 0.0)
    return 1e-9 * scale if scale > 0 else 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues, orthonormal eigenvector columns and degenerate groups."""

    energies: np.ndarray
    vectors: np.ndarray
    groups: list
    tol: float

    @property
    def dim(self):
        return len(self.energies)

    def reconstruct(self):
        return (self.vectors * self.energies) @ self.vectors.conj().T

    def eigenstate(self, alpha):
        return self.vectors[:, alpha].copy()

    @property
    def spectral_range(self):
        return float(self.energies[-1] - self.energies[0])


def spectral_decompose(m, degeneracy_tol=None) -> SpectralDecomposition:
    """Eigendecompose a Hermitian matrix and group degenerate eigenvalues.

    Parameters
    ----------
    m : (D, D) array
        Hermitian matrix.
    degeneracy_tol : float, optional
        Gap threshold for grouping; defaults to ``1e-9`` times the spectral scale.

    Returns
    -------
    SpectralDecomposition
        Eigenvalues ascending (stable order for exact ties), groups built by
        chaining consecutive gaps ``<= degeneracy_tol``.
    """
    m = check_hermitian(m)
    if degeneracy_tol is not None and degeneracy_tol <= 0:
        raise ValidationError("degeneracy_tol must be positive")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(m)
        raise NumericError(f"eigensolver failed ({exc}); condition number {cond:.3e}") from exc
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    tol = default_degeneracy_tol(w) if degeneracy_tol is None else degeneracy_tol
    return SpectralDecomposition(w, v, group_degenerate(w, tol), tol)


def check_orthonormal(basis, tol=ORTHONORMAL_TOL, name="basis"):
    basis = np.asarray(basis)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise ValidationError(f"{name} must be a square matrix of column vectors")
    err = np.max(np.abs(basis.conj().T @ basis - np.eye(basis.shape[0])))
    if err > tol:
        raise ValidationError(f"{name} is not orthonormal (max error {err:.2e})")
    return basis


@dataclass(frozen=True)
class Observable:
    """Observable ``sum_j values[j] Pi_j`` stored through its labelled eigenbasis.

    ``basis[:, k]`` is the vector ``|j, s>`` with ``j = labels[k]``; columns are
    grouped by sector and ``values`` is strictly increasing.
    """

    values: np.ndarray
    basis: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        check_orthonormal(self.basis, name="observable basis")
        if np.any(np.diff(values) <= 0):
            raise ValidationError("observable eigenvalues must be strictly increasing")
        if labels.shape != (self.basis.shape[1],):
            raise ValidationError("one sector label per basis column is required")
        if np.any(np.diff(labels) < 0) or labels.min() < 0 or labels.max() >= len(values):
            raise ValidationError("sector labels must be sorted and index into values")
        if len(np.unique(labels)) != len(values):
            raise ValidationError("every eigenvalue needs at least one basis vector")

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def multiplicities(self):
        return np.bincount(self.labels, minlength=len(self.values))

    @property
    def column_values(self):
        """Eigenvalue attached to each basis column (lambda_j for |j, s>)."""
        return self.values[self.labels]

    def sector(self, j):
        return np.flatnonzero(self.labels == j)

    def projector(self, j):
        b = self.basis[:, self.sector(j)]
        return b @ b.conj().T

    def matrix(self):
        return (self.basis * self.column_values) @ self.basis.conj().T

    @property
    def trace(self):
        return float(self.column_values.sum())


def observable_from_matrix(m, degeneracy_tol=None) -> Observable:
    """Build an :class:`Observable` from a Hermitian matrix via its eigendecomposition."""
    spec = spectral_decompose(m, degeneracy_tol)
    labels = np.empty(spec.dim, dtype=int)
    values = []
    for j, g in enumerate(spec.groups):
        labels[g] = j
        values.append(spec.energies[g].mean())
    return Observable(np.array(values), spec.vectors, labels)


@dataclass(frozen=True)
class QuantumState:
    """State ``sum_n q_n |psi_n><psi_n|``; a pure state has a single unit-weight vector."""

    weights: np.ndarray
    vectors: np.ndarray
    pure: bool = False

    @property
    def dim(self):
        return self.vectors.shape[0]

    def density_matrix(self):
        return (self.vectors * self.weights) @ self.vectors.conj().T

    @property
    def vector(self):
        if not self.pure:
            raise ValidationError("state is mixed; no single state vector")
        return self.vectors[:, 0]


def pure_state(psi, normalize=False) -> QuantumState:
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if normalize:
        if norm == 0:
            raise ValidationError("cannot normalize the zero vector")
        psi = psi / norm
    elif abs(norm - 1) > 1e-12:
        raise ValidationError(f"pure state must have unit norm, got {norm:.15g}")
    return QuantumState(np.ones(1), psi[:, None], pure=True)


def mixed_state(rho) -> QuantumState:
    """Validate a density matrix and store it through its spectral weights."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > 1e-12:
        raise ValidationError(f"density matrix must have unit trace, got {tr:.15g}")
    q, v = np.linalg.eigh(rho)
    if q.min() < -1e-10:
        raise ValidationError(f"density matrix has negative eigenvalue {q.min():.3e}")
    keep = q > 0
    return QuantumState(q[keep], v[:, keep])


def ensemble_state(weights, vectors) -> QuantumState:
    """State from explicit weights and orthonormal columns (no eigendecomposition)."""
    weights = np.asarray(weights, dtype=float)
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.ndim != 2 or vectors.shape[1] != len(weights):
        raise ValidationError("need one column per weight")
    if weights.min() < -1e-10 or abs(weights.sum() - 1) > 1e-12:
        raise ValidationError("weights must be non-negative and sum to one")
    g = vectors.conj().T @ vectors
    if np.max(np.abs(g - np.eye(len(weights)))) > ORTHONORMAL_TOL:
        raise ValidationError("state vectors must be orthonormal")
    return QuantumState(np.clip(weights, 0, None), vectors, pure=len(weights) == 1)


def maximally_mixed(dim) -> QuantumState:
    return QuantumState(np.full(dim, 1 / dim), np.eye(dim, dtype=complex))


def random_pure_state(dim, rng=None) -> QuantumState:
    rng = as_rng(rng)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return pure_state(z, normalize=True)


def random_mixed_state(dim, rank=None, rng=None) -> QuantumState:
    """Random density matrix of the given rank (Ginibre construction)."""
    rng = as_rng(rng)
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return mixed_state(rho / np.trace(rho).real)


def _check_same_dim(state, dim, what):
    if state.dim != dim:
        raise ValidationError(f"state dimension {state.dim} does not match {what} dimension {dim}")


def overlap_table(state: QuantumState, obs: Observable) -> np.ndarray:
    """Amplitudes ``D[n, k] = <j,s|psi_n>`` with ``k`` indexing the observable basis columns."""
    _check_same_dim(state, obs.dim, "observable")
    return (obs.basis.conj().T @ state.vectors).T


@dataclass(frozen=True)
class EigenvalueDistribution:
    """Outcome probabilities ``p(lambda_j) = Tr(rho Pi_j)``."""

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValidationError("probabilities must lie in [0, 1]")
        if abs(p.sum() - 1) > 1e-10:
            raise ValidationError(f"probabilities sum to {p.sum():.15g}, not 1")
        object.__setattr__(self, "probabilities", p)

    def as_dict(self):
        return dict(zip(self.values.tolist(), self.probabilities.tolist()))


def eigenvalue_distribution(state: QuantumState, obs: Observable) -> EigenvalueDistribution:
    d = overlap_table(state, obs)
    fine = state.weights @ np.abs(d) ** 2
    p = np.bincount(obs.labels, weights=fine, minlength=len(obs.values))
    return EigenvalueDistribution(obs.values, p)


def expectation(state: QuantumState, m) -> float:
    """``Tr(rho M)`` for Hermitian ``M``; the imaginary part must vanish to 1e-10."""
    m = np.asarray(m)
    if m.shape != (state.dim, state.dim):
        raise ValidationError(f"operator shape {m.shape} does not match state dimension {state.dim}")
    v = state.vectors
    val = np.einsum("n,in,in->", state.weights, v.conj(), m @ v)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericError(f"expectation has imaginary part {val.imag:.3e}; operator not Hermitian?")
    return float(val.real)


def constraints_eval(state, T, E0):
    """Return ``(C_N, C_E) = (Tr rho - 1, Tr(rho T) - E0)``.

    ``state`` may also be a raw matrix, which is not required to be a valid state.
    """
    T = np.asarray(T)
    if isinstance(state, QuantumState):
        rho = state.density_matrix()
    else:
        rho = np.asarray(state)
    if rho.shape != T.shape:
        raise ValidationError(f"state shape {rho.shape} does not match Hamiltonian {T.shape}")
    c_n = np.trace(rho).real - 1
    c_e = np.einsum("ij,ji->", rho, T).real - E0
    return float(c_n), float(c_e)
