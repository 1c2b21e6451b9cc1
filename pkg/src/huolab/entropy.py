"""Shannon and von Neumann entropies (nats), Gibbs states and entropic bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    EigenvalueDistribution,
    QuantumState,
    SpectralDecomposition,
    check_hermitian,
    ensemble_state,
    expectation,
)
from .errors import PreconditionError, ValidationError
from .hub import HubBasis
from .mub import unbiasedness_deviation
from .rng import derive_rng

NEGATIVE_EIG_TOL = 1e-10
MUB_PRECONDITION_TOL = 1e-8


def shannon_entropy(p) -> float:
    """``-sum p log p`` with ``0 log 0 = 0``.

    Accepts an :class:`EigenvalueDistribution` or a probability vector.
    """
    if isinstance(p, EigenvalueDistribution):
        p = p.probabilities
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def basis_entropy(psi, basis) -> float:
    """Shannon entropy of the outcome distribution of measuring pure ``psi`` in ``basis``."""
    return shannon_entropy(np.abs(np.asarray(basis).conj().T @ psi) ** 2)


def state_spectrum(state: QuantumState):
    """Eigenvalues of rho, with tiny negatives clamped; larger negatives are an error."""
    if state.pure:
        return np.ones(1)
    q = np.linalg.eigvalsh(state.density_matrix())
    if q.min() < -NEGATIVE_EIG_TOL:
        raise ValidationError(f"state has eigenvalue {q.min():.3e} < -1e-10")
    return np.clip(q, 0, None)


def von_neumann_entropy(state: QuantumState) -> float:
    return shannon_entropy(state_spectrum(state))


@dataclass(frozen=True)
class GibbsState:
    beta: float
    log_z: float
    state: QuantumState
    energies: np.ndarray

    @property
    def partition_function(self):
        return float(np.exp(self.log_z))

    @property
    def mean_energy(self):
        return float(self.state.weights @ self.energies)


def gibbs_state(T, beta, spec: SpectralDecomposition | None = None) -> GibbsState:
    """``exp(-beta T) / Z`` through the eigenbasis of ``T``.

    Weights are computed as a softmax of ``-beta E`` so large ``|beta|`` does not
    overflow; ``log_z`` is returned alongside.
    """
    if not np.isfinite(beta):
        raise ValidationError("beta must be finite")
    if spec is None:
        from .core import spectral_decompose

        spec = spectral_decompose(check_hermitian(T, "Hamiltonian"))
    logits = -beta * spec.energies
    log_z = float(logsumexp(logits))
    q = np.exp(logits - log_z)
    q = q / q.sum()
    return GibbsState(float(beta), log_z, ensemble_state(q, spec.vectors), spec.energies)


def gibbs_identity_gap(g: GibbsState) -> float:
    """``S_vN - (log Z + beta <T>)`` evaluated from the Gibbs weights."""
    return shannon_entropy(g.state.weights) - (g.log_z + g.beta * g.mean_energy)


def haar_random_basis(dim, rng) -> np.ndarray:
    """Haar unitary from QR of a complex Ginibre matrix with R's diagonal made positive."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def measured_entropy(state: QuantumState, basis) -> float:
    """Shannon entropy of the diagonal of rho in ``basis``."""
    amp = np.asarray(basis).conj().T @ state.vectors
    return shannon_entropy(np.abs(amp) ** 2 @ state.weights)


@dataclass(frozen=True)
class MinEntropyReport:
    s_vn: float
    eigenbasis_entropy: float
    min_sampled_entropy: float
    trials: int

    @property
    def eigenbasis_gap(self):
        return abs(self.eigenbasis_entropy - self.s_vn)

    @property
    def margin(self):
        return self.min_sampled_entropy - self.s_vn

    def passed(self, tol=1e-10):
        return self.eigenbasis_gap <= tol and self.margin >= -tol


def min_entropy_identity_check(state: QuantumState, trials=200, seed=0) -> MinEntropyReport:
    """Compare ``S_vN`` with basis entropies: equal in the eigenbasis, never lower elsewhere.

    Trial ``k`` draws its Haar basis from the sub-stream ``(seed, "min-entropy", k)``.
    """
    rho = state.density_matrix()
    q, v = np.linalg.eigh(rho)
    if q.min() < -NEGATIVE_EIG_TOL:
        raise ValidationError("state has a negative eigenvalue")
    s = shannon_entropy(np.clip(q, 0, None))
    eig_h = measured_entropy(state, v)
    sampled = [
        measured_entropy(state, haar_random_basis(state.dim, derive_rng(seed, "min-entropy", k)))
        for k in range(trials)
    ]
    return MinEntropyReport(s, eig_h, min(sampled) if sampled else np.inf, trials)


@dataclass(frozen=True)
class UncertaintyResult:
    h1: float
    h2: float
    log_dim: float

    @property
    def slack(self):
        return self.h1 + self.h2 - self.log_dim


def entropic_uncertainty_check(psi, b1, b2) -> UncertaintyResult:
    """``H1 + H2 - log D`` for a pure state measured in two mutually unbiased bases."""
    if isinstance(psi, QuantumState):
        psi = psi.vector
    psi = np.asarray(psi)
    b1 = b1.vectors if isinstance(b1, HubBasis) else np.asarray(b1)
    b2 = b2.vectors if isinstance(b2, HubBasis) else np.asarray(b2)
    dev = unbiasedness_deviation(b1, b2)
    if dev > MUB_PRECONDITION_TOL:
        raise PreconditionError(f"bases are not mutually unbiased (deviation {dev:.2e})")
    return UncertaintyResult(basis_entropy(psi, b1), basis_entropy(psi, b2), float(np.log(len(psi))))


@dataclass(frozen=True)
class NarrowEnergyReport:
    h_energy: float
    h_hub: float
    log_dim: float

    @property
    def bound_holds(self):
        return self.h_hub >= self.log_dim - self.h_energy - 1e-10

    @property
    def narrow_regime(self):
        return self.h_energy <= 0.1 * self.log_dim

    @property
    def hub_ratio(self):
        return self.h_hub / self.log_dim if self.log_dim > 0 else 1.0


def narrow_energy_entropy_bound(psi, spec: SpectralDecomposition, hub: HubBasis) -> NarrowEnergyReport:
    """Energy-basis and HUB entropies of ``psi`` with the bound ``H_HUB >= log D - H_T``."""
    if isinstance(psi, QuantumState):
        psi = psi.vector
    return NarrowEnergyReport(
        basis_entropy(psi, spec.vectors), basis_entropy(psi, hub.vectors), float(np.log(spec.dim))
    )


def energy_entropy(state: QuantumState, spec: SpectralDecomposition) -> float:
    return measured_entropy(state, spec.vectors)


def mean_energy(state: QuantumState, T) -> float:
    return expectation(state, T)
