"""Closed-system dynamics: exact evolution, narrow-energy states and ensembles.

Evolution multiplies energy-basis amplitudes by phases, so any time point
costs O(D) after one eigendecomposition (O(D^2) to return to another basis).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Observable, QuantumState, SpectralDecomposition, ensemble_state, pure_state
from .entropy import shannon_entropy
from .equilibrium import EnergyShell, energy_shell
from .errors import PreconditionError, ValidationError
from .hub import PHASE_TABLE_TOL
from .rng import as_rng


def _vec(psi):
    return psi.vector if isinstance(psi, QuantumState) else np.asarray(psi, dtype=complex)


def energy_amplitudes(psi0, spec: SpectralDecomposition):
    return spec.vectors.conj().T @ _vec(psi0)


def evolve(psi0, spec: SpectralDecomposition, t):
    """``psi(t) = sum_a c_a exp(-i E_a t) |E_a>``; a 1-D array of times gives one row per time."""
    c = energy_amplitudes(psi0, spec)
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return spec.vectors @ (c * np.exp(-1j * spec.energies * t))
    return (c * np.exp(-1j * np.outer(t, spec.energies))) @ spec.vectors.T


@dataclass(frozen=True)
class NarrowState:
    vector: np.ndarray
    shell: EnergyShell
    energy_entropy: float

    @property
    def state(self):
        return pure_state(self.vector)


def narrow_energy_state(spec: SpectralDecomposition, shell: EnergyShell, profile="uniform-phase-random", seed=0):
    """Pure state supported on the shell members with random phases.

    ``profile`` is ``"uniform-phase-random"`` (equal weights) or
    ``("gaussian", sigma)`` (weights ``exp(-(E - E0)^2 / (2 sigma^2))``).
    """
    if shell.size == 0:
        raise ValidationError("energy shell is empty")
    rng = as_rng(seed)
    e = spec.energies[shell.members]
    if profile == "uniform-phase-random":
        w = np.ones(shell.size)
    elif isinstance(profile, tuple) and profile[0] == "gaussian":
        w = np.exp(-((e - shell.e0) ** 2) / (2 * float(profile[1]) ** 2))
    else:
        raise ValidationError(f"unknown profile {profile!r}")
    w = w / w.sum()
    phases = np.exp(2j * np.pi * rng.random(shell.size))
    if shell.size == 1:
        phases[:] = 1
    c = np.zeros(spec.dim, dtype=complex)
    c[shell.members] = np.sqrt(w) * phases
    psi = spec.vectors @ c
    return NarrowState(psi / np.linalg.norm(psi), shell, shannon_entropy(w))


@dataclass(frozen=True)
class MicrocanonicalState:
    shell: EnergyShell
    state: QuantumState


def microcanonical_state(spec: SpectralDecomposition, e0, width=None, min_levels=3) -> MicrocanonicalState:
    shell = energy_shell(spec, e0, width, min_levels)
    return microcanonical_from_shell(spec, shell)


def microcanonical_from_shell(spec, shell: EnergyShell) -> MicrocanonicalState:
    w = np.full(shell.size, 1 / shell.size)
    return MicrocanonicalState(shell, ensemble_state(w, spec.vectors[:, shell.members]))


@dataclass(frozen=True)
class DiagonalEnsemble:
    weights: np.ndarray
    state: QuantumState


def diagonal_ensemble(psi0, spec: SpectralDecomposition) -> DiagonalEnsemble:
    """Dephased state ``sum_a |c_a|^2 |E_a><E_a|``."""
    w = np.abs(energy_amplitudes(psi0, spec)) ** 2
    return DiagonalEnsemble(w, QuantumState(w, spec.vectors))


def energy_matrix(obs, spec: SpectralDecomposition):
    m = obs.matrix() if isinstance(obs, Observable) else np.asarray(obs)
    return spec.vectors.conj().T @ m @ spec.vectors


def ensemble_expectation(obs, state: QuantumState):
    m = obs.matrix() if isinstance(obs, Observable) else np.asarray(obs)
    v = state.vectors
    return float(np.einsum("n,in,in->", state.weights, v.conj(), m @ v).real)


def infinite_time_average(psi0, spec: SpectralDecomposition, obs, degeneracy_tol=None):
    """Long-time average of ``<O(t)>`` including cross terms of degenerate level pairs.

    Reduces to ``Tr(O rho_DE)`` for a nondegenerate spectrum.
    """
    c = energy_amplitudes(psi0, spec)
    o = energy_matrix(obs, spec)
    tol = spec.tol if degeneracy_tol is None else degeneracy_tol
    same = np.abs(spec.energies[:, None] - spec.energies[None, :]) <= tol
    return float(np.real(np.sum(np.outer(c.conj(), c) * o * same)))


def window_average(psi0, spec: SpectralDecomposition, obs, t1, t2):
    """Exact average of ``<O(t)>`` over ``[t1, t2]`` (closed form of each oscillating term)."""
    c = energy_amplitudes(psi0, spec)
    o = energy_matrix(obs, spec)
    w = spec.energies[:, None] - spec.energies[None, :]
    small = np.abs(w) * (t2 - t1) < 1e-12
    safe = np.where(small, 1.0, w)
    avg = np.where(small, 1.0, (np.exp(1j * safe * t2) - np.exp(1j * safe * t1)) / (1j * safe * (t2 - t1)))
    return float(np.real(np.sum(np.outer(c.conj(), c) * o * avg)))


def default_time_grid(spec: SpectralDecomposition, n=200):
    """``n`` log-spaced times in [1e-2, 1e4] in units of inverse spectral range."""
    return np.logspace(-2, 4, n) / max(spec.spectral_range, 1e-300)


@dataclass(frozen=True)
class DeMcReport:
    de_value: float
    mc_value: float
    trace_over_dim: float

    @property
    def difference(self):
        return abs(self.de_value - self.mc_value)

    def passed(self, tol=1e-10):
        return self.difference <= tol


def de_equals_mc_for_huo(psi0, spec: SpectralDecomposition, obs: Observable, shell: EnergyShell | None = None):
    """Compare ``Tr(O rho_DE)`` with ``Tr(O rho_mc)`` for a HUO.

    The shell defaults to the energy support of ``psi0``.
    """
    dev = np.max(np.abs(np.abs(obs.basis.conj().T @ spec.vectors) ** 2 - 1 / spec.dim))
    if dev > PHASE_TABLE_TOL:
        raise PreconditionError(f"observable is not a HUO for this Hamiltonian (deviation {dev:.2e})")
    de = diagonal_ensemble(psi0, spec)
    shell = shell or support_shell(psi0, spec)
    mc = microcanonical_from_shell(spec, shell)
    return DeMcReport(ensemble_expectation(obs, de.state), ensemble_expectation(obs, mc.state), obs.trace / spec.dim)


def support_shell(psi0, spec: SpectralDecomposition, tol=1e-12) -> EnergyShell:
    """Shell spanning the energy support of ``psi0``: every level between its extreme occupied energies."""
    w = np.abs(energy_amplitudes(psi0, spec)) ** 2
    occ = np.flatnonzero(w > tol)
    lo, hi = spec.energies[occ[0]], spec.energies[occ[-1]]
    members = np.flatnonzero((spec.energies >= lo) & (spec.energies <= hi))
    return EnergyShell(float((lo + hi) / 2), float(hi - lo), members)


@dataclass(frozen=True)
class ThermalizationTrace:
    """Per-time expectation, observable entropy, fine-grained basis entropy and TV distance."""

    times: np.ndarray
    expectation: np.ndarray
    entropy: np.ndarray
    basis_entropy: np.ndarray
    tv_distance: np.ndarray
    mc_expectation: float
    mc_distribution: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("time grid must be strictly increasing")

    def rows(self):
        return zip(self.times, self.expectation, self.entropy, self.tv_distance)


def thermalization_trace(psi0, spec: SpectralDecomposition, obs: Observable, times=None,
                         shell: EnergyShell | None = None, chunk=512) -> ThermalizationTrace:
    """Evolve ``psi0`` over ``times`` and record ``<O>``, ``H_O``, the entropy in the
    observable's own basis, and the total-variation distance of ``p(lambda_j, t)``
    from the microcanonical distribution over ``shell`` (default: support of ``psi0``)."""
    times = default_time_grid(spec) if times is None else np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValidationError("time grid must be strictly increasing")
    c = energy_amplitudes(psi0, spec)
    w = obs.basis.conj().T @ spec.vectors  # <j,s|E_a>
    shell = shell or support_shell(psi0, spec)
    mc = microcanonical_from_shell(spec, shell)
    mc_fine = np.abs(w[:, shell.members]) ** 2 @ mc.state.weights
    p_mc = np.bincount(obs.labels, weights=mc_fine, minlength=len(obs.values))
    lam = obs.column_values
    onehot = np.eye(len(obs.values))[obs.labels]
    exp_v, h_v, hb_v, tv_v = (np.empty(len(times)) for _ in range(4))
    for start in range(0, len(times), chunk):
        sl = slice(start, start + chunk)
        ct = c * np.exp(-1j * np.outer(times[sl], spec.energies))
        amp2 = np.abs(ct @ w.T) ** 2  # (t, D) fine-grained probabilities
        exp_v[sl] = amp2 @ lam
        p = amp2 @ onehot
        h_v[sl] = _row_entropy(p)
        hb_v[sl] = _row_entropy(amp2)
        tv_v[sl] = 0.5 * np.abs(p - p_mc).sum(axis=1)
    return ThermalizationTrace(times, exp_v, h_v, hb_v, tv_v, float(p_mc @ obs.values), p_mc)


def _row_entropy(p):
    p = np.clip(p, 0, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(p), 0.0)
    return -t.sum(axis=1)
