"""Observable equilibrium: sector energies, equilibrium-equation residuals,
Lagrange multipliers and constrained maximisation of the observable entropy.

For a state ``rho = sum_n q_n |psi_n><psi_n|`` and an observable with
labelled eigenbasis ``|j,s>`` the sector energies are
``E_n(j,s) = <psi_n| Pi_js T |psi_n>``. At a constrained maximum of ``H_O``
they are real, and

    -|D|^2 log p(lambda_j) = (1 - lambda_N) |D|^2 - lambda_E E_n(j,s)

holds on the support, with ``D = <j,s|psi_n>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares, minimize
from scipy.special import logsumexp

from .core import (
    Observable,
    QuantumState,
    SpectralDecomposition,
    check_hermitian,
    eigenvalue_distribution,
    expectation,
    overlap_table,
    pure_state,
    spectral_decompose,
)
from .entropy import shannon_entropy
from .errors import ConvergenceError, NumericError, PreconditionError, ValidationError
from .rng import derive_rng

SUPPORT_TOL = 1e-12
EIGENSTATE_TOL = 1e-8


def sector_energies(state: QuantumState, obs: Observable, T) -> np.ndarray:
    """Complex table ``E[n, k] = <psi_n| Pi_k T |psi_n>`` over basis columns ``k = (j, s)``."""
    T = np.asarray(T)
    d = overlap_table(state, obs)  # (n, D)
    t_psi = (obs.basis.conj().T @ (T @ state.vectors)).T
    return d.conj() * t_psi


@dataclass(frozen=True)
class LagrangeMultipliers:
    lambda_n: float
    lambda_e: float

    @property
    def zero_point(self):
        """``1 - lambda_N``, the entropy at zero energy in the linear relation."""
        return 1.0 - self.lambda_n


@dataclass(frozen=True)
class EquilibriumReport:
    """Residuals of both equilibrium equations at a state.

    ``ee2_residuals`` is aligned with ``support`` (pairs ``(n, k)``);
    ``linear_relation_gap`` is ``|H_O - (1 - lambda_N) + lambda_E E0|``.
    """

    ee1_residual: float
    ee2_residuals: np.ndarray
    support: np.ndarray
    multipliers: LagrangeMultipliers
    entropy: float
    energy: float
    linear_relation_gap: float
    fit_rank: int = 2

    @property
    def ee2_max(self):
        return float(np.max(self.ee2_residuals)) if self.ee2_residuals.size else 0.0


def _support_terms(state, obs, T):
    d = overlap_table(state, obs)
    w = np.abs(d) ** 2
    e = sector_energies(state, obs, T)
    fine = state.weights @ w
    p = np.bincount(obs.labels, weights=fine, minlength=len(obs.values))
    support = (w > SUPPORT_TOL) & (state.weights[:, None] > 0)
    n_idx, k_idx = np.nonzero(support)
    p_sup = p[obs.labels[k_idx]]
    if np.any(p_sup <= 0):
        raise NumericError("p(lambda_j) is not positive on the support")
    return w, e, p, support, n_idx, k_idx, p_sup


def fit_multipliers(state: QuantumState, obs: Observable, T):
    """Least-squares ``(1 - lambda_N, lambda_E)`` from the log-distribution equation on the support.

    Returns the multipliers and the rank of the 2-column design matrix; rank 1
    means only one combination is determined (the minimum-norm solution is
    returned).
    """
    w, e, p, support, n_idx, k_idx, p_sup = _support_terms(state, obs, T)
    ww = w[n_idx, k_idx]
    a = np.column_stack([ww, -e[n_idx, k_idx].real])
    b = -ww * np.log(p_sup)
    scale = np.linalg.norm(a, axis=0)
    # an energy column at rounding level carries no information: drop it (lambda_E = 0)
    live = scale > 1e-12 * scale.max()
    sol = np.zeros(2)
    sub, _, rank, _ = np.linalg.lstsq(a[:, live] / scale[live], b, rcond=1e-10)
    sol[live] = sub / scale[live]
    return LagrangeMultipliers(1.0 - sol[0], sol[1]), int(rank)


def ee_residuals(state: QuantumState, obs: Observable, T, multipliers=None, E0=None) -> EquilibriumReport:
    """Evaluate both equilibrium equations at ``state``.

    The reality equation is measured as ``max |Im E_n(j,s)|`` over the support;
    the log-distribution equation residual per support entry uses ``Re E_n(j,s)``.
    Multipliers default to a least-squares fit; ``E0`` defaults to ``Tr(rho T)``.
    """
    T = check_hermitian(T, "Hamiltonian")
    rank = 2
    if multipliers is None:
        multipliers, rank = fit_multipliers(state, obs, T)
    w, e, p, support, n_idx, k_idx, p_sup = _support_terms(state, obs, T)
    ww = w[n_idx, k_idx]
    e_sup = e[n_idx, k_idx]
    ee1 = float(np.max(np.abs(e_sup.imag))) if e_sup.size else 0.0
    a, lam_e = multipliers.zero_point, multipliers.lambda_e
    ee2 = np.abs(-ww * np.log(p_sup) - a * ww + lam_e * e_sup.real)
    h = shannon_entropy(p)
    energy = expectation(state, T)
    e0 = energy if E0 is None else E0
    gap = abs(h - a + lam_e * e0)
    return EquilibriumReport(ee1, ee2, np.column_stack([n_idx, k_idx]), multipliers, h, energy, gap, rank)


def distribution_time_derivative(state: QuantumState, obs: Observable, T) -> np.ndarray:
    """``dp(lambda_j)/dt = 2 sum_{n,s} q_n Im E_n(j,s)`` (hbar = 1), one entry per ``obs.values``."""
    e = sector_energies(state, obs, T)
    fine = 2 * (state.weights @ e.imag)
    return np.bincount(obs.labels, weights=fine, minlength=len(obs.values))


def evolve_state(state: QuantumState, spec: SpectralDecomposition, t) -> QuantumState:
    """Unitary evolution ``exp(-i T t)`` of every component of ``state``."""
    c = spec.vectors.conj().T @ state.vectors
    vt = spec.vectors @ (np.exp(-1j * spec.energies * t)[:, None] * c)
    return QuantumState(state.weights, vt, state.pure)


def finite_difference_derivative(state, obs, spec, step=1e-6):
    """Centred difference of ``p(lambda_j, t)`` at ``t = 0``."""
    plus = eigenvalue_distribution(evolve_state(state, spec, step), obs).probabilities
    minus = eigenvalue_distribution(evolve_state(state, spec, -step), obs).probabilities
    return (plus - minus) / (2 * step)


@dataclass(frozen=True)
class EnergyShell:
    """Energy window ``[E0 - dE/2, E0 + dE/2]`` and the eigenvalue indices inside it."""

    e0: float
    width: float
    members: np.ndarray

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValidationError("energy shell is empty")

    @property
    def size(self):
        return len(self.members)


def energy_shell(spec: SpectralDecomposition, e0, width=None, min_levels=3) -> EnergyShell:
    """Indices of eigenvalues within ``width/2`` of ``e0``.

    ``width`` defaults to 5% of the spectral range. Fewer than ``min_levels``
    members raises :class:`ValidationError`.
    """
    if width is None:
        width = 0.05 * spec.spectral_range
    if width <= 0:
        raise ValidationError("delta must be positive")
    members = np.flatnonzero(np.abs(spec.energies - e0) <= width / 2)
    if len(members) < min_levels:
        raise ValidationError(
            f"shell around {e0:.6g} of width {width:.3g} holds {len(members)} levels; need >= {min_levels}"
        )
    return EnergyShell(float(e0), float(width), members)


@dataclass(frozen=True)
class ConstantDistributionReport:
    probabilities: np.ndarray
    support_size: int
    fine_support: np.ndarray
    max_fine_deviation: float
    max_sector_deviation: float
    tol: float

    @property
    def passed(self):
        return self.max_fine_deviation <= self.tol and self.max_sector_deviation <= self.tol


def constant_distribution_check(psi, obs: Observable, T, tol=1e-8) -> ConstantDistributionReport:
    """Check that an energy eigenstate gives a flat distribution on its support.

    Over the labelled basis, each ``|<j,s|psi>|^2`` must be ``1/d`` on the support
    (``d`` states) and zero elsewhere, so ``p(lambda_j) = (#support states in j)/d``.
    """
    psi = psi.vector if isinstance(psi, QuantumState) else np.asarray(psi)
    T = np.asarray(T)
    tpsi = T @ psi
    e = np.vdot(psi, tpsi).real
    if np.linalg.norm(tpsi - e * psi) > EIGENSTATE_TOL * max(1.0, np.max(np.abs(T))):
        raise PreconditionError("state is not an eigenvector of the Hamiltonian")
    fine = np.abs(obs.basis.conj().T @ psi) ** 2
    on = fine > tol
    d = int(on.sum())
    dev_fine = float(np.max(np.abs(fine - np.where(on, 1.0 / d, 0.0))))
    p = np.bincount(obs.labels, weights=fine, minlength=len(obs.values))
    expected = np.bincount(obs.labels, weights=on.astype(float), minlength=len(obs.values)) / d
    return ConstantDistributionReport(p, d, on, dev_fine, float(np.max(np.abs(p - expected))), tol)


# --- constrained maximisation -------------------------------------------------------------


@dataclass
class MaximizeOptions:
    n_starts: int = 4
    seed: int = 0
    constraint_tol: float = 1e-8
    grad_tol: float = 1e-9
    max_iter: int = 100_000
    max_outer: int = 40
    penalty: float = 10.0


@dataclass(frozen=True)
class MaximizeResult:
    state: QuantumState
    multipliers: LagrangeMultipliers
    report: EquilibriumReport
    entropy: float
    start_entropies: list = field(default_factory=list)
    converged: bool = True

    @property
    def multistart_spread(self):
        return max(self.start_entropies) - min(self.start_entropies) if self.start_entropies else 0.0

    @property
    def multistart_disagreement(self):
        return self.multistart_spread > 1e-8


class _Problem:
    """Entropy of sector weights and energy of a normalised amplitude vector in the (j,s) basis."""

    def __init__(self, labels, n_values, t_b, e0, scale):
        self.labels = labels
        self.n_values = n_values
        self.t_b = t_b
        self.e0 = e0
        self.scale = scale

    def unpack(self, x):
        n = len(x) // 2
        z = x[:n] + 1j * x[n:]
        r = np.linalg.norm(z)
        return z / r, r

    def parts(self, psi):
        w = np.abs(psi) ** 2
        p = np.bincount(self.labels, weights=w, minlength=self.n_values)
        logp = np.log(np.maximum(p, 1e-300))
        h = -float(np.sum(p[p > 0] * logp[p > 0]))
        tpsi = self.t_b @ psi
        c = (np.vdot(psi, tpsi).real - self.e0) / self.scale
        return p, logp, h, tpsi, c

    def augmented(self, x, mu, rho):
        """Value and gradient of ``-H - mu c + rho c^2 / 2`` with c the scaled energy residual."""
        psi, r = self.unpack(x)
        p, logp, h, tpsi, c = self.parts(psi)
        g = (logp[self.labels] + 1) * psi + (rho * c - mu) * tpsi / self.scale
        g = (g - psi * np.vdot(psi, g).real) / r
        f = -h - mu * c + 0.5 * rho * c * c
        return f, np.concatenate([2 * g.real, 2 * g.imag])

    def lagrangian_grad(self, psi, mu):
        p, logp, h, tpsi, c = self.parts(psi)
        g = (logp[self.labels] + 1) * psi - mu * tpsi / self.scale
        return g - psi * np.vdot(psi, g).real


def random_feasible_state(spec: SpectralDecomposition, e0, rng) -> np.ndarray:
    """Random pure state with ``<T> = e0`` exactly (energy-basis mixing of a low and a high part)."""
    d = spec.dim
    z = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) * np.exp(rng.uniform(-3, 1, d))
    lo, hi = spec.energies < e0, spec.energies > e0
    at = ~(lo | hi)
    if at.any() and (not lo.any() or not hi.any() or rng.random() < 0.1):
        c = np.where(at, z, 0)
        return spec.vectors @ (c / np.linalg.norm(c))
    if not lo.any() or not hi.any():
        raise ValidationError("energy outside the spectrum")
    a, b = np.where(lo, z, 0), np.where(hi, z, 0)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    ea, eb = spec.energies @ np.abs(a) ** 2, spec.energies @ np.abs(b) ** 2
    s = (e0 - ea) / (eb - ea)
    c = np.sqrt(1 - s) * a + np.sqrt(s) * b
    return spec.vectors @ c


def _tilted_start(spec, e0, rng):
    """Canonical-like energy profile tilted to mean ``e0`` with random phases."""
    en = spec.energies
    scale = max(spec.spectral_range, 1e-300)

    def mean(beta):
        lw = -beta * (en - en.mean()) / scale
        return float(np.exp(lw - logsumexp(lw)) @ en) - e0

    lo, hi = -2000.0, 2000.0
    if mean(lo) * mean(hi) > 0:
        return random_feasible_state(spec, e0, rng)
    beta = brentq(mean, lo, hi, xtol=1e-14)
    lw = -beta * (en - en.mean()) / scale
    amp = np.sqrt(np.exp(lw - logsumexp(lw))) * np.exp(2j * np.pi * rng.random(len(en)))
    return spec.vectors @ amp


def _edge_maximum(obs, spec, edge_group, opts):
    """Maximise H_O inside a degenerate extremal eigenspace (the whole feasible set at E0 = E_min/E_max)."""
    v = spec.vectors[:, edge_group]
    if v.shape[1] == 1:
        return v[:, 0]
    m = obs.basis.conj().T @ v  # (j,s) amplitudes of the eigenspace basis

    def f(x):
        n = len(x) // 2
        y = x[:n] + 1j * x[n:]
        r = np.linalg.norm(y)
        psi = m @ (y / r)
        w = np.abs(psi) ** 2
        p = np.bincount(obs.labels, weights=w, minlength=len(obs.values))
        logp = np.log(np.maximum(p, 1e-300))
        g = m.conj().T @ ((logp[obs.labels] + 1) * psi)
        g = (g - (y / r) * np.vdot(y / r, g).real) / r
        return float(np.sum(p[p > 0] * logp[p > 0])), np.concatenate([2 * g.real, 2 * g.imag])

    best, best_h = None, -np.inf
    for k in range(max(opts.n_starts, 1)):
        rng = derive_rng(opts.seed, "maximize-edge", k)
        x0 = rng.standard_normal(2 * v.shape[1])
        res = minimize(f, x0, jac=True, method="L-BFGS-B", options={"gtol": 1e-14, "ftol": 1e-16, "maxiter": opts.max_iter})
        if -res.fun > best_h:
            n = len(res.x) // 2
            y = res.x[:n] + 1j * res.x[n:]
            best, best_h = v @ (y / np.linalg.norm(y)), -res.fun
    return best


def maximize_entropy(obs: Observable, T, E0, options: MaximizeOptions | None = None, spec=None) -> MaximizeResult:
    """Maximise ``H_O`` over pure states with ``<T> = E0``.

    Augmented-Lagrangian outer loop on the energy constraint; each inner
    problem is an unconstrained L-BFGS ascent over unnormalised complex
    amplitudes in the observable basis (normalisation is built into the
    parameterisation). Several seeded starts are run, one of them a tilted
    canonical energy profile; the best converged one is returned and the
    spread of start entropies is recorded. Multipliers are then fitted by
    least squares on the log-distribution equation.

    Raises
    ------
    ValidationError
        ``E0`` outside ``[E_min, E_max]``.
    ConvergenceError
        No start met the constraint and gradient tolerances; ``best`` holds the
        best :class:`MaximizeResult` reached.
    """
    opts = options or MaximizeOptions()
    T = check_hermitian(T, "Hamiltonian")
    if spec is None:
        spec = spectral_decompose(T)
    emin, emax = spec.energies[0], spec.energies[-1]
    scale = max(spec.spectral_range, 1e-12)
    edge_tol = 1e-12 * max(scale, np.max(np.abs(spec.energies)))
    if E0 < emin - edge_tol or E0 > emax + edge_tol:
        raise ValidationError(f"E0={E0} outside the spectrum [{emin}, {emax}]")

    if E0 <= emin + edge_tol or E0 >= emax - edge_tol or scale <= 1e-12:
        group = spec.groups[0] if E0 <= emin + edge_tol else spec.groups[-1]
        psi = _edge_maximum(obs, spec, group, opts)
        state = pure_state(psi / np.linalg.norm(psi))
        report = ee_residuals(state, obs, T, E0=E0)
        return MaximizeResult(state, report.multipliers, report, report.entropy, [report.entropy])

    t_b = obs.basis.conj().T @ T @ obs.basis
    prob = _Problem(obs.labels, len(obs.values), t_b, E0, scale)
    results = []
    for k in range(opts.n_starts):
        rng = derive_rng(opts.seed, "maximize", k)
        psi0 = _tilted_start(spec, E0, rng) if k == 0 else random_feasible_state(spec, E0, rng)
        psi0 = obs.basis.conj().T @ psi0
        results.append(_augmented_lagrangian(prob, psi0, opts))

    ok = [r for r in results if r[3]]
    pool = ok or results
    psi_b, mu, h, converged, info = max(pool, key=lambda r: r[2])
    state = pure_state(obs.basis @ psi_b, normalize=True)
    report = ee_residuals(state, obs, T, E0=E0)
    result = MaximizeResult(state, report.multipliers, report, report.entropy, [r[2] for r in ok], converged)
    if not ok:
        raise ConvergenceError(f"maximize_entropy did not converge: {info}", best=result)
    return result


def _augmented_lagrangian(prob: _Problem, psi0, opts: MaximizeOptions):
    x = np.concatenate([psi0.real, psi0.imag])
    mu, rho = 0.0, opts.penalty
    info = ""
    for _ in range(opts.max_outer):
        res = minimize(
            prob.augmented, x, args=(mu, rho), jac=True, method="L-BFGS-B",
            options={"gtol": 1e-13, "ftol": 1e-16, "maxiter": opts.max_iter, "maxcor": 30},
        )
        x = res.x
        psi, _ = prob.unpack(x)
        _, _, h, _, c = prob.parts(psi)
        gnorm = float(np.linalg.norm(prob.lagrangian_grad(psi, mu)))
        info = f"|C_E|={abs(c) * prob.scale:.2e} grad={gnorm:.2e}"
        if abs(c) * prob.scale <= opts.constraint_tol and gnorm <= opts.grad_tol:
            return psi, mu, h, True, info
        if abs(c) * prob.scale <= 1e-6 and gnorm <= 1e-4:
            psi, mu = _polish(prob, psi, mu)
            _, _, h, _, c = prob.parts(psi)
            gnorm = float(np.linalg.norm(prob.lagrangian_grad(psi, mu)))
            info = f"|C_E|={abs(c) * prob.scale:.2e} grad={gnorm:.2e} (polished)"
            if abs(c) * prob.scale <= opts.constraint_tol and gnorm <= opts.grad_tol:
                return psi, mu, h, True, info
        mu -= rho * c
        if abs(c) * prob.scale > opts.constraint_tol:
            rho = min(rho * 4, 1e10)
        x = np.concatenate([psi.real, psi.imag])
    psi, _ = prob.unpack(x)
    return psi, mu, prob.parts(psi)[2], False, info


def _polish(prob: _Problem, psi, mu):
    """Gauss-Newton refinement of the stationarity system at a nearly converged point.

    Unknowns are the amplitudes (normalised inside the residual) and the energy
    multiplier; residuals are the projected Lagrangian gradient and the scaled
    energy constraint.
    """
    n = len(psi)

    def resid(v):
        z = v[:n] + 1j * v[n : 2 * n]
        y = z / np.linalg.norm(z)
        g = prob.lagrangian_grad(y, v[-1])
        c = prob.parts(y)[4]
        return np.concatenate([g.real, g.imag, [c]])

    v0 = np.concatenate([psi.real, psi.imag, [mu]])
    res = least_squares(resid, v0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    if np.linalg.norm(res.fun) > np.linalg.norm(resid(v0)):
        return psi, mu
    z = res.x[:n] + 1j * res.x[n : 2 * n]
    return z / np.linalg.norm(z), float(res.x[-1])
