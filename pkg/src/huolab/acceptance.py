"""The twelve acceptance checks, each a named function returning a :class:`CheckResult`.

Thresholds are fixed here; the checks are shared by the ``acceptance``
experiment kind and the test suite.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import (
    SX,
    SY,
    SZ,
    Observable,
    build_hamiltonian,
    embed,
    ensemble_state,
    observable_from_matrix,
    pure_state,
    random_hermitian,
    random_mixed_state,
    spectral_decompose,
)
from .dynamics import (
    de_equals_mc_for_huo,
    diagonal_ensemble,
    ensemble_expectation,
    narrow_energy_state,
    thermalization_trace,
    window_average,
)
from .entropy import (
    entropic_uncertainty_check,
    gibbs_identity_gap,
    gibbs_state,
    haar_random_basis,
    min_entropy_identity_check,
    shannon_entropy,
)
from .equilibrium import (
    EnergyShell,
    MaximizeOptions,
    constant_distribution_check,
    distribution_time_derivative,
    ee_residuals,
    finite_difference_derivative,
    maximize_entropy,
    random_feasible_state,
)
from .eth import diagonal_constancy, matrix_elements, offdiag_scaling, phase_uniformity, sample_pairs
from .hub import SpectrumAssignment, hub_from_hamiltonian, make_huo, phase_table
from .mub import generate_mub_family, unbiasedness_deviation
from .rng import derive_rng

# chaotic Ising couplings used throughout (transverse and longitudinal fields both on)
CHAOTIC_ISING = {"model": "ising", "J": 1.0, "h": 0.9045, "g": 0.809}


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    message: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def line(self):
        return f"[{self.verdict.upper()}] {self.number:2d} {self.name}: {self.message} ({self.seconds:.1f} s)"


def ising(n):
    return build_hamiltonian({**CHAOTIC_ISING, "n_sites": n})


def mub_family_completeness(seed=0):
    worst, sizes_ok = 0.0, True
    for d in (2, 3, 4, 5, 7, 8, 16):
        fam = generate_mub_family(d)
        sizes_ok &= len(fam) == d + 1
        bases = fam.bases
        for i in range(len(bases)):
            for k in range(i + 1, len(bases)):
                worst = max(worst, unbiasedness_deviation(bases[i], bases[k]))
    ok = sizes_ok and worst <= 1e-10
    return ok, f"sizes D+1: {sizes_ok}, max deviation {worst:.2e} (<= 1e-10)", {"max_deviation": worst}


def huo_diagonal_constancy(seed=0):
    worst = 0.0
    cases = [("ising", n) for n in range(3, 9)] + [("random", d) for d in (64, 256, 1024)]
    for kind, size in cases:
        h = ising(size) if kind == "ising" else random_hermitian(size, derive_rng(seed, "diag", size))
        spec = spectral_decompose(h)
        obs = make_huo(hub_from_hamiltonian(spec), SpectrumAssignment.degenerate(spec.dim, 4), seed=seed)
        worst = max(worst, diagonal_constancy(matrix_elements(obs, spec), obs).max_deviation)
    return worst <= 1e-10, f"max |O_aa - Tr O/D| = {worst:.2e} (<= 1e-10)", {"max_deviation": worst}


def offdiag_scaling_check(seed=0):
    fit = offdiag_scaling([64, 128, 256, 512, 1024, 2048], seed=seed)
    rel = np.concatenate([fit.std_re, fit.std_im]) / np.concatenate([fit.predicted_std, fit.predicted_std]) - 1
    ok = -0.6 <= fit.slope <= -0.4 and fit.within_prediction(0.1)
    msg = f"slope {fit.slope:.4f} in [-0.6, -0.4], max |std/predicted - 1| = {np.max(np.abs(rel)):.3f} (<= 0.1)"
    return ok, msg, {"slope": fit.slope, "max_rel_error": float(np.max(np.abs(rel)))}


def phase_uniformity_check(seed=0):
    spec = spectral_decompose(random_hermitian(256, derive_rng(seed, "phase-h")))
    obs = make_huo(hub_from_hamiltonian(spec), SpectrumAssignment.degenerate(256, 4), seed=seed)
    pairs = sample_pairs(256, 100, derive_rng(seed, "phase-pairs"), full_scan_dim=0)
    rep = phase_uniformity(phase_table(obs, spec), pairs)
    return rep.passed, f"{rep.pass_fraction:.0%} of 100 pairs with KS p >= 0.01 (>= 95%)", {"pass_fraction": rep.pass_fraction}


def _two_level_weights(target, k):
    """Weights (1 - e, e/k, ..., e/k) whose Shannon entropy equals ``target``."""
    f = lambda e: shannon_entropy(np.r_[1 - e, np.full(k, e / k)]) - target
    e = brentq(f, 0.0, k / (k + 1))
    return np.r_[1 - e, np.full(k, e / k)]


def entropic_uncertainty_acceptance(seed=0):
    min_slack, min_ratio, narrow_count = np.inf, np.inf, 0
    for d in (4, 16, 64):
        spec = spectral_decompose(random_hermitian(d, derive_rng(seed, "uncertainty-h", d)))
        hub = hub_from_hamiltonian(spec)
        rng = derive_rng(seed, "uncertainty-states", d)
        for _ in range(1000):
            psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            res = entropic_uncertainty_check(psi / np.linalg.norm(psi), spec.vectors, hub)
            min_slack = min(min_slack, res.slack)
        # constructed narrow-energy states: one dominant level plus a few neighbours
        log_d = np.log(d)
        k = min(4, d - 1)
        for _ in range(100):
            w = _two_level_weights(rng.uniform(0.2, 1.0) * 0.1 * log_d, k)
            centre = int(rng.integers(0, d - k))
            c = np.zeros(d, dtype=complex)
            c[centre:centre + k + 1] = np.sqrt(w) * np.exp(2j * np.pi * rng.random(k + 1))
            psi = spec.vectors @ c
            res = entropic_uncertainty_check(psi, spec.vectors, hub)
            assert res.h1 <= 0.1 * log_d + 1e-12
            min_ratio = min(min_ratio, res.h2 / log_d)
            narrow_count += 1
    ok = min_slack >= -1e-10 and min_ratio >= 0.9
    msg = f"min H_T + H_HUB - log D = {min_slack:.3e} (>= -1e-10); narrow states min H_HUB/log D = {min_ratio:.4f} (>= 0.9)"
    return ok, msg, {"min_slack": min_slack, "min_hub_ratio": min_ratio, "narrow_states": narrow_count}


def equilibrium_at_eigenstate(seed=0):
    ee1, ee2, flat = 0.0, 0.0, 0.0
    for h in (ising(4), random_hermitian(32, derive_rng(seed, "eq-h"))):
        spec = spectral_decompose(h)
        hub = hub_from_hamiltonian(spec)
        for spectrum in (SpectrumAssignment.degenerate(spec.dim, 4), SpectrumAssignment.nondegenerate(spec.dim)):
            obs = make_huo(hub, spectrum, seed=seed)
            expected = obs.multiplicities / spec.dim
            for a in range(spec.dim):
                psi = spec.eigenstate(a)
                rep = ee_residuals(pure_state(psi), obs, h, E0=spec.energies[a])
                cd = constant_distribution_check(psi, obs, h)
                ee1 = max(ee1, rep.ee1_residual)
                ee2 = max(ee2, rep.ee2_max)
                flat = max(flat, cd.max_fine_deviation, float(np.max(np.abs(cd.probabilities - expected))))
    ok = ee1 <= 1e-10 and ee2 <= 1e-8 and flat <= 1e-8
    msg = f"ee1 {ee1:.2e} (<= 1e-10), ee2 {ee2:.2e} (<= 1e-8), distribution flatness {flat:.2e} (<= 1e-8)"
    return ok, msg, {"ee1": ee1, "ee2": ee2, "flatness": flat}


def _random_observable(d, rng):
    n_values = int(rng.integers(2, d + 1))  # one outcome would make p constant
    labels = np.sort(np.r_[np.arange(n_values), rng.integers(0, n_values, d - n_values)])
    values = np.sort(rng.standard_normal(n_values))
    while n_values > 1 and np.min(np.diff(values)) < 1e-3:
        values = np.sort(rng.standard_normal(n_values))
    return Observable(values, haar_random_basis(d, rng), labels)


def stationarity_check(seed=0):
    worst_rel, worst_comm = 0.0, 0.0
    for trial in range(50):
        rng = derive_rng(seed, "stationarity", trial)
        d = int(rng.choice([2, 4, 8, 16, 32, 64]))
        t = random_hermitian(d, rng)
        spec = spectral_decompose(t)
        obs = _random_observable(d, rng)
        state = random_mixed_state(d, int(rng.integers(1, d + 1)), rng)
        analytic = distribution_time_derivative(state, obs, t)
        fd = finite_difference_derivative(state, obs, spec)
        scale = max(np.max(np.abs(fd)), 1e-12)
        worst_rel = max(worst_rel, float(np.max(np.abs(analytic - fd)) / scale))
        # states commuting with T: mixtures of energy eigenvectors
        w = rng.random(d)
        commuting = ensemble_state(w / w.sum(), spec.vectors)
        worst_comm = max(worst_comm, float(np.max(np.abs(distribution_time_derivative(commuting, obs, t)))))
    ok = worst_rel <= 1e-5 and worst_comm <= 1e-10
    msg = f"max relative |analytic - FD| = {worst_rel:.2e} (<= 1e-5); commuting states max |dp/dt| = {worst_comm:.2e} (<= 1e-10)"
    return ok, msg, {"max_relative_error": worst_rel, "max_commuting_rate": worst_comm}


def qubit_grid_oracle(O, T, E0, n=400_001):
    """Maximum of H_O over pure qubit states with <T> = E0, by a dense scan of the feasible circle.

    ``T = t0 I + t.sigma`` fixes the Bloch component along ``t``; the remaining
    circle is parameterised by one angle.
    """
    paulis = (SX, SY, SZ)
    t0 = np.trace(T).real / 2
    tv = np.array([np.trace(T @ p).real / 2 for p in paulis])
    ov = np.array([np.trace(O @ p).real / 2 for p in paulis])
    c = (E0 - t0) / np.linalg.norm(tv)
    n_hat = tv / np.linalg.norm(tv)
    e1 = np.cross(n_hat, [1.0, 0, 0] if abs(n_hat[0]) < 0.9 else [0, 1.0, 0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n_hat, e1)
    phi = np.linspace(0, 2 * np.pi, n)
    r = c * n_hat[None, :] + np.sqrt(max(1 - c * c, 0.0)) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    if np.linalg.norm(ov) < 1e-14:
        return 0.0
    x = r @ (ov / np.linalg.norm(ov))
    p = np.clip(np.stack([(1 + x) / 2, (1 - x) / 2], axis=1), 0, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0), axis=1)
    return float(h.max())


QUBIT_CASES = [
    (SX, SZ, 0.0),
    (SX, SZ, 0.5),
    (SX, SZ, -0.8),
    ((SZ + SX) / np.sqrt(2), SZ, 0.3),
    ((SZ + SX) / np.sqrt(2), SZ, 0.9),
    (SZ, SZ, 0.2),
    (SY, SZ + 0.5 * SX, 0.4),
]


def maximizer_check(seed=0):
    worst_qubit = 0.0
    for O, T, e0 in QUBIT_CASES:
        res = maximize_entropy(observable_from_matrix(O), T, e0, MaximizeOptions(seed=seed))
        worst_qubit = max(worst_qubit, abs(res.entropy - qubit_grid_oracle(O, T, e0)))
    h = ising(4)
    spec = spectral_decompose(h)
    obs = make_huo(hub_from_hamiltonian(spec), SpectrumAssignment.degenerate(16, 4), seed=seed)
    worst_gap, worst_beat, n_conv = 0.0, -np.inf, 0
    for i, frac in enumerate((0.1, 0.3, 0.5, 0.7, 0.9)):
        e0 = spec.energies[0] + frac * spec.spectral_range
        res = maximize_entropy(obs, h, e0, MaximizeOptions(seed=seed), spec=spec)
        if not res.converged:
            continue
        n_conv += 1
        worst_gap = max(worst_gap, res.report.linear_relation_gap)
        rng = derive_rng(seed, "maximizer-samples", i)
        for _ in range(300):
            psi = random_feasible_state(spec, e0, rng)
            p = np.bincount(obs.labels, weights=np.abs(obs.basis.conj().T @ psi) ** 2, minlength=len(obs.values))
            worst_beat = max(worst_beat, shannon_entropy(p) - res.entropy)
    ok = worst_qubit <= 1e-6 and n_conv == 5 and worst_gap <= 1e-6 and worst_beat <= 1e-8
    msg = (f"qubit |H - oracle| max {worst_qubit:.2e} (<= 1e-6); Ising N=4 {n_conv}/5 converged, "
           f"linear-relation gap {worst_gap:.2e} (<= 1e-6), best sampled excess {worst_beat:.2e} (<= 1e-8)")
    return ok, msg, {"qubit_error": worst_qubit, "converged": n_conv, "linear_gap": worst_gap, "sampled_excess": worst_beat}


def min_entropy_check(seed=0):
    worst_eig, worst_margin = 0.0, np.inf
    for d in (4, 8, 16):
        for rank in (1, 2, d // 2, d):
            state = random_mixed_state(d, rank, derive_rng(seed, "min-entropy-state", d, rank))
            rep = min_entropy_identity_check(state, trials=200, seed=seed)
            worst_eig = max(worst_eig, rep.eigenbasis_gap)
            worst_margin = min(worst_margin, rep.margin)
    ok = worst_eig <= 1e-10 and worst_margin >= -1e-10
    msg = f"eigenbasis |H - S_vN| max {worst_eig:.2e} (<= 1e-10); min over 200 bases of H - S_vN = {worst_margin:.3e} (>= -1e-10)"
    return ok, msg, {"eigenbasis_gap": worst_eig, "margin": worst_margin}


def gibbs_identity_check(seed=0):
    worst = 0.0
    for d in (2, 8, 64):
        t = SZ if d == 2 else random_hermitian(d, derive_rng(seed, "gibbs", d))
        spec = spectral_decompose(t)
        for beta in (0.0, 0.1, 1.0, 10.0):
            worst = max(worst, abs(gibbs_identity_gap(gibbs_state(t, beta, spec))))
    return worst <= 1e-10, f"max |S_vN - log Z - beta E0| = {worst:.2e} (<= 1e-10)", {"max_gap": worst}


def thermalization_check(seed=0, n_levels=20, n_times=10_000):
    h = ising(8)
    spec = spectral_decompose(h)
    # nonzero-trace spectrum so a relative 5% tolerance on Tr(O rho_mc) is meaningful
    obs = make_huo(hub_from_hamiltonian(spec), SpectrumAssignment.degenerate(256, 4, values=[1.0, 2.0, 3.0, 4.0]), seed=seed)
    e0 = spec.energies[0] + spec.spectral_range / 2
    members = np.sort(np.argsort(np.abs(spec.energies - e0), kind="stable")[:n_levels])
    width = 2 * float(np.max(np.abs(spec.energies[members] - e0)))
    shell = EnergyShell(float(e0), width, members)
    times = np.linspace(1e2, 1e4, n_times)
    log_d = np.log(spec.dim)
    worst_avg, worst_demc, min_ratio, min_outcome_ratio, min_hub = 0.0, 0.0, np.inf, np.inf, np.inf
    de_values = []
    for k in range(2):
        psi = narrow_energy_state(spec, shell, seed=derive_rng(seed, "thermalization", k)).vector
        rep = de_equals_mc_for_huo(psi, spec, obs, shell)
        avg = window_average(psi, spec, obs, times[0], times[-1])
        trace = thermalization_trace(psi, spec, obs, times, shell)
        worst_avg = max(worst_avg, abs(avg / rep.mc_value - 1))
        worst_demc = max(worst_demc, rep.difference)
        min_ratio = min(min_ratio, float(trace.entropy.min() / log_d))
        # diagnostics only: H_O against its own ceiling log(#outcomes), and the fine-grained HUB entropy
        min_outcome_ratio = min(min_outcome_ratio, float(trace.entropy.min() / np.log(len(obs.values))))
        min_hub = min(min_hub, float(trace.basis_entropy.min() / log_d))
        de_values.append(ensemble_expectation(obs, diagonal_ensemble(psi, spec).state))
    de_spread = abs(de_values[0] - de_values[1])
    ok = shell.size >= 15 and worst_avg <= 0.05 and worst_demc <= 1e-10 and min_ratio >= 0.9 and de_spread <= 1e-10
    msg = (f"{shell.size} levels; time average within {worst_avg:.2%} of Tr(O rho_mc) (<= 5%); "
           f"|DE - MC| {worst_demc:.2e} (<= 1e-10); min H_O(t)/log D {min_ratio:.3f} (>= 0.9); "
           f"DE spread {de_spread:.2e} (<= 1e-10); diagnostics: min H_O(t)/log(#outcomes) {min_outcome_ratio:.3f}, "
           f"min H_HUB(t)/log D {min_hub:.3f}")
    return ok, msg, {"avg_rel_error": worst_avg, "de_mc": worst_demc, "min_entropy_ratio": min_ratio,
                     "min_outcome_entropy_ratio": min_outcome_ratio, "de_spread": de_spread,
                     "min_hub_entropy_ratio": min_hub, "shell_size": shell.size}


def negative_controls(seed=0):
    results = []
    diag_h = [build_hamiltonian({"model": "ising", "n_sites": 6, "J": 1.0, "h": 0.0, "g": 0.3}),
              np.diag(np.sort(derive_rng(seed, "negative-diag").standard_normal(64)))]
    for h in diag_h:
        spec = spectral_decompose(h)
        obs = observable_from_matrix(embed(SZ, 0, 6))
        dc = diagonal_constancy(matrix_elements(obs, spec), obs)
        pairs = sample_pairs(64, 100, derive_rng(seed, "negative-pairs"), full_scan_dim=0)
        pu = phase_uniformity(phase_table(obs, spec, check=False), pairs)
        results.append((dc.max_deviation, pu.pass_fraction, not dc.passed and not pu.passed))
    ok = all(r[2] for r in results)
    msg = "; ".join(f"diag dev {dv:.2f}, KS pass {pf:.0%} -> both fail: {f}" for dv, pf, f in results)
    return ok, msg, {"controls": [list(r) for r in results]}


CHECKS = [
    (1, "mub_family_completeness", mub_family_completeness),
    (2, "huo_diagonal_constancy", huo_diagonal_constancy),
    (3, "offdiag_scaling", offdiag_scaling_check),
    (4, "phase_uniformity", phase_uniformity_check),
    (5, "entropic_uncertainty", entropic_uncertainty_acceptance),
    (6, "equilibrium_at_eigenstate", equilibrium_at_eigenstate),
    (7, "stationarity", stationarity_check),
    (8, "maximizer_linear_relation", maximizer_check),
    (9, "min_entropy_identity", min_entropy_check),
    (10, "gibbs_identity", gibbs_identity_check),
    (11, "thermalization_dynamics", thermalization_check),
    (12, "negative_controls", negative_controls),
]


def run_check(number, seed=0) -> CheckResult:
    _, name, fn = CHECKS[number - 1]
    t0 = time.perf_counter()
    ok, msg, metrics = fn(seed)
    return CheckResult(number, name, bool(ok), msg, metrics, time.perf_counter() - t0)


def run_all(selected=None, seed=0):
    numbers = [n for n, _, _ in CHECKS] if selected is None else list(selected)
    return [run_check(n, seed) for n in numbers]
