import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from huolab.core import SX, SZ, build_hamiltonian, expectation, observable_from_matrix, random_hermitian, random_pure_state, spectral_decompose
from huolab.dynamics import (
    de_equals_mc_for_huo, default_time_grid, diagonal_ensemble, energy_amplitudes, ensemble_expectation, evolve,
    infinite_time_average, microcanonical_state, narrow_energy_state, support_shell, thermalization_trace,
    window_average,
)
from huolab.entropy import basis_entropy, shannon_entropy
from huolab.equilibrium import EnergyShell, energy_shell
from huolab.errors import PreconditionError, ValidationError
from huolab.hub import SpectrumAssignment, hub_from_hamiltonian, make_huo


def ising(n):
    return build_hamiltonian({"model": "ising", "n_sites": n, "J": 1.0, "h": 0.9045, "g": 0.809})


def huo_setup(h, spectrum=None, seed=0):
    spec = spectral_decompose(h)
    sa = spectrum or SpectrumAssignment.degenerate(spec.dim, 4)
    return spec, make_huo(hub_from_hamiltonian(spec), sa, seed=seed)


def test_evolve_examples():
    spec = spectral_decompose(random_hermitian(6, seed=1))
    psi = random_pure_state(6, rng=2).vector
    assert np.allclose(evolve(psi, spec, 0.0), psi, atol=1e-14)
    v = spec.vectors[:, 3]
    vt = evolve(v, spec, 2.5)
    assert np.allclose(vt, np.exp(-2.5j * spec.energies[3]) * v, atol=1e-13)
    # two-level superposition: <sigma_x>(t) = cos(2t) under sigma_z
    spec2 = spectral_decompose(SZ)
    for t in (0.0, 0.3, 1.7, 10.0):
        pt = evolve(np.array([1, 1]) / np.sqrt(2), spec2, t)
        assert abs(np.vdot(pt, SX @ pt).real - np.cos(2 * t)) < 1e-13


def test_evolve_against_matrix_exponential():
    from scipy.linalg import expm

    h = random_hermitian(8, seed=4)
    spec = spectral_decompose(h)
    psi = random_pure_state(8, rng=5).vector
    for t in (0.1, 3.0):
        assert np.allclose(evolve(psi, spec, t), expm(-1j * h * t) @ psi, atol=1e-12)
    rows = evolve(psi, spec, np.array([0.1, 3.0]))
    assert rows.shape == (2, 8) and np.allclose(rows[1], expm(-3j * h) @ psi, atol=1e-12)


@given(st.integers(2, 32), st.integers(0, 2**32 - 1), st.floats(-1e4, 1e4))
def test_norm_preserved(d, seed, t):
    spec = spectral_decompose(random_hermitian(d, seed=seed))
    psi = random_pure_state(d, rng=seed).vector
    assert abs(np.linalg.norm(evolve(psi, spec, t)) - 1) <= 1e-12


def test_narrow_state_examples():
    spec = spectral_decompose(random_hermitian(32, seed=7))
    single = EnergyShell(float(spec.energies[4]), 1e-9, np.array([4]))
    ns = narrow_energy_state(spec, single)
    assert np.allclose(ns.vector, spec.vectors[:, 4], atol=1e-14)
    shell = EnergyShell(0.0, 1.0, np.arange(10, 17))
    ns = narrow_energy_state(spec, shell, seed=3)
    assert abs(ns.energy_entropy - np.log(7)) < 1e-14
    c = energy_amplitudes(ns.vector, spec)
    assert np.allclose(np.delete(np.abs(c), shell.members), 0, atol=1e-13)
    assert np.array_equal(ns.vector, narrow_energy_state(spec, shell, seed=3).vector)
    assert not np.array_equal(ns.vector, narrow_energy_state(spec, shell, seed=4).vector)


def test_narrow_gaussian_profile():
    spec = spectral_decompose(np.diag(np.linspace(-1, 1, 41)))
    shell = energy_shell(spec, 0.0, 0.5 + 1e-9)
    assert shell.size == 11
    ns = narrow_energy_state(spec, shell, ("gaussian", shell.width / 4), seed=0)
    w = np.abs(energy_amplitudes(ns.vector, spec)) ** 2
    assert abs(w.sum() - 1) < 1e-12
    assert ns.energy_entropy < np.log(11)
    e = spec.energies[shell.members]
    expected = np.exp(-e**2 / (2 * (shell.width / 4) ** 2))
    assert np.allclose(w[shell.members], expected / expected.sum(), atol=1e-13)


def test_narrow_state_errors():
    spec = spectral_decompose(random_hermitian(4, seed=0))
    with pytest.raises(ValidationError):
        narrow_energy_state(spec, EnergyShell(0.0, 1.0, np.array([1, 2])), profile="flat")
    with pytest.raises(ValidationError):
        EnergyShell(0.0, 1.0, np.array([], dtype=int))


def test_microcanonical_examples():
    spec = spectral_decompose(random_hermitian(12, seed=8))
    whole = microcanonical_state(spec, spec.energies.mean(), 2 * spec.spectral_range + 1)
    assert np.allclose(whole.state.density_matrix(), np.eye(12) / 12, atol=1e-13)
    spec3 = spectral_decompose(np.diag(np.arange(10.0)))
    mc = microcanonical_state(spec3, 5.0, 2.0)
    assert np.allclose(mc.state.weights, [1 / 3] * 3)
    assert abs(mc.state.weights.sum() - 1) <= 1e-12
    e = expectation(mc.state, np.diag(np.arange(10.0)))
    assert 4.0 <= e <= 6.0
    with pytest.raises(ValidationError):
        microcanonical_state(spec3, 5.0, 0.5)


def test_huo_mc_expectation_every_shell():
    h = ising(4)
    spec, obs = huo_setup(h, SpectrumAssignment([-1.0, 0.5, 2.0, 3.0], [4, 4, 4, 4]))
    target = obs.trace / spec.dim
    for lo in range(spec.dim - 2):
        for hi in range(lo + 3, spec.dim + 1, 3):
            shell = EnergyShell(0.0, 1.0, np.arange(lo, hi))
            from huolab.dynamics import microcanonical_from_shell

            mc = microcanonical_from_shell(spec, shell)
            assert abs(ensemble_expectation(obs, mc.state) - target) <= 1e-10


def test_diagonal_ensemble_examples():
    spec = spectral_decompose(random_hermitian(6, seed=9))
    de = diagonal_ensemble(spec.vectors[:, 2], spec)
    assert np.allclose(de.weights, np.eye(6)[2], atol=1e-14)
    psi = (spec.vectors[:, 1] - 1j * spec.vectors[:, 4]) / np.sqrt(2)
    de = diagonal_ensemble(psi, spec)
    assert np.allclose(de.weights[[1, 4]], 0.5) and abs(de.weights.sum() - 1) <= 1e-10


def test_time_average_oracle():
    d = 16
    h = random_hermitian(d, seed=10)
    spec = spectral_decompose(h)
    o = random_hermitian(d, seed=11) + 3 * np.eye(d)
    psi = random_pure_state(d, rng=12).vector
    de_value = ensemble_expectation(o, diagonal_ensemble(psi, spec).state)
    times = np.random.default_rng(13).uniform(0, 1e4, 10_000)
    traj = evolve(psi, spec, times)
    sampled = np.mean(np.einsum("ti,ij,tj->t", traj.conj(), o, traj).real)
    assert abs(sampled - de_value) <= 0.02 * abs(de_value)
    assert abs(infinite_time_average(psi, spec, o) - de_value) <= 1e-12


def test_degenerate_cross_terms():
    h = np.diag([0.0, 0.0, 1.0, 2.5])
    spec = spectral_decompose(h)
    o = random_hermitian(4, seed=14)
    psi = random_pure_state(4, rng=15).vector
    c = energy_amplitudes(psi, spec)
    o_e = spec.vectors.conj().T @ o @ spec.vectors
    naive = float(np.sum(np.abs(c) ** 2 * np.diag(o_e).real))
    exact = infinite_time_average(psi, spec, o)
    assert abs(exact - naive) > 1e-3
    # exact window average over a long window approaches the infinite-time value
    assert abs(window_average(psi, spec, o, 0.0, 1e7) - exact) < 1e-6


def test_window_average_against_quadrature():
    spec = spectral_decompose(random_hermitian(5, seed=16))
    o = random_hermitian(5, seed=17)
    psi = random_pure_state(5, rng=18).vector

    def f(t):
        v = evolve(psi, spec, t)
        return np.vdot(v, o @ v).real

    quad, _ = integrate.quad(f, 0.5, 7.5, limit=400, epsabs=1e-13)
    assert abs(window_average(psi, spec, o, 0.5, 7.5) - quad / 7.0) < 1e-10


def test_de_equals_mc_examples():
    h = ising(3)
    spec, obs = huo_setup(h)
    rng = np.random.default_rng(19)
    r = de_equals_mc_for_huo(random_pure_state(8, rng), spec, obs)
    assert r.de_value == pytest.approx(0, abs=1e-12) and r.passed(1e-10)
    spec, obs = huo_setup(h, SpectrumAssignment([0.0, 1.0, 2.0, 5.0], [2, 2, 2, 2]))
    r1 = de_equals_mc_for_huo(random_pure_state(8, rng), spec, obs)
    r2 = de_equals_mc_for_huo(random_pure_state(8, rng), spec, obs)
    assert r1.passed(1e-10) and abs(r1.de_value - 2.0) <= 1e-10
    assert abs(r1.de_value - r2.de_value) <= 1e-10


def test_de_equals_mc_rejects_non_huo():
    spec = spectral_decompose(SZ)
    with pytest.raises(PreconditionError):
        de_equals_mc_for_huo(np.array([1, 1]) / np.sqrt(2), spec, observable_from_matrix(SZ))


def test_support_shell():
    spec = spectral_decompose(np.diag(np.arange(6.0)))
    psi = np.zeros(6)
    psi[[1, 4]] = 1 / np.sqrt(2)
    s = support_shell(psi, spec)
    assert np.array_equal(s.members, [1, 2, 3, 4]) and s.e0 == 2.5 and s.width == 3.0


def test_trace_examples():
    h = ising(4)
    spec, obs = huo_setup(h)
    times = default_time_grid(spec, 50)
    tr = thermalization_trace(spec.vectors[:, 5], spec, obs, times)
    assert np.ptp(tr.expectation) <= 1e-12 and np.ptp(tr.entropy) <= 1e-12
    assert np.all(tr.entropy >= 0) and np.all(tr.entropy <= np.log(16) + 1e-12)
    # O = T is conserved
    t_obs = observable_from_matrix(h)
    psi = random_pure_state(16, rng=20).vector
    tr = thermalization_trace(psi, spec, t_obs, times)
    assert np.ptp(tr.expectation) <= 1e-10
    assert abs(tr.expectation[0] - np.vdot(psi, h @ psi).real) <= 1e-10
    with pytest.raises(ValidationError):
        thermalization_trace(psi, spec, obs, np.array([1.0, 1.0, 2.0]))


def test_trace_columns_match_direct_evaluation():
    h = ising(3)
    spec, obs = huo_setup(h)
    psi = random_pure_state(8, rng=21).vector
    times = np.array([0.0, 0.7, 3.1])
    tr = thermalization_trace(psi, spec, obs, times)
    m = obs.matrix()
    for i, t in enumerate(times):
        v = evolve(psi, spec, t)
        assert abs(tr.expectation[i] - np.vdot(v, m @ v).real) < 1e-12
        p = np.array([np.vdot(v, obs.projector(j) @ v).real for j in range(len(obs.values))])
        assert abs(tr.entropy[i] - shannon_entropy(p)) < 1e-12
        assert abs(tr.tv_distance[i] - 0.5 * np.abs(p - tr.mc_distribution).sum()) < 1e-12


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_hub_entropy_bound_over_time(seed):
    h = ising(5)
    spec = spectral_decompose(h)
    hub = hub_from_hamiltonian(spec)
    rng = np.random.default_rng(seed)
    lo = int(rng.integers(0, 28))
    ns = narrow_energy_state(spec, EnergyShell(0.0, 1.0, np.arange(lo, lo + 4)), seed=seed)
    h_t = basis_entropy(ns.vector, spec.vectors)
    for t in rng.uniform(0, 1e3, 20):
        v = evolve(ns.vector, spec, t)
        assert basis_entropy(v, hub.vectors) >= np.log(32) - h_t - 1e-10
        assert abs(np.vdot(v, h @ v).real - np.vdot(ns.vector, h @ ns.vector).real) <= 1e-10
