import numpy as np
import pytest
from hypothesis import given, strategies as st

from huolab.core import (
    SZ, QuantumState, maximally_mixed, random_hermitian,
    random_mixed_state, random_pure_state, spectral_decompose,
)
from huolab.entropy import (
    basis_entropy, entropic_uncertainty_check, gibbs_identity_gap, gibbs_state, haar_random_basis,
    measured_entropy, min_entropy_identity_check, narrow_energy_entropy_bound, shannon_entropy,
    von_neumann_entropy,
)
from huolab.equilibrium import energy_shell
from huolab.dynamics import narrow_energy_state
from huolab.errors import PreconditionError, ValidationError
from huolab.hub import hub_from_hamiltonian
from huolab.mub import fourier_basis, generate_mub_family


def test_shannon_examples():
    assert abs(shannon_entropy([0.25] * 4) - np.log(4)) < 1e-15
    assert shannon_entropy([1.0, 0.0, 0.0]) == 0.0
    assert abs(shannon_entropy([0.5, 0.25, 0.25]) - 1.5 * np.log(2)) < 1e-15


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.randoms())
def test_shannon_permutation_invariant(w, rnd):
    w = np.array(w)
    if w.sum() == 0:
        w[0] = 1
    p = w / w.sum()
    q = p.copy()
    rnd.shuffle(q)
    assert abs(shannon_entropy(p) - shannon_entropy(q)) <= 1e-12
    assert -1e-12 <= shannon_entropy(p) <= np.log(len(p)) + 1e-12


def test_von_neumann_examples():
    assert von_neumann_entropy(random_pure_state(5, rng=1)) == 0.0
    assert abs(von_neumann_entropy(maximally_mixed(7)) - np.log(7)) < 1e-14
    g = gibbs_state(SZ, 1.0)
    q = np.exp([1.0, -1.0]) / (np.e + np.exp(-1))
    expected = -np.sum(q * np.log(q))
    assert abs(von_neumann_entropy(g.state) - expected) < 1e-14


def test_von_neumann_rejects_negative_eigenvalue():
    bad = QuantumState(np.array([1.1, -0.1]), np.eye(2, dtype=complex))
    with pytest.raises(ValidationError):
        von_neumann_entropy(bad)
    # rounding-level negatives are clamped
    ok = QuantumState(np.array([1 + 1e-12, -1e-12]), np.eye(2, dtype=complex))
    assert abs(von_neumann_entropy(ok)) < 1e-10


def test_gibbs_examples():
    t = random_hermitian(6, seed=2)
    g0 = gibbs_state(t, 0.0)
    assert np.allclose(g0.state.density_matrix(), np.eye(6) / 6, atol=1e-14)
    assert abs(g0.log_z - np.log(6)) < 1e-14
    g = gibbs_state(t, 1e3)
    assert von_neumann_entropy(g.state) <= 1e-3
    ground = spectral_decompose(t).vectors[:, 0]
    assert abs(np.vdot(ground, g.state.density_matrix() @ ground).real - 1) < 1e-10
    g1 = gibbs_state(SZ, 1.0)
    assert abs(np.trace(g1.state.density_matrix()).real - 1) < 1e-10
    assert abs(von_neumann_entropy(g1.state) - (g1.log_z + 1.0 * g1.mean_energy)) <= 1e-10
    with pytest.raises(ValidationError):
        gibbs_state(SZ, np.inf)


def test_gibbs_large_beta_does_not_overflow():
    g = gibbs_state(np.diag([-1e4, 0.0, 1e4]), 10.0)
    assert np.isfinite(g.log_z) and abs(g.state.weights.sum() - 1) < 1e-12


@pytest.mark.parametrize("d", [2, 8, 64])
@pytest.mark.parametrize("beta", [0.0, 0.1, 1.0, 10.0])
def test_gibbs_identity_grid(d, beta):
    g = gibbs_state(random_hermitian(d, seed=d), beta)
    assert abs(gibbs_identity_gap(g)) <= 1e-10
    # independent route: entropy from the density matrix, energy as a trace
    rho = g.state.density_matrix()
    q = np.linalg.eigvalsh(rho)
    q = q[q > 0]
    s = -np.sum(q * np.log(q))
    e = np.trace(rho @ random_hermitian(d, seed=d)).real
    assert abs(s - (g.log_z + beta * e)) <= 1e-10


def test_min_entropy_examples():
    r = min_entropy_identity_check(random_pure_state(4, rng=0), trials=20)
    assert abs(r.s_vn) < 1e-12 and r.eigenbasis_gap <= 1e-10 and r.passed()
    r = min_entropy_identity_check(maximally_mixed(5), trials=20)
    assert abs(r.min_sampled_entropy - np.log(5)) < 1e-12
    rho = random_mixed_state(8, rank=3, rng=np.random.default_rng(4))
    r = min_entropy_identity_check(rho, trials=200, seed=1)
    assert r.passed() and r.margin > 0


def test_min_entropy_report_matches_direct_diagonal():
    rho = random_mixed_state(6, rng=np.random.default_rng(9))
    u = haar_random_basis(6, np.random.default_rng(1))
    diag = np.real(np.diag(u.conj().T @ rho.density_matrix() @ u))
    assert abs(measured_entropy(rho, u) - shannon_entropy(diag)) < 1e-13


def test_haar_basis_is_unitary_and_seeded():
    u = haar_random_basis(16, np.random.default_rng(3))
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-13)
    assert np.array_equal(u, haar_random_basis(16, np.random.default_rng(3)))


def test_uncertainty_examples():
    d = 8
    b1, b2 = np.eye(d), fourier_basis(d)
    r = entropic_uncertainty_check(b1[:, 3], b1, b2)
    assert r.h1 == 0 and abs(r.h2 - np.log(d)) < 1e-14 and abs(r.slack) < 1e-14
    psi = np.ones(d) / np.sqrt(d)
    r = entropic_uncertainty_check(psi, b1, b2)
    assert abs(r.h1 - np.log(d)) < 1e-14 and r.slack >= 0
    with pytest.raises(PreconditionError):
        entropic_uncertainty_check(psi, b1, b1)


def test_uncertainty_haar_d16():
    fam = generate_mub_family(16)
    rng = np.random.default_rng(16)
    worst = min(entropic_uncertainty_check(random_pure_state(16, rng), fam.basis(0), fam.basis(5)).slack
                for _ in range(500))
    assert worst >= -1e-10


@pytest.mark.parametrize("d", [2, 4, 8, 16, 64])
def test_uncertainty_invariant(d):
    fam = generate_mub_family(d)
    rng = np.random.default_rng(d)
    b1, b2 = fam.basis(1), fam.basis(d)
    slacks = [entropic_uncertainty_check(random_pure_state(d, rng), b1, b2).slack for _ in range(1000)]
    assert min(slacks) >= -1e-10


def test_narrow_bound_examples():
    spec = spectral_decompose(random_hermitian(64, seed=5))
    hub = hub_from_hamiltonian(spec)
    r = narrow_energy_entropy_bound(spec.vectors[:, 10], spec, hub)
    assert r.h_energy < 1e-14 and abs(r.h_hub - np.log(64)) < 1e-12 and r.narrow_regime
    psi = (spec.vectors[:, 10] + 1j * spec.vectors[:, 11]) / np.sqrt(2)
    r = narrow_energy_entropy_bound(psi, spec, hub)
    assert r.h_energy <= np.log(2) + 1e-12
    assert r.h_hub >= np.log(64) - np.log(2) - 1e-10 and r.bound_holds


def test_narrow_gaussian_shell_d256():
    spec = spectral_decompose(random_hermitian(256, seed=11))
    hub = hub_from_hamiltonian(spec)
    mid = spec.energies[128]
    gaps = np.sort(np.abs(spec.energies - mid))
    shell = energy_shell(spec, mid, 2 * (gaps[4] + gaps[5]) / 2, min_levels=5)
    assert shell.size == 5
    ns = narrow_energy_state(spec, shell, ("gaussian", shell.width / 4), seed=0)
    r = narrow_energy_entropy_bound(ns.vector, spec, hub)
    assert r.bound_holds and r.hub_ratio >= 0.9


@given(st.integers(2, 32), st.integers(0, 2**32 - 1))
def test_basis_entropy_in_range(d, seed):
    rng = np.random.default_rng(seed)
    psi = random_pure_state(d, rng).vector
    h = basis_entropy(psi, haar_random_basis(d, rng))
    assert -1e-12 <= h <= np.log(d) + 1e-12
