"""Energy-basis matrix elements of unbiased observables.

Off-diagonal elements of a degenerate unbiased observable shrink like
D^(-1/2) with a predicted prefactor, and its Fourier phases look uniform.
A spin-z observable of a diagonal Hamiltonian fails both tests.
"""
import numpy as np

from huolab.core import SZ, embed, observable_from_matrix, random_hermitian, spectral_decompose
from huolab.eth import diagonal_constancy, matrix_elements, offdiag_scaling, phase_uniformity, sample_pairs
from huolab.hub import hub_from_hamiltonian, phase_table

fit = offdiag_scaling([64, 128, 256, 512, 1024], seed=0)
print("D      std Re   std Im   predicted")
for d, sr, si, p in zip(fit.dims, fit.std_re, fit.std_im, fit.predicted_std):
    print(f"{int(d):5d}  {sr:.5f}  {si:.5f}  {p:.5f}")
print(f"log-log slope {fit.slope:.3f}, 95% CI ({fit.slope_ci[0]:.3f}, {fit.slope_ci[1]:.3f})")

spec = spectral_decompose(random_hermitian(256, seed=4))
pairs = sample_pairs(256, 100, rng=np.random.default_rng(0), full_scan_dim=0)
uni = phase_uniformity(phase_table(hub_from_hamiltonian(spec), spec), pairs)
print(f"\nrandom Hermitian D=256: {uni.pass_fraction:.0%} of 100 pairs pass KS uniformity, passed={uni.passed}")

# negative control: a diagonal Hamiltonian and a sigma^z observable
n = 4
h = sum((k + 1) * embed(SZ, k, n) for k in range(n)) + 0.3 * embed(SZ, 0, n) @ embed(SZ, 1, n)
dspec = spectral_decompose(h)
obs = observable_from_matrix(embed(SZ, 0, n))
rep = diagonal_constancy(matrix_elements(obs, dspec), obs)
print(f"\nsigma^z control: max |O_aa - Tr O/D| = {rep.max_deviation:.2f}, passed={rep.passed}")
