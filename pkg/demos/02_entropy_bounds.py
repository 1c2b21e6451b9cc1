"""Entropy identities and the entropic uncertainty bound.

Gibbs states saturate S = log Z + beta E; the eigenbasis minimizes the
measured Shannon entropy; and a state narrow in energy must look nearly
uniform in a Hamiltonian unbiased basis.
"""
import numpy as np

from huolab.acceptance import ising
from huolab.core import random_mixed_state, random_pure_state, spectral_decompose
from huolab.entropy import (
    gibbs_identity_gap, gibbs_state, haar_random_basis, measured_entropy, min_entropy_identity_check,
    narrow_energy_entropy_bound, von_neumann_entropy,
)
from huolab.hub import hub_from_hamiltonian

h = ising(6)
spec = spectral_decompose(h)
for beta in (0.0, 0.5, 2.0):
    g = gibbs_state(h, beta, spec)
    print(f"beta={beta}: |S - (log Z + beta E)| = {gibbs_identity_gap(g):.1e}")

rng = np.random.default_rng(1)
rho = random_mixed_state(8, rng=rng)
rep = min_entropy_identity_check(rho, trials=200, seed=1)
others = [measured_entropy(rho, haar_random_basis(8, rng)) for _ in range(5)]
print(f"\nS_vN = {von_neumann_entropy(rho):.6f}; five random bases give {np.round(others, 3)}")
print(rep)

hub = hub_from_hamiltonian(spec)
print("\nstate                H_energy  H_HUB/log D  bound holds")
for label, psi in [
    ("eigenstate", spec.vectors[:, 20]),
    ("two levels", (spec.vectors[:, 20] + spec.vectors[:, 21]) / np.sqrt(2)),
    ("random", random_pure_state(spec.dim, rng=rng).vector),
]:
    r = narrow_energy_entropy_bound(psi, spec, hub)
    print(f"{label:20s} {r.h_energy:8.3f}  {r.hub_ratio:11.3f}  {r.bound_holds}")
