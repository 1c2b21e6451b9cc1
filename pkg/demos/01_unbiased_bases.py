"""Mutually unbiased bases and a Hamiltonian unbiased observable.

Builds complete MUB families, then a basis unbiased with the eigenbasis of a
chaotic Ising chain, and shows that any observable diagonal in that basis has
the same expectation value in every energy eigenstate.
"""
import numpy as np

from huolab.acceptance import ising
from huolab.core import spectral_decompose
from huolab.eth import diagonal_constancy, matrix_elements
from huolab.hub import SpectrumAssignment, hub_from_hamiltonian, make_huo
from huolab.mub import generate_mub_family, unbiasedness_deviation

for d in (5, 8):
    fam = generate_mub_family(d)
    bases = list(fam)
    worst = max(unbiasedness_deviation(bases[i], bases[j]) for i in range(len(bases)) for j in range(i))
    print(f"D={d}: {len(bases)} bases ({fam.kind}), worst | |<v|w>|^2 - 1/D | = {worst:.1e}")

spec = spectral_decompose(ising(6))
hub = hub_from_hamiltonian(spec)
print(f"\nIsing N=6: HUB deviation from unbiasedness {hub.deviation(spec):.1e}")

obs = make_huo(hub, SpectrumAssignment.degenerate(spec.dim, 4, values=[1.0, 2.0, 3.0, 4.0]))
diag = np.real(np.diag(matrix_elements(obs, spec).values))
print(f"<E|O|E> over all {spec.dim} eigenstates: min {diag.min():.12f}, max {diag.max():.12f}")
print(f"Tr O / D = {obs.trace / spec.dim:.12f}")
print("diagonal constancy:", diagonal_constancy(matrix_elements(obs, spec), obs))
