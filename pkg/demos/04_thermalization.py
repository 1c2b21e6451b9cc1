"""Relaxation of a Hamiltonian unbiased observable after a quench.

A state confined to a narrow energy shell of an Ising chain is evolved
exactly. The long-time average of the observable, its diagonal-ensemble value
and its microcanonical value coincide, and the outcome entropy stays near its
ceiling log(#outcomes).
"""
import numpy as np

from huolab.acceptance import ising
from huolab.core import spectral_decompose
from huolab.dynamics import de_equals_mc_for_huo, narrow_energy_state, thermalization_trace, window_average
from huolab.equilibrium import energy_shell
from huolab.hub import SpectrumAssignment, hub_from_hamiltonian, make_huo

spec = spectral_decompose(ising(8))
obs = make_huo(hub_from_hamiltonian(spec), SpectrumAssignment.degenerate(spec.dim, 4, values=[1.0, 2.0, 3.0, 4.0]))
e0 = spec.energies[0] + spec.spectral_range / 2
shell = energy_shell(spec, e0, width=0.1 * spec.spectral_range)
psi = narrow_energy_state(spec, shell, seed=3).vector
print(f"shell at E0={e0:.3f}: {shell.size} levels")

rep = de_equals_mc_for_huo(psi, spec, obs, shell)
print(f"diagonal ensemble {rep.de_value:.12f}  microcanonical {rep.mc_value:.12f}  Tr O/D {rep.trace_over_dim:.12f}")
print(f"time average over [100, 10000]: {window_average(psi, spec, obs, 1e2, 1e4):.6f}")

trace = thermalization_trace(psi, spec, obs, np.linspace(0, 50, 11), shell)
print("\n   t     <O>     H_O/log 4   TV to mc")
for t, o, ent, tv in trace.rows():
    print(f"{t:5.1f}  {o:.4f}  {ent / np.log(4):9.4f}  {tv:.4f}")
