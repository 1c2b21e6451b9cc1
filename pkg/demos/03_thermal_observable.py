"""Maximum observable entropy at fixed energy.

Maximizes the Shannon entropy of a Hamiltonian unbiased observable over pure
states of an Ising chain with given mean energy, and checks the linear
relation between the entropy and the energy multiplier.
"""
from huolab.acceptance import ising
from huolab.core import pure_state, spectral_decompose
from huolab.equilibrium import MaximizeOptions, ee_residuals, maximize_entropy
from huolab.hub import SpectrumAssignment, hub_from_hamiltonian, make_huo

h = ising(4)
spec = spectral_decompose(h)
obs = make_huo(hub_from_hamiltonian(spec), SpectrumAssignment.degenerate(spec.dim, 4))

print("E0        H_O      1-lambda_N  lambda_E   linear gap")
for frac in (0.1, 0.5, 0.9):
    e0 = spec.energies[0] + frac * spec.spectral_range
    res = maximize_entropy(obs, h, e0, MaximizeOptions(seed=0), spec=spec)
    m = res.multipliers
    print(f"{e0:8.3f}  {res.entropy:.5f}  {m.zero_point:10.5f}  {m.lambda_e:9.5f}  {res.report.linear_relation_gap:.1e}")

# the maximum is log 4 at every energy, so the energy multiplier vanishes:
# each eigenstate already spreads uniformly over the four outcomes
psi = pure_state(spec.vectors[:, 7])
rep = ee_residuals(psi, obs, h)
print(f"\neigenstate: ee1 residual {rep.ee1_residual:.1e}, max ee2 residual {rep.ee2_max:.1e}")
