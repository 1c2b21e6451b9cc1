"""Observable entropy, Hamiltonian unbiased observables and thermalization checks.

Modules
-------
core         Hamiltonians, spectral decomposition, states, observables, distributions
mub          complete families of mutually unbiased bases (prime and 2**N dimensions)
hub          Hamiltonian unbiased bases, observables and their phase tables
entropy      Shannon / von Neumann entropies, Gibbs states, entropic bounds
equilibrium  equilibrium residuals, constrained entropy maximization, stationarity
dynamics     exact evolution, narrow-energy states, diagonal and microcanonical ensembles
eth          energy-basis matrix elements and ETH statistics
config, runner, cli   experiment configuration, orchestration and the ``huo-lab`` command
acceptance   the twelve acceptance checks
"""
__version__ = "0.1.0"

from .core import (
    Observable,
    QuantumState,
    SpectralDecomposition,
    build_hamiltonian,
    eigenvalue_distribution,
    mixed_state,
    observable_from_matrix,
    pure_state,
    spectral_decompose,
)
from .errors import HuoLabError
from .hub import SpectrumAssignment, hub_from_hamiltonian, make_huo, phase_table
from .mub import fourier_basis, generate_mub_family, unbiasedness_deviation

__all__ = [
    "HuoLabError",
    "Observable",
    "QuantumState",
    "SpectralDecomposition",
    "SpectrumAssignment",
    "build_hamiltonian",
    "eigenvalue_distribution",
    "fourier_basis",
    "generate_mub_family",
    "hub_from_hamiltonian",
    "make_huo",
    "mixed_state",
    "observable_from_matrix",
    "phase_table",
    "pure_state",
    "spectral_decompose",
    "unbiasedness_deviation",
]
