"""Hamiltonian unbiased bases (HUBs) and observables (HUOs).

A HUB is any orthonormal basis whose overlaps with every energy eigenvector
have modulus ``1/sqrt(D)``; it is built here as ``U_E @ W`` with ``W`` either
the discrete Fourier basis or a non-computational member of a MUB family.
A HUO is diagonal in a HUB.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Observable, SpectralDecomposition
from .errors import NotUnbiasedError, ValidationError
from .mub import fourier_basis, generate_mub_family
from .rng import as_rng

UNBIASED_TOL = 1e-10
PHASE_TABLE_TOL = 1e-8


@dataclass(frozen=True)
class HubBasis:
    """Columns ``|j,s>`` unbiased to the eigenbasis of a Hamiltonian."""

    vectors: np.ndarray
    method: str
    source: str = ""

    @property
    def dim(self):
        return self.vectors.shape[0]

    def overlaps(self, spec: SpectralDecomposition):
        """Matrix ``<j,s|E_alpha>`` with rows (j,s) and columns alpha."""
        return self.vectors.conj().T @ spec.vectors

    def deviation(self, spec: SpectralDecomposition):
        return float(np.max(np.abs(np.abs(self.overlaps(spec)) ** 2 - 1 / self.dim)))


def hub_from_hamiltonian(spec: SpectralDecomposition, method="fourier", source="") -> HubBasis:
    """Build a HUB from an energy eigenbasis.

    ``method`` is ``"fourier"`` (any D) or ``("mub", k)`` / ``"mub:k"`` for basis
    ``k >= 1`` of the complete MUB family (D prime or a power of two).
    """
    d = spec.dim
    if isinstance(method, str) and method.startswith("mub"):
        _, _, idx = method.partition(":")
        method = ("mub", int(idx) if idx else 1)
    if method == "fourier":
        w, name = fourier_basis(d), "fourier"
    elif isinstance(method, tuple) and method[0] == "mub":
        k = int(method[1])
        family = generate_mub_family(d)
        if not 1 <= k <= d:
            raise ValidationError(f"mub index must be in 1..{d}; index 0 is the eigenbasis itself")
        w, name = family.basis(k), f"mub:{k}"
    else:
        raise ValidationError(f"unknown HUB method {method!r}")
    return HubBasis(spec.vectors @ w, name, source)


@dataclass(frozen=True)
class SpectrumAssignment:
    """Distinct eigenvalues and their multiplicities for a HUO."""

    values: np.ndarray
    multiplicities: np.ndarray
    mode: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.multiplicities, dtype=int)
        if v.shape != m.shape or v.ndim != 1 or len(v) == 0:
            raise ValidationError("need one multiplicity per eigenvalue")
        if np.any(m < 1):
            raise ValidationError("multiplicities must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "multiplicities", m)

    @property
    def dim(self):
        return int(self.multiplicities.sum())

    def column_values(self):
        return np.repeat(self.values, self.multiplicities)

    @classmethod
    def nondegenerate(cls, dim, values=None):
        values = symmetric_values(dim) if values is None else values
        return cls(values, np.ones(dim, dtype=int), "nondegenerate")

    @classmethod
    def degenerate(cls, dim, d1=4, values=None):
        """``d1`` distinct values, each with multiplicity ``dim // d1``."""
        if d1 < 1 or dim % d1:
            raise ValidationError(f"dimension {dim} is not divisible by D1={d1}")
        values = symmetric_values(d1) if values is None else values
        return cls(values, np.full(d1, dim // d1), "degenerate")

    @classmethod
    def parse(cls, text, dim):
        """Parse ``nondegenerate``, ``degenerate[:D1]`` or ``custom:v1*m1,v2*m2,...``."""
        kind, _, arg = text.partition(":")
        if kind == "nondegenerate":
            return cls.nondegenerate(dim)
        if kind == "degenerate":
            return cls.degenerate(dim, int(arg) if arg else 4)
        if kind == "custom":
            vals, mults = [], []
            for item in arg.split(","):
                v, _, m = item.partition("*")
                vals.append(float(v))
                mults.append(int(m) if m else 1)
            return cls(vals, mults)
        raise ValidationError(f"unknown spectrum mode {kind!r}")


def symmetric_values(k):
    """k integers centred at zero with step 2, e.g. k=4 -> (-3, -1, 1, 3)."""
    return np.arange(k, dtype=float) * 2 - (k - 1)


def make_huo(basis: HubBasis, spectrum: SpectrumAssignment, arrangement="shuffled", seed=0) -> Observable:
    """Observable diagonal in ``basis`` with the given spectrum.

    ``arrangement`` decides which HUB columns form each sector. ``"shuffled"``
    (default) assigns columns through a seeded permutation so the spectrum
    carries no relation to the column order; ``"contiguous"`` uses the columns
    in order, which for the Fourier HUB makes off-diagonal elements a discrete
    Fourier transform of a step function.
    """
    d = basis.dim
    if spectrum.dim != d:
        raise ValidationError(f"multiplicities sum to {spectrum.dim}, basis dimension is {d}")
    order = np.argsort(spectrum.values, kind="stable")
    values, mults = spectrum.values[order], spectrum.multiplicities[order]
    uniq, inv = np.unique(values, return_inverse=True)
    merged = np.bincount(inv, weights=mults).astype(int)
    if arrangement == "shuffled":
        perm = as_rng(seed).permutation(d)
    elif arrangement == "contiguous":
        perm = np.arange(d)
    else:
        raise ValidationError(f"unknown arrangement {arrangement!r}")
    labels = np.repeat(np.arange(len(uniq)), merged)
    return Observable(uniq, basis.vectors[:, perm], labels)


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(y <= -np.pi, np.pi, y)


@dataclass(frozen=True)
class PhaseTable:
    """Phases ``theta[k, alpha]`` with ``<k|E_alpha> = exp(i theta) / sqrt(D)``.

    Rows follow the basis column order supplied at construction; for an
    observable that is its ``(j, s)`` labelling.
    """

    theta: np.ndarray

    @property
    def dim(self):
        return self.theta.shape[1]

    def omega(self, alpha, beta):
        """Phase differences ``theta[:, beta] - theta[:, alpha]`` wrapped to (-pi, pi]."""
        return wrap_phase(self.theta[:, beta] - self.theta[:, alpha])

    def omega_pairs(self, alphas, betas):
        """``omega`` for many pairs at once, shape (n_pairs, D)."""
        return wrap_phase(self.theta[:, betas] - self.theta[:, alphas]).T


def phase_table(basis, spec: SpectralDecomposition, check=True) -> PhaseTable:
    """Extract HUB phases ``theta = arg(sqrt(D) <j,s|E_alpha>)``.

    ``basis`` is a :class:`HubBasis`, an :class:`Observable` or a column
    matrix. With ``check=True`` a deviation of any ``|<j,s|E_alpha>|^2`` from
    ``1/D`` beyond 1e-8 raises :class:`NotUnbiasedError`; ``check=False``
    extracts phases from any basis (negative controls).
    """
    vecs = basis.vectors if isinstance(basis, HubBasis) else getattr(basis, "basis", basis)
    ov = np.asarray(vecs).conj().T @ spec.vectors
    d = spec.dim
    if check:
        dev = np.max(np.abs(np.abs(ov) ** 2 - 1 / d))
        if dev > PHASE_TABLE_TOL:
            raise NotUnbiasedError(f"basis is not unbiased to the energy eigenbasis (deviation {dev:.2e})")
    return PhaseTable(wrap_phase(np.angle(np.sqrt(d) * ov)))


def reconstruct_elements(obs: Observable, phases: PhaseTable):
    """Energy-basis matrix ``O_ab = (1/D) sum_k lambda_k exp(i omega_k^{ab})`` from phases."""
    e = np.exp(1j * phases.theta)
    lam = obs.column_values
    return (e.conj().T * lam) @ e / phases.dim
