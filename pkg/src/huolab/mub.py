"""Complete families of mutually unbiased bases (MUBs).

Odd prime dimensions use the quadratic-phase construction. Dimensions
``2**N`` partition the nontrivial Pauli strings into ``2**N + 1`` commuting
classes with a GF(2^N) trace form; the joint eigenbasis of each class is a
stabilizer basis with entries ``i**Q(x) (-1)**(m.x) / sqrt(D)``.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import UnsupportedDimensionError, ValidationError

MAX_QUBITS = 12

# Irreducible polynomials over GF(2), bit k is the coefficient of x**k.
IRREDUCIBLE = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
}


def is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def qubit_count(d):
    """N such that d == 2**N, or None."""
    if d >= 2 and d & (d - 1) == 0:
        return d.bit_length() - 1
    return None


def fourier_basis(d):
    """Discrete Fourier basis: column k has entries exp(2 pi i m k / d) / sqrt(d)."""
    if d < 1:
        raise ValidationError("dimension must be positive")
    m = np.arange(d)
    return np.exp(2j * np.pi * np.outer(m, m) / d) / np.sqrt(d)


def unbiasedness_deviation(b1, b2):
    """max_{i,j} | |<v_i|w_j>|^2 - 1/D | for two bases given as column matrices."""
    b1, b2 = np.asarray(b1), np.asarray(b2)
    if b1.shape != b2.shape or b1.ndim != 2:
        raise ValidationError(f"basis shapes differ: {b1.shape} vs {b2.shape}")
    d = b1.shape[0]
    return float(np.max(np.abs(np.abs(b1.conj().T @ b2) ** 2 - 1 / d)))


def fix_phases(basis):
    """Rotate each column so its first non-negligible component is real positive."""
    basis = np.array(basis, dtype=complex)
    mags = np.abs(basis)
    first = np.argmax(mags > 1e-12 * mags.max(axis=0), axis=0)
    ph = basis[first, np.arange(basis.shape[1])]
    return basis * (np.abs(ph) / ph)


class GF2n:
    """Arithmetic in GF(2^n) on integers 0..2**n - 1 (polynomial basis)."""

    def __init__(self, n):
        if n not in IRREDUCIBLE:
            raise UnsupportedDimensionError(f"GF(2^{n}) not tabulated (1 <= n <= {MAX_QUBITS})")
        self.n = n
        self.poly = IRREDUCIBLE[n]
        powers = [1]
        for _ in range(2 * n - 2):
            powers.append(self.mul(powers[-1], 2))
        self._powers = powers  # xi**0 .. xi**(2n-2)
        # the trace is GF(2)-linear: tr(y) is the parity of y masked by the traces of the basis monomials
        self._trace_mask = sum(self._slow_trace(1 << k) << k for k in range(n))

    def mul(self, a, b):
        r = 0
        while b:
            if b & 1:
                r ^= a
            b >>= 1
            a <<= 1
            if a >> self.n:
                a ^= self.poly
        return r

    def trace(self, a):
        return (a & self._trace_mask).bit_count() & 1

    def _slow_trace(self, a):
        # tr(a) = a + a^2 + a^4 + ... + a^(2^(n-1))
        t, x = 0, a
        for _ in range(self.n):
            t ^= x
            x = self.mul(x, x)
        return t & 1

    def trace_form(self, a):
        """Symmetric binary matrix M[i, k] = tr(a xi**(i+k))."""
        n = self.n
        t = [self.trace(self.mul(a, p)) for p in self._powers]
        return np.array([[t[i + k] for k in range(n)] for i in range(n)], dtype=np.int64)


def _bit_matrix(n):
    # bits[x, i] = bit i of x (qubit i <-> bit i)
    x = np.arange(2**n)
    return (x[:, None] >> np.arange(n)[None, :]) & 1


def walsh_hadamard(n):
    b = _bit_matrix(n)
    parity = (b @ b.T) & 1
    return (1 - 2 * parity) / np.sqrt(2**n)


class MubFamily:
    """A complete MUB family; bases are generated on demand.

    ``basis(0)`` is the computational basis. ``len(family)`` is D + 1.
    """

    def __init__(self, dim, kind):
        self.dim = dim
        self.kind = kind
        if kind == "prime":
            self._k = np.arange(dim)
        else:
            self.n_qubits = qubit_count(dim)
            self._field = GF2n(self.n_qubits)
            self._bits = _bit_matrix(self.n_qubits)
            self._bits_f = self._bits.astype(float)
            self._hadamard = walsh_hadamard(self.n_qubits)

    def __len__(self):
        return self.dim + 1

    def __iter__(self):
        return (self.basis(i) for i in range(len(self)))

    @property
    def bases(self):
        return list(self)

    def _diag_phases(self, index):
        a = index - 1
        if self.kind == "prime":
            k = self._k
            return np.exp(2j * np.pi * ((a * k * k) % self.dim) / self.dim)
        m = self._field.trace_form(a).astype(float)
        q = np.rint(np.sum((self._bits_f @ m) * self._bits_f, axis=1)).astype(np.int64) % 4
        return 1j**q

    def basis(self, index):
        if not 0 <= index <= self.dim:
            raise IndexError(f"family has {len(self)} bases")
        if index == 0:
            return np.eye(self.dim, dtype=complex)
        if self.kind == "prime":
            k = self._k
            f = np.exp(2j * np.pi * np.outer(k, k) / self.dim) / np.sqrt(self.dim)
            return self._diag_phases(index)[:, None] * f
        return self._diag_phases(index)[:, None] * self._hadamard

    def vector(self, index, m):
        """Single column ``m`` of ``basis(index)`` without building the full matrix."""
        d = self.dim
        if index == 0:
            v = np.zeros(d, dtype=complex)
            v[m] = 1
            return v
        if self.kind == "prime":
            k = self._k
            return self._diag_phases(index) * np.exp(2j * np.pi * m * k / d) / np.sqrt(d)
        parity = (self._bits @ ((m >> np.arange(self.n_qubits)) & 1)) & 1
        return self._diag_phases(index) * (1 - 2 * parity) / np.sqrt(d)


def generate_mub_family(d) -> MubFamily:
    """Complete family of D + 1 mutually unbiased bases for odd prime D or D = 2**N (N <= 12).

    Raises
    ------
    UnsupportedDimensionError
        For composite dimensions that are not powers of two.
    """
    if d < 2:
        raise UnsupportedDimensionError(f"no MUB family for dimension {d}")
    n = qubit_count(d)
    if n is not None:
        if n > MAX_QUBITS:
            raise UnsupportedDimensionError(f"2**{n} exceeds the supported 2**{MAX_QUBITS}")
        return MubFamily(d, "power-of-two")
    if is_prime(d):
        return MubFamily(d, "prime")
    raise UnsupportedDimensionError(
        f"dimension {d} is neither prime nor a power of two; complete MUB families are not constructed"
    )


def max_pairwise_deviation(family: MubFamily, n_samples=None, rng=None):
    """Largest unbiasedness deviation over all pairs, or over ``n_samples`` random overlaps."""
    if n_samples is None:
        bases = family.bases
        return max(unbiasedness_deviation(b1, b2) for b1, b2 in combinations(bases, 2))
    rng = np.random.default_rng(rng)
    d = family.dim
    worst = 0.0
    for _ in range(n_samples):
        i, k = rng.choice(len(family), size=2, replace=False)
        v = family.vector(int(i), int(rng.integers(d)))
        w = family.vector(int(k), int(rng.integers(d)))
        worst = max(worst, abs(abs(np.vdot(v, w)) ** 2 - 1 / d))
    return worst
