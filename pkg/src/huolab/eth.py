"""Energy-basis matrix elements and the ETH checks for Hamiltonian unbiased observables.

Covers diagonal constancy, phase uniformity (KS against the uniform law on
(-pi, pi]), off-diagonal variance and its 1/sqrt(D) scaling, Gaussian moments of
standardized off-diagonal elements for degenerate HUOs, the uncorrelated
factorization test, and a binned summary of the ETH ansatz.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import Observable, SpectralDecomposition, spectral_decompose
from .errors import ValidationError
from .hub import PhaseTable, SpectrumAssignment, hub_from_hamiltonian, make_huo
from .rng import derive_rng

DIAGONAL_TOL = 1e-10
KS_ALPHA = 0.01
KS_PASS_FRACTION = 0.95
ASYMPTOTIC_DIM = 64
FULL_SCAN_DIM = 256
N_SAMPLED_PAIRS = 10_000
MIN_BIN_COUNT = 10


@dataclass(frozen=True)
class MatrixElementTable:
    """``O_ab = <E_a|O|E_b>`` with the energies of the eigenbasis."""

    values: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        sym = np.max(np.abs(self.values - self.values.conj().T))
        if sym > 1e-12 * max(1.0, np.max(np.abs(self.values))):
            raise ValidationError(f"matrix-element table is not Hermitian ({sym:.2e})")

    @property
    def dim(self):
        return len(self.energies)

    def ebar(self, a, b):
        return (self.energies[a] + self.energies[b]) / 2

    def omega(self, a, b):
        return self.energies[a] - self.energies[b]


def matrix_elements(obs, spec: SpectralDecomposition) -> MatrixElementTable:
    m = obs.matrix() if isinstance(obs, Observable) else np.asarray(obs)
    if m.shape != (spec.dim, spec.dim):
        raise ValidationError(f"observable shape {m.shape} does not match dimension {spec.dim}")
    o = spec.vectors.conj().T @ m @ spec.vectors
    return MatrixElementTable((o + o.conj().T) / 2, spec.energies)


def sample_pairs(dim, n_pairs=N_SAMPLED_PAIRS, rng=None, full_scan_dim=FULL_SCAN_DIM):
    """Off-diagonal pairs ``a < b``: all of them for ``dim <= full_scan_dim``, else a seeded sample
    without replacement."""
    a, b = np.triu_indices(dim, k=1)
    if dim <= full_scan_dim or n_pairs >= len(a):
        return a, b
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    pick = np.sort(rng.choice(len(a), size=n_pairs, replace=False))
    return a[pick], b[pick]


@dataclass(frozen=True)
class DiagonalReport:
    max_deviation: float
    mean_deviation: float
    reference: float
    tol: float = DIAGONAL_TOL

    @property
    def passed(self):
        return self.max_deviation <= self.tol


def diagonal_constancy(table: MatrixElementTable, obs) -> DiagonalReport:
    """Largest ``|O_aa - Tr O / D|`` over every ``a``."""
    tr = obs.trace if isinstance(obs, Observable) else float(np.trace(obs).real)
    ref = tr / table.dim
    dev = np.abs(np.diag(table.values).real - ref)
    return DiagonalReport(float(dev.max()), float(dev.mean()), ref)


@dataclass(frozen=True)
class PhaseUniformityReport:
    pairs: np.ndarray
    ks_statistic: np.ndarray
    p_value: np.ndarray
    cos_moments: np.ndarray  # (n_pairs, 2): mean and second moment of cos(omega)
    sin_moments: np.ndarray
    dim: int

    @property
    def pass_fraction(self):
        return float(np.mean(self.p_value >= KS_ALPHA))

    @property
    def asymptotic(self):
        return self.dim >= ASYMPTOTIC_DIM

    @property
    def passed(self):
        return self.asymptotic and self.pass_fraction >= KS_PASS_FRACTION


def phase_uniformity(phases: PhaseTable, pairs) -> PhaseUniformityReport:
    """KS test of each pair's phase differences ``omega_k^{ab}`` against uniform on (-pi, pi].

    Uniform moments for reference: E cos = E sin = 0, E cos^2 = E sin^2 = 1/2.
    """
    a, b = (np.asarray(x, dtype=int) for x in pairs)
    if np.any(a == b):
        raise ValidationError("phase uniformity needs alpha != beta (omega vanishes identically)")
    om = phases.omega_pairs(a, b)
    uniform = stats.uniform(loc=-np.pi, scale=2 * np.pi)
    ks = np.empty(len(a))
    pv = np.empty(len(a))
    for i, row in enumerate(om):
        res = stats.kstest(row, uniform.cdf)
        ks[i], pv[i] = res.statistic, res.pvalue
    c, s = np.cos(om), np.sin(om)
    return PhaseUniformityReport(
        np.column_stack([a, b]), ks, pv,
        np.column_stack([c.mean(1), (c**2).mean(1)]),
        np.column_stack([s.mean(1), (s**2).mean(1)]),
        phases.dim,
    )


def predicted_offdiag_variance(obs: Observable):
    """Variance of Re O_ab (and of Im O_ab) for independent uniform phases.

    ``sum_k (lambda_k - mean)^2 / (2 D^2)``; for a zero-trace spectrum with
    ``D1`` values of multiplicity ``D/D1`` this is ``sum_j lambda_j^2 / (2 D1 D)``.
    The mean is removed because sum_k exp(i omega_k^{ab}) vanishes for a != b.
    """
    lam = obs.column_values
    d = len(lam)
    return float(np.sum((lam - lam.mean()) ** 2) / (2 * d * d))


@dataclass(frozen=True)
class ScalingFit:
    dims: np.ndarray
    std_re: np.ndarray
    std_im: np.ndarray
    predicted_std: np.ndarray
    slope: float
    intercept: float
    slope_ci: tuple
    degenerate_data: bool = False

    def within_prediction(self, rel=0.1):
        return bool(np.all(np.abs(self.std_re / self.predicted_std - 1) <= rel)
                    and np.all(np.abs(self.std_im / self.predicted_std - 1) <= rel))


def offdiag_stats(table: MatrixElementTable, pairs):
    a, b = pairs
    v = table.values[a, b]
    return float(np.sqrt(np.mean(v.real**2))), float(np.sqrt(np.mean(v.imag**2)))


def fit_scaling(dims, std_re, std_im, predicted=None, zero_tol=1e-12) -> ScalingFit:
    """Least-squares slope of ``log std`` against ``log D`` pooled over Re and Im parts,
    with a 95% confidence interval from the t distribution.

    Standard deviations all at or below ``zero_tol`` (rounding noise of an
    observable proportional to the identity) are refused with ``degenerate_data``.
    """
    dims = np.asarray(dims, dtype=float)
    std_re, std_im = np.asarray(std_re), np.asarray(std_im)
    if len(dims) < 4:
        raise ValidationError("scaling fit needs at least 4 dimensions")
    predicted = np.full(len(dims), np.nan) if predicted is None else np.asarray(predicted)
    if np.all(std_re <= zero_tol) and np.all(std_im <= zero_tol):
        return ScalingFit(dims, std_re, std_im, predicted, np.nan, np.nan, (np.nan, np.nan), True)
    x = np.log(np.concatenate([dims, dims]))
    y = np.log(np.concatenate([std_re, std_im]))
    fit = stats.linregress(x, y)
    t = stats.t.ppf(0.975, len(x) - 2)
    ci = (fit.slope - t * fit.stderr, fit.slope + t * fit.stderr)
    return ScalingFit(dims, std_re, std_im, predicted, float(fit.slope), float(fit.intercept), ci)


def offdiag_scaling(dims, spectrum=lambda d: SpectrumAssignment.degenerate(d, 4), model="random",
                    seed=0, n_pairs=N_SAMPLED_PAIRS, method="fourier") -> ScalingFit:
    """Off-diagonal standard deviation of a HUO family across dimensions.

    ``spectrum`` maps a dimension to its :class:`SpectrumAssignment`; the
    Hamiltonian for each D is a seeded random Hermitian matrix (``model="random"``)
    or a transverse-field Ising chain with longitudinal field (``model="ising"``).
    """
    from .core import build_hamiltonian

    dims = list(dims)
    if len(dims) < 4:
        raise ValidationError("scaling fit needs at least 4 dimensions")
    std_re, std_im, pred = [], [], []
    for d in dims:
        if model == "random":
            h = build_hamiltonian({"model": "random", "dim": d, "seed": int(derive_rng(seed, "scaling", d).integers(2**63))})
        else:
            n = int(np.log2(d))
            h = build_hamiltonian({"model": "ising", "n_sites": n, "J": 1.0, "h": 0.9045, "g": 0.809})
        spec = spectral_decompose(h)
        obs = make_huo(hub_from_hamiltonian(spec, method), spectrum(d), seed=seed)
        table = matrix_elements(obs, spec)
        sr, si = offdiag_stats(table, sample_pairs(d, n_pairs, derive_rng(seed, "scaling-pairs", d)))
        std_re.append(sr)
        std_im.append(si)
        pred.append(np.sqrt(predicted_offdiag_variance(obs)))
    return fit_scaling(dims, std_re, std_im, pred)


@dataclass(frozen=True)
class CltReport:
    applicable: bool
    degenerate_data: bool
    n_samples: int
    mean: float = np.nan
    variance: float = np.nan
    kurtosis: float = np.nan
    reason: str = ""

    @property
    def passed(self):
        return (self.applicable and not self.degenerate_data and abs(self.mean) <= 0.05
                and abs(self.variance - 1) <= 0.1 and abs(self.kurtosis - 3) <= 0.5)


def clt_residual_test(table: MatrixElementTable, obs: Observable, n_pairs=N_SAMPLED_PAIRS, seed=0,
                      min_ratio=64) -> CltReport:
    """Moments of off-diagonal elements standardized by the independent-phase prediction.

    Re and Im parts are pooled as separate samples. Requires a degenerate
    spectrum with every multiplicity at least ``min_ratio`` times the number of
    distinct values; otherwise the report is marked not applicable.
    """
    d1 = len(obs.values)
    if d1 == 1:
        return CltReport(True, True, 0, reason="all eigenvalues equal; residuals vanish identically")
    if obs.multiplicities.min() < min_ratio * d1:
        return CltReport(False, False, 0, reason=f"D2 < {min_ratio} D1: CLT regime not applicable")
    a, b = sample_pairs(table.dim, n_pairs, derive_rng(seed, "clt"), full_scan_dim=0)
    if len(a) < n_pairs:
        raise ValidationError(f"only {len(a)} pairs available, {n_pairs} required")
    sigma = np.sqrt(predicted_offdiag_variance(obs))
    v = table.values[a, b]
    r = np.concatenate([v.real, v.imag]) / sigma
    return CltReport(True, False, len(r), float(r.mean()), float(r.var()),
                     float(stats.kurtosis(r, fisher=False)))


@dataclass(frozen=True)
class FactorizationReport:
    diagonal_error: float
    max_offdiag: float
    offdiag_bound: float
    corr_cos: np.ndarray
    corr_sin: np.ndarray
    corr_threshold: float

    @property
    def uncorrelated_fraction(self):
        ok = (np.abs(self.corr_cos) <= self.corr_threshold) & (np.abs(self.corr_sin) <= self.corr_threshold)
        return float(np.mean(ok))

    @property
    def correlation_flag(self):
        """Raised when any sampled pair shows correlation above threshold."""
        return bool(np.any(np.abs(self.corr_cos) > self.corr_threshold)
                    or np.any(np.abs(self.corr_sin) > self.corr_threshold))

    @property
    def passed(self):
        return self.max_offdiag <= self.offdiag_bound and self.uncorrelated_fraction >= KS_PASS_FRACTION


def _rowwise_corr(x, y):
    # correlation of a fixed vector x with every row of y
    xc = x - x.mean()
    yc = y - y.mean(axis=1, keepdims=True)
    den = np.linalg.norm(xc) * np.linalg.norm(yc, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (yc @ xc) / den
    return np.where(den > 0, r, 0.0)


def uncorrelated_factorization_check(obs: Observable, spec: SpectralDecomposition, phases: PhaseTable | None = None,
                                     n_pairs=N_SAMPLED_PAIRS, seed=0) -> FactorizationReport:
    """Compare ``O_ab`` with ``(Tr O / D) delta_ab`` and measure, per pair, the sample
    correlation of the spectrum ``lambda_k`` with ``cos omega_k^{ab}`` and ``sin omega_k^{ab}``."""
    from .hub import phase_table

    phases = phases or phase_table(obs, spec)
    table = matrix_elements(obs, spec)
    d = spec.dim
    diag = diagonal_constancy(table, obs)
    a, b = sample_pairs(d, n_pairs, derive_rng(seed, "factorization"))
    lam = obs.column_values
    cc, ss = np.empty(len(a)), np.empty(len(a))
    for start in range(0, len(a), 2048):
        sl = slice(start, start + 2048)
        om = phases.omega_pairs(a[sl], b[sl])
        cc[sl] = _rowwise_corr(lam, np.cos(om))
        ss[sl] = _rowwise_corr(lam, np.sin(om))
    off = np.abs(table.values - np.diag(np.diag(table.values)))
    bound = 10 / np.sqrt(d) * np.max(np.abs(obs.values))
    return FactorizationReport(diag.max_deviation, float(off.max()), float(bound), cc, ss, 3 / np.sqrt(d))


@dataclass(frozen=True)
class EthAnsatzStats:
    diagonal_mean: float
    diagonal_max_deviation: float
    f1_bins: np.ndarray  # (n_bins, 2): bin-centre energy, mean O_aa
    entropy_density: np.ndarray  # S(Ebar) at the f1 bin centres
    f2: np.ndarray  # (n_ebar_bins, n_omega_bins) std of exp(S/2)|O_ab|
    residual_moments: tuple  # mean, variance, kurtosis
    insufficient_statistics: bool = False
    notes: list = field(default_factory=list)


def entropy_density(energies, at, eps):
    """Thermodynamic entropy ``S(E) = log(W * sum_a g_eps(E - E_a))``.

    ``g_eps`` is a normalized Gaussian of width ``eps`` and ``W`` the spectral
    range, so a flat density of ``D`` levels gives ``S ~ log D``.
    """
    if eps <= 0:
        raise ValidationError("smearing width must be positive")
    energies = np.asarray(energies)
    w = max(float(energies.max() - energies.min()), eps)
    g = np.exp(-0.5 * ((np.asarray(at)[:, None] - energies[None, :]) / eps) ** 2) / (eps * np.sqrt(2 * np.pi))
    return np.log(w * g.sum(axis=1))


def _equal_population_edges(x, n_bins):
    edges = np.quantile(x, np.linspace(0, 1, n_bins + 1))
    edges[-1] = np.nextafter(edges[-1], np.inf)
    return edges


def eth_ansatz_summary(table: MatrixElementTable, obs, eps=None, n_bins=16, n_pairs=N_SAMPLED_PAIRS, seed=0) -> EthAnsatzStats:
    """Binned estimates of the smooth ETH functions and standardized off-diagonal residual moments.

    ``f1``: mean ``O_aa`` in equal-population energy bins. ``f2``: std of
    ``exp(S(Ebar)/2) |O_ab|`` over equal-population ``Ebar`` bins and linear
    ``omega`` bins. Residuals: Re and Im parts divided by their per-bin rms, over
    bins holding at least ``MIN_BIN_COUNT`` pairs.
    """
    e = table.energies
    d = table.dim
    span = float(e[-1] - e[0])
    eps = span / 50 if eps is None else eps
    if eps <= 0:
        raise ValidationError("smearing width must be positive")
    diag = np.diag(table.values).real
    tr = obs.trace if isinstance(obs, Observable) else float(np.trace(obs).real)
    if d < 2 * n_bins:
        return EthAnsatzStats(float(diag.mean()), float(np.max(np.abs(diag - tr / d))), np.empty((0, 2)),
                              np.empty(0), np.empty((0, 0)), (np.nan, np.nan, np.nan), True,
                              [f"D={d} too small for {n_bins} bins"])
    edges = _equal_population_edges(e, n_bins)
    idx = np.clip(np.searchsorted(edges, e, side="right") - 1, 0, n_bins - 1)
    centres = np.array([e[idx == k].mean() for k in range(n_bins)])
    f1 = np.array([diag[idx == k].mean() for k in range(n_bins)])
    s_centres = entropy_density(e, centres, eps)

    a, b = sample_pairs(d, n_pairs, derive_rng(seed, "eth-summary"))
    ebar, om = (e[a] + e[b]) / 2, e[a] - e[b]
    s_pairs = entropy_density(e, ebar, eps)
    v = table.values[a, b]
    eb_edges = _equal_population_edges(ebar, n_bins)
    eb_idx = np.clip(np.searchsorted(eb_edges, ebar, side="right") - 1, 0, n_bins - 1)
    om_edges = np.linspace(om.min(), om.max() + 1e-12, n_bins + 1)
    om_idx = np.clip(np.searchsorted(om_edges, om, side="right") - 1, 0, n_bins - 1)
    scaled = np.exp(s_pairs / 2) * np.abs(v)
    f2 = np.full((n_bins, n_bins), np.nan)
    resid = []
    for i in range(n_bins):
        for k in range(n_bins):
            m = (eb_idx == i) & (om_idx == k)
            if m.sum() >= 2:
                f2[i, k] = scaled[m].std()
            if m.sum() >= MIN_BIN_COUNT:
                # R has zero mean, so its scale is the bin rms about zero
                for part in (v[m].real, v[m].imag):
                    rms = np.sqrt(np.mean(part**2))
                    if rms > 0:
                        resid.append(part / rms)
    if resid:
        r = np.concatenate(resid)
        moments = (float(r.mean()), float(r.var()), float(stats.kurtosis(r, fisher=False)))
    else:
        moments = (np.nan, np.nan, np.nan)
    return EthAnsatzStats(float(diag.mean()), float(np.max(np.abs(diag - tr / d))), np.column_stack([centres, f1]),
                          s_centres, f2, moments, len(a) < 100)
