"""Experiment orchestration: one function per kind, atomic output, run records, golden comparison."""
from __future__ import annotations

import datetime as _dt
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import TOLERANCES, ExperimentConfig, parse_dims
from .core import MAX_DIM, ModelSpec, build_hamiltonian, mixed_state, spectral_decompose
from .errors import ResourceError, SchemaError, StageError, ValidationError
from .io import load_observable, read_csv, read_matrix, save_observable, sha256_file, write_csv, write_json, write_matrix
from .rng import derive_rng

RECORD_NAME = "run.json"


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    version: str
    wall_clock: float
    started: str
    verdicts: dict
    manifest: dict
    out_dir: Path
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v != "fail" for v in self.verdicts.values())

    def as_dict(self):
        return {"config_hash": self.config_hash, "version": self.version, "wall_clock": self.wall_clock,
                "started": self.started, "verdicts": self.verdicts, "manifest": self.manifest,
                "out_dir": str(self.out_dir), "summary": self.summary}


class _Stage:
    """Collects outputs in a staging directory and moves them into place only on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=f".{out_dir.name}.stage-"))
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.tmp / name

    def commit(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name in self.files:
            dest = self.out_dir / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.tmp / name, dest)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return {name: sha256_file(self.out_dir / name) for name in sorted(self.files)}

    def abort(self):
        shutil.rmtree(self.tmp, ignore_errors=True)


def _verdict(ok):
    return "pass" if ok else "fail"


def _skipped(reason):
    return f"skipped({reason})"


def _hamiltonian(cfg: ExperimentConfig):
    spec = ModelSpec.from_mapping(cfg.model_spec())
    if spec.hilbert_dim > MAX_DIM:
        raise ResourceError(f"dimension {spec.hilbert_dim} exceeds the dense cap {MAX_DIM}")
    h = build_hamiltonian(spec)
    return h, spectral_decompose(h)


def _observable(cfg: ExperimentConfig, spec):
    from .hub import SpectrumAssignment, hub_from_hamiltonian, make_huo

    o = cfg.section("observable")
    if o["path"] is not None:
        obs = load_observable(o["path"])
        if obs.dim != spec.dim:
            raise ValidationError(f"observable dimension {obs.dim} does not match Hamiltonian dimension {spec.dim}")
        return obs
    hub = hub_from_hamiltonian(spec, o["method"])
    return make_huo(hub, SpectrumAssignment.parse(o["spectrum"], spec.dim), o["arrangement"], o["seed"])


# --- experiment kinds -------------------------------------------------------------------------


def run_mub(cfg, stage):
    from .mub import generate_mub_family, max_pairwise_deviation

    d = cfg.get("mub", "dim")
    if d > MAX_DIM:
        raise ResourceError(f"dimension {d} exceeds the dense cap {MAX_DIM}")
    fam = generate_mub_family(d)
    for i, b in enumerate(fam):
        write_matrix(stage.path(f"basis_{i:04d}.dump"), b)
    exhaustive = d <= 64
    dev = max_pairwise_deviation(fam, None if exhaustive else 100_000, derive_rng(cfg.seed, "mub-samples"))
    write_json(stage.path("manifest.json"), {"dim": d, "count": len(fam), "kind": fam.kind,
                                             "max_pairwise_deviation": dev, "exhaustive": exhaustive})
    return {"unbiased": _verdict(dev <= cfg.tolerances["unbiased"]),
            "family_size": _verdict(len(fam) == d + 1)}, {"max_pairwise_deviation": dev}


def run_huo(cfg, stage):
    from .eth import diagonal_constancy, matrix_elements
    from .hub import phase_table

    h, spec = _hamiltonian(cfg)
    obs = _observable(cfg, spec)
    o = cfg.section("observable")
    save_observable(stage.tmp, obs, {"method": o["method"], "spectrum": o["spectrum"],
                                     "arrangement": o["arrangement"], "seed": o["seed"], "model": cfg.model_spec()})
    stage.files += ["basis.dump", "observable.dump", "observable.json"]
    write_matrix(stage.path("hamiltonian.dump"), h)
    dev = float(np.max(np.abs(np.abs(obs.basis.conj().T @ spec.vectors) ** 2 - 1 / spec.dim)))
    theta = phase_table(obs, spec, check=False).theta
    s_index = np.concatenate([np.arange(m) for m in obs.multiplicities])
    rows = ((int(obs.labels[k]), int(s_index[k]), a, float(theta[k, a]))
            for k in range(spec.dim) for a in range(spec.dim))
    write_csv(stage.path("phases.csv"), ["j", "s", "alpha", "theta"], rows)
    diag = diagonal_constancy(matrix_elements(obs, spec), obs)
    return ({"hub_unbiased": _verdict(dev <= cfg.tolerances["unbiased"]),
             "diagonal_constancy": _verdict(diag.max_deviation <= cfg.tolerances["diagonal"])},
            {"unbiased_deviation": dev, "diagonal_deviation": diag.max_deviation})


def _load_state(path):
    rho = read_matrix(path)
    return mixed_state(rho)


def run_entropy(cfg, stage):
    from .entropy import measured_entropy
    from .mub import unbiasedness_deviation

    e = cfg.section("entropy")
    unit = np.log(2) if e["bits"] else 1.0
    units = "bits" if e["bits"] else "nats"
    if e["manifest"] is None:
        state, basis = _load_state(e["state"]), read_matrix(e["basis"])
        if basis.shape[0] != state.dim:
            raise ValidationError("state and basis dimensions differ")
        h = measured_entropy(state, basis) / unit
        record = {"H": h, "units": units, "basis": Path(e["basis"]).name, "state": Path(e["state"]).name, "dim": state.dim}
        write_json(stage.path("entropy.json"), record)
        return {}, record
    manifest = Path(e["manifest"])
    trials = json.loads(manifest.read_text())
    rows, worst = [], np.inf
    for k, t in enumerate(trials):
        state = _load_state(manifest.parent / t["state"])
        b1, b2 = read_matrix(manifest.parent / t["basis1"]), read_matrix(manifest.parent / t["basis2"])
        dev = unbiasedness_deviation(b1, b2)
        h1, h2 = measured_entropy(state, b1), measured_entropy(state, b2)
        slack = h1 + h2 - np.log(state.dim)
        if dev <= 1e-8:
            worst = min(worst, slack)
        rows.append((k, h1 / unit, h2 / unit, slack / unit))
    write_csv(stage.path("entropy.csv"), ["trial", "H1", "H2", "slack"], rows)
    verdict = _skipped("no unbiased pairs") if not np.isfinite(worst) else _verdict(worst >= -cfg.tolerances["uncertainty"])
    return {"uncertainty_bound": verdict}, {"trials": len(rows), "min_slack": worst}


def _out_file(cfg, default):
    """Kinds whose primary output is a single file accept ``out`` as that file's path."""
    out = Path(cfg.out)
    if out.suffix:
        return out.parent, out.name
    return out, default


def run_maximize(cfg, stage, primary="eq.json"):
    from .equilibrium import MaximizeOptions, maximize_entropy
    from .core import eigenvalue_distribution
    from .dynamics import microcanonical_state
    from .entropy import shannon_entropy

    h, spec = _hamiltonian(cfg)
    obs = _observable(cfg, spec)
    e0 = cfg.get("maximize", "energy")
    opts = MaximizeOptions(n_starts=cfg.get("maximize", "n_starts"), seed=int(derive_rng(cfg.seed, "maximize").integers(2**63)))
    res = maximize_entropy(obs, h, e0, opts, spec=spec)
    dist = eigenvalue_distribution(res.state, obs)
    rep = res.report
    summary = {"energy": e0, "entropy": res.entropy, "converged": res.converged,
               "lambda_n": res.multipliers.lambda_n, "lambda_e": res.multipliers.lambda_e,
               "ee1_max": rep.ee1_residual, "ee2_max": rep.ee2_max, "linear_relation_gap": rep.linear_relation_gap,
               "multistart_spread": res.multistart_spread, "max_entropy": float(np.log(len(obs.values)))}
    delta = cfg.get("shell", "delta")
    if delta is not None:
        mc = microcanonical_state(spec, e0, delta, cfg.get("shell", "min_levels"))
        p_mc = eigenvalue_distribution(mc.state, obs)
        summary["microcanonical"] = {"delta": delta, "levels": mc.shell.size,
                                     "entropy": shannon_entropy(p_mc), "distribution": p_mc.probabilities}
    stem = Path(primary).stem
    write_json(stage.path(primary), summary)
    write_csv(stage.path(f"{stem}_distribution.csv"), ["lambda", "p"], zip(dist.values, dist.probabilities))
    tol = cfg.tolerances
    return ({"converged": _verdict(res.converged),
             "linear_relation": _verdict(rep.linear_relation_gap <= tol["linear_gap"]),
             "log_distribution_equation": _verdict(rep.ee2_max <= tol["ee2"])}, summary)


def _initial_state(cfg, spec):
    from .dynamics import narrow_energy_state
    from .equilibrium import energy_shell

    sh, st = cfg.section("shell"), cfg.section("state")
    shell = energy_shell(spec, sh["e0"], sh["delta"], sh["min_levels"])
    profile = st["profile"] if st["profile"] != "gaussian" else ("gaussian", st["sigma"])
    return narrow_energy_state(spec, shell, profile, derive_rng(cfg.seed, "state", st["seed"])), shell


def run_evolve(cfg, stage, primary="trace.csv"):
    from .dynamics import de_equals_mc_for_huo, thermalization_trace, window_average
    from .errors import PreconditionError

    h, spec = _hamiltonian(cfg)
    obs = _observable(cfg, spec)
    narrow, shell = _initial_state(cfg, spec)
    ev = cfg.section("evolve")
    scale = max(spec.spectral_range, 1e-300)
    tmax = ev["tmax"] if ev["tmax"] is not None else 1e4 / scale
    tmin = ev["tmin"] if ev["tmin"] is not None else min(1e-2 / scale, tmax / 10)
    if not 0 < tmin < tmax:
        raise ValidationError("need 0 < tmin < tmax")
    times = np.logspace(np.log10(tmin), np.log10(tmax), ev["n_times"])
    trace = thermalization_trace(narrow.vector, spec, obs, times, shell)
    write_csv(stage.path(primary), ["t", "expectation", "entropy", "tv_distance"], trace.rows())
    late = window_average(narrow.vector, spec, obs, tmax / 100, tmax)
    summary = {"shell_levels": shell.size, "energy_entropy": narrow.energy_entropy, "mc_expectation": trace.mc_expectation,
               "late_time_average": late, "min_entropy": float(trace.entropy.min()),
               "max_entropy": float(np.log(len(obs.values)))}
    verdicts = {}
    try:
        rep = de_equals_mc_for_huo(narrow.vector, spec, obs, shell)
        summary["de_mc_difference"] = rep.difference
        verdicts["de_equals_mc"] = _verdict(rep.difference <= cfg.tolerances["de_mc"])
    except PreconditionError as exc:
        verdicts["de_equals_mc"] = _skipped(f"not a HUO: {exc}")
    if abs(trace.mc_expectation) > 1e-12:
        rel = abs(late / trace.mc_expectation - 1)
        summary["late_average_relative_error"] = rel
        verdicts["time_average"] = _verdict(rel <= cfg.tolerances["time_average"])
    else:
        verdicts["time_average"] = _skipped("microcanonical value is zero; relative error undefined")
    write_json(stage.path(Path(primary).stem + "_summary.json"), summary)
    return verdicts, summary


def run_eth(cfg, stage):
    from .eth import (clt_residual_test, diagonal_constancy, eth_ansatz_summary, matrix_elements, offdiag_scaling,
                      phase_uniformity, sample_pairs, uncorrelated_factorization_check)
    from .hub import SpectrumAssignment, phase_table

    e = cfg.section("eth")
    dims = parse_dims(e["scan_dims"]) if e["scan_dims"] else []
    too_big = [d for d in dims if d > MAX_DIM]
    if too_big:
        raise ResourceError(f"scan dimensions {too_big} exceed the dense cap {MAX_DIM}")
    h, spec = _hamiltonian(cfg)
    obs = _observable(cfg, spec)
    table = matrix_elements(obs, spec)
    tol = cfg.tolerances
    diag = diagonal_constancy(table, obs)
    oaa = np.diag(table.values).real
    ref = obs.trace / spec.dim
    write_csv(stage.path("diagonal.csv"), ["alpha", "Oaa", "deviation"],
              ((a, oaa[a], abs(oaa[a] - ref)) for a in range(spec.dim)))
    a, b = sample_pairs(spec.dim, e["n_pairs"], derive_rng(cfg.seed, "eth-pairs"))
    v = table.values[a, b]
    write_csv(stage.path("offdiag.csv"), ["alpha", "beta", "re", "im", "Ebar", "omega"],
              zip(a, b, v.real, v.imag, table.ebar(a, b), table.omega(a, b)))
    verdicts = {"diagonal_constancy": _verdict(diag.max_deviation <= tol["diagonal"])}
    summary = {"dim": spec.dim, "diagonal_max_deviation": diag.max_deviation}

    unbiased = np.max(np.abs(np.abs(obs.basis.conj().T @ spec.vectors) ** 2 - 1 / spec.dim)) <= 1e-8
    if unbiased:
        pu = phase_uniformity(phase_table(obs, spec), sample_pairs(spec.dim, 100, derive_rng(cfg.seed, "eth-phase"), 0))
        summary["ks_pass_fraction"] = pu.pass_fraction
        verdicts["phase_uniformity"] = (_verdict(pu.pass_fraction >= tol["ks_fraction"]) if pu.asymptotic
                                        else _skipped("D < 64 is not asymptotic"))
        fac = uncorrelated_factorization_check(obs, spec, n_pairs=e["n_pairs"], seed=cfg.seed)
        summary.update(max_offdiag=fac.max_offdiag, uncorrelated_fraction=fac.uncorrelated_fraction)
        verdicts["uncorrelated_factorization"] = _verdict(fac.passed)
    else:
        verdicts["phase_uniformity"] = _skipped("observable is not a HUO")
        verdicts["uncorrelated_factorization"] = _skipped("observable is not a HUO")
    try:
        clt = clt_residual_test(table, obs, min(e["n_pairs"], spec.dim * (spec.dim - 1) // 2), cfg.seed)
    except ValidationError as exc:
        verdicts["clt_moments"] = _skipped(str(exc))
    else:
        summary["clt"] = {"mean": clt.mean, "variance": clt.variance, "kurtosis": clt.kurtosis, "reason": clt.reason}
        verdicts["clt_moments"] = _verdict(clt.passed) if clt.applicable and not clt.degenerate_data else _skipped(clt.reason)
    ans = eth_ansatz_summary(table, obs, n_pairs=e["n_pairs"], seed=cfg.seed)
    summary["ansatz"] = {"f1": ans.f1_bins, "residual_moments": list(ans.residual_moments),
                         "insufficient_statistics": ans.insufficient_statistics}
    if dims:
        mode = cfg.get("observable", "spectrum")
        fit = offdiag_scaling(dims, lambda d: SpectrumAssignment.parse(mode, d), seed=cfg.seed, n_pairs=e["n_pairs"])
        write_csv(stage.path("scaling.csv"), ["D", "std_re", "std_im"], zip(dims, fit.std_re, fit.std_im))
        summary["scaling"] = {"slope": fit.slope, "slope_ci": list(fit.slope_ci), "intercept": fit.intercept,
                              "degenerate_data": fit.degenerate_data}
        verdicts["scaling_slope"] = (_skipped("off-diagonals vanish") if fit.degenerate_data
                                     else _verdict(-0.6 <= fit.slope <= -0.4))
    summary["verdicts"] = verdicts
    write_json(stage.path("summary.json"), summary)
    return verdicts, summary


def run_acceptance(cfg, stage):
    from .acceptance import CHECKS, run_all

    sel = cfg.get("acceptance", "checks")
    numbers = None if sel in (None, "all") else [int(x) for x in sel.split(",")]
    if numbers and not set(numbers) <= {n for n, _, _ in CHECKS}:
        raise ValidationError(f"acceptance checks must be in 1..{len(CHECKS)}")
    results = run_all(numbers, cfg.seed)
    write_csv(stage.path("acceptance.csv"), ["criterion", "name", "verdict"],
              ((r.number, r.name, r.verdict) for r in results))
    verdicts = {f"{r.number:02d}_{r.name}": r.verdict for r in results}
    summary = {f"{r.number:02d}_{r.name}": {"message": r.message, "metrics": r.metrics, "seconds": r.seconds}
               for r in results}
    return verdicts, summary


RUNNERS = {"mub": run_mub, "huo": run_huo, "entropy": run_entropy, "maximize": run_maximize,
           "evolve": run_evolve, "eth": run_eth, "acceptance": run_acceptance}


def run(cfg: ExperimentConfig, write_record=True) -> RunRecord:
    """Execute ``cfg``; outputs appear in the output directory only if every stage succeeds."""
    t0 = time.perf_counter()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    kwargs = {}
    out_dir, record_name = Path(cfg.out), RECORD_NAME
    if cfg.kind in ("maximize", "evolve"):
        out_dir, kwargs["primary"] = _out_file(cfg, "eq.json" if cfg.kind == "maximize" else "trace.csv")
        record_name = Path(kwargs["primary"]).stem + ".run.json"
    stage = _Stage(out_dir)
    try:
        verdicts, summary = RUNNERS[cfg.kind](cfg, stage, **kwargs)
    except Exception as exc:
        stage.abort()
        raise StageError(cfg.kind, exc) from exc
    manifest = stage.commit()
    record = RunRecord(cfg.hash(), __version__, time.perf_counter() - t0, started, verdicts, manifest, out_dir,
                       {"config": cfg.canonical(), "results": summary})
    if write_record:
        write_json(out_dir / record_name, record.as_dict())
    return record


# --- golden comparison --------------------------------------------------------------------------


@dataclass(frozen=True)
class CellDiff:
    file: str
    row: int
    column: str
    expected: str
    actual: str

    def __str__(self):
        return f"{self.file}: row {self.row}, column {self.column!r}: expected {self.expected}, got {self.actual}"


@dataclass(frozen=True)
class GoldenReport:
    files: dict
    diffs: list

    @property
    def passed(self):
        return all(v == "pass" for v in self.files.values())


def _close(a, b, atol, rtol):
    try:
        x, y = float(a), float(b)
    except ValueError:
        return a == b
    if np.isnan(x) or np.isnan(y):
        return np.isnan(x) and np.isnan(y)
    return abs(x - y) <= atol + rtol * abs(y)


def compare_golden(run_or_dir, golden_dir, tolerances=None, atol=1e-10, rtol=1e-10) -> GoldenReport:
    """Compare every CSV of a run with the same-named file in ``golden_dir``.

    ``tolerances`` maps column names to absolute tolerances; other numeric columns
    use ``atol + rtol * |golden|``. A header or row-count mismatch raises
    :class:`SchemaError`.
    """
    golden_dir = Path(golden_dir)
    if not golden_dir.is_dir():
        raise ValidationError(f"golden directory not found: {golden_dir}")
    if isinstance(run_or_dir, RunRecord):
        out_dir, names = run_or_dir.out_dir, [n for n in run_or_dir.manifest if n.endswith(".csv")]
    else:
        out_dir = Path(run_or_dir)
        names = sorted(str(p.relative_to(out_dir)) for p in out_dir.rglob("*.csv"))
    tolerances = tolerances or {}
    files, diffs = {}, []
    for name in names:
        gold = golden_dir / name
        if not gold.exists():
            files[name] = "missing"
            continue
        h_run, rows_run = read_csv(out_dir / name)
        h_gold, rows_gold = read_csv(gold)
        if h_run != h_gold:
            raise SchemaError(f"{name}: columns {h_run} differ from golden {h_gold}")
        if len(rows_run) != len(rows_gold):
            raise SchemaError(f"{name}: {len(rows_run)} rows, golden has {len(rows_gold)}")
        before = len(diffs)
        for i, (r, g) in enumerate(zip(rows_run, rows_gold)):
            for col, x, y in zip(h_run, r, g):
                tol = tolerances.get(col)
                ok = _close(x, y, tol, 0.0) if tol is not None else _close(x, y, atol, rtol)
                if not ok:
                    diffs.append(CellDiff(name, i, col, y, x))
        files[name] = "pass" if len(diffs) == before else "fail"
    return GoldenReport(files, diffs)


__all__ = ["RunRecord", "run", "compare_golden", "GoldenReport", "CellDiff", "TOLERANCES"]
