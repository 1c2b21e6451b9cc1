"""Experiment configuration: INI files with section headers, validated against a fixed schema.

Every problem found is collected and reported together. Unknown sections or keys
name the nearest valid one.

Schema (section: key = type, default)::

    [experiment]  kind (required), seed = 0, out = results
    [model]       model (ising | xxz | random), n_sites, J = 1, h = 1, g = 0,
                  anisotropy = 1, dim, seed = 0
    [observable]  path, method = fourier, spectrum = degenerate:4,
                  arrangement = shuffled, seed = 0
    [shell]       e0, delta, min_levels = 3
    [state]       profile = uniform-phase-random, sigma, seed = 0
    [mub]         dim
    [entropy]     state, basis, manifest, bits = false
    [maximize]    energy, n_starts = 4
    [evolve]      tmin, tmax, n_times = 200
    [eth]         scan_dims, n_pairs = 10000
    [acceptance]  checks = all
    [tolerances]  any of TOLERANCES

Relative paths are resolved against the directory of the file that names them.
"""
from __future__ import annotations

import configparser
import difflib
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import MODELS
from .errors import ConfigError

KINDS = ("mub", "huo", "entropy", "maximize", "evolve", "eth", "acceptance")

TOLERANCES = {
    "unbiased": 1e-10,
    "diagonal": 1e-10,
    "de_mc": 1e-10,
    "uncertainty": 1e-10,
    "ee2": 1e-8,
    "linear_gap": 1e-6,
    "time_average": 0.05,
    "ks_fraction": 0.95,
}

_STR, _INT, _FLOAT, _BOOL, _PATH = "str", "int", "float", "bool", "path"

SCHEMA = {
    "experiment": {"kind": (_STR, None), "seed": (_INT, 0), "out": (_PATH, "results")},
    "model": {"model": (_STR, None), "n_sites": (_INT, None), "J": (_FLOAT, 1.0), "h": (_FLOAT, 1.0),
              "g": (_FLOAT, 0.0), "anisotropy": (_FLOAT, 1.0), "dim": (_INT, None), "seed": (_INT, 0)},
    "observable": {"path": (_PATH, None), "method": (_STR, "fourier"), "spectrum": (_STR, "degenerate:4"),
                   "arrangement": (_STR, "shuffled"), "seed": (_INT, 0)},
    "shell": {"e0": (_FLOAT, None), "delta": (_FLOAT, None), "min_levels": (_INT, 3)},
    "state": {"profile": (_STR, "uniform-phase-random"), "sigma": (_FLOAT, None), "seed": (_INT, 0)},
    "mub": {"dim": (_INT, None)},
    "entropy": {"state": (_PATH, None), "basis": (_PATH, None), "manifest": (_PATH, None), "bits": (_BOOL, False)},
    "maximize": {"energy": (_FLOAT, None), "n_starts": (_INT, 4)},
    "evolve": {"tmin": (_FLOAT, None), "tmax": (_FLOAT, None), "n_times": (_INT, 200)},
    "eth": {"scan_dims": (_STR, None), "n_pairs": (_INT, 10_000)},
    "acceptance": {"checks": (_STR, "all")},
    "tolerances": {name: (_FLOAT, value) for name, value in TOLERANCES.items()},
}

REQUIRED = {
    "mub": [("mub", "dim")],
    "huo": [("model", "model")],
    "entropy": [],
    "maximize": [("model", "model"), ("maximize", "energy")],
    "evolve": [("model", "model"), ("shell", "e0")],
    "eth": [("model", "model")],
    "acceptance": [],
}


def _suggest(name, options):
    close = difflib.get_close_matches(name, list(options), n=1, cutoff=0.5)
    return f"; did you mean {close[0]!r}?" if close else ""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    out: Path
    sections: dict = field(default_factory=dict)

    def section(self, name):
        """Values of ``name`` with schema defaults filled in."""
        return self.sections.get(name, {name_: d for name_, (_, d) in SCHEMA[name].items()})

    def get(self, section, key):
        return self.section(section).get(key)

    @property
    def tolerances(self):
        return self.section("tolerances")

    def has(self, section, key=None):
        if section not in self.sections:
            return False
        return key is None or self.sections[section].get(key) is not None

    def model_spec(self):
        m = self.section("model")
        spec = {"model": m["model"], "seed": m["seed"]}
        if m["model"] == "random":
            spec["dim"] = m["dim"]
        else:
            spec.update(n_sites=m["n_sites"], J=m["J"], h=m["h"])
            spec.update({"g": m["g"]} if m["model"] == "ising" else {"delta": m["anisotropy"]})
        return spec

    def canonical(self):
        """JSON-ready mapping used for hashing and the run record (paths as strings)."""
        return {"kind": self.kind, "seed": self.seed, "out": str(self.out),
                "sections": {s: {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(kv.items())}
                             for s, kv in sorted(self.sections.items())}}

    def hash(self):
        body = self.canonical()
        body.pop("out")
        body["sections"].get("experiment", {}).pop("out", None)  # where results go does not change them
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _convert(kind, raw, base):
    if kind == _INT:
        return int(raw, 0)
    if kind == _FLOAT:
        return float(raw)
    if kind == _BOOL:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == _PATH:
        p = Path(raw).expanduser()
        return p if p.is_absolute() or base is None else base / p
    return raw.strip()


def read_ini(path):
    """Raw ``{section: {key: (value, base_dir)}}`` from an INI file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (J vs j)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    base = path.parent
    return {s: {k: (v, base) for k, v in cp.items(s)} for s in cp.sections()}


def merge(*raws):
    out = {}
    for raw in raws:
        for s, kv in (raw or {}).items():
            out.setdefault(s, {}).update(kv)
    return out


def validate(raw) -> ExperimentConfig:
    """Convert a raw mapping into an :class:`ExperimentConfig` or raise one :class:`ConfigError`
    listing every problem."""
    problems = []
    sections = {}
    for s, kv in raw.items():
        if s not in SCHEMA:
            problems.append(f"unknown section [{s}]{_suggest(s, SCHEMA)}")
            continue
        vals = {k: d for k, (_, d) in SCHEMA[s].items()}
        for k, item in kv.items():
            value, base = item if isinstance(item, tuple) else (item, None)
            if k not in SCHEMA[s]:
                problems.append(f"unknown key {k!r} in [{s}]{_suggest(k, SCHEMA[s])}")
                continue
            try:
                vals[k] = _convert(SCHEMA[s][k][0], str(value), base)
            except ValueError as exc:
                problems.append(f"[{s}] {k}: {exc}")
        sections[s] = vals

    exp = sections.get("experiment", {})
    kind = exp.get("kind")
    if kind is None:
        problems.append("missing required field 'kind' in [experiment]")
    elif kind not in KINDS:
        problems.append(f"unknown experiment kind {kind!r}{_suggest(kind, KINDS)}")
    seed = exp.get("seed", 0)
    if seed is not None and not 0 <= seed < 2**64:
        problems.append("seed must be a 64-bit unsigned integer")
    for s in ("model", "observable", "state"):
        if s in sections and not 0 <= sections[s]["seed"] < 2**64:
            problems.append(f"[{s}] seed must be a 64-bit unsigned integer")

    if kind in REQUIRED:
        for s, k in REQUIRED[kind]:
            if sections.get(s, {}).get(k) is None:
                problems.append(f"missing required field {k!r} in [{s}] for kind {kind!r}")

    m = sections.get("model")
    if m and m.get("model") is not None:
        name = m["model"]
        if name not in MODELS:
            problems.append(f"unknown model {name!r}{_suggest(name, MODELS)}")
        elif name == "random" and m["dim"] is None:
            problems.append("missing required field 'dim' in [model] for the random model")
        elif name != "random" and m["n_sites"] is None:
            problems.append(f"missing required field 'n_sites' in [model] for the {name} model")
        for k in ("n_sites", "dim"):
            if m.get(k) is not None and m[k] < 1:
                problems.append(f"[model] {k} must be positive")
    sh = sections.get("shell", {})
    if sh.get("delta") is not None and sh["delta"] <= 0:
        problems.append("delta must be positive")
    if sections.get("mub", {}).get("dim") is not None and sections["mub"]["dim"] < 1:
        problems.append("[mub] dim must be positive")
    st = sections.get("state", {})
    if st.get("profile") not in (None, "uniform-phase-random", "gaussian"):
        problems.append(f"unknown state profile {st['profile']!r}{_suggest(st['profile'], ['uniform-phase-random', 'gaussian'])}")
    if st.get("profile") == "gaussian" and (st.get("sigma") is None or st["sigma"] <= 0):
        problems.append("gaussian profile needs a positive sigma")
    for k, v in sections.get("tolerances", {}).items():
        if v is not None and v <= 0:
            problems.append(f"tolerance {k!r} must be positive")
    ev = sections.get("evolve", {})
    if ev.get("tmax") is not None and ev["tmax"] <= 0:
        problems.append("[evolve] tmax must be positive")
    if ev.get("n_times") is not None and ev["n_times"] < 2:
        problems.append("[evolve] n_times must be at least 2")
    for s, k in (("observable", "path"), ("entropy", "state"), ("entropy", "basis"), ("entropy", "manifest")):
        p = sections.get(s, {}).get(k)
        if p is not None and not Path(p).exists():
            problems.append(f"[{s}] {k}: file not found: {p}")
    if kind == "entropy":
        e = sections.get("entropy", {})
        if e.get("manifest") is None and (e.get("state") is None or e.get("basis") is None):
            problems.append("entropy needs 'state' and 'basis', or a 'manifest', in [entropy]")
    if ed := sections.get("eth", {}).get("scan_dims"):
        try:
            parse_dims(ed)
        except ValueError as exc:
            problems.append(f"[eth] scan_dims: {exc}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(kind, int(seed), Path(exp.get("out") or "results"), sections)


def parse_dims(text):
    """``"64..2048"`` (powers of two in range) or a comma list ``"64,128,256"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(x) for x in text.split(".."))
        if lo < 1 or hi < lo:
            raise ValueError(f"bad range {text!r}")
        dims, d = [], 1
        while d <= hi:
            if d >= lo:
                dims.append(d)
            d *= 2
        if not dims:
            raise ValueError(f"no powers of two in {text!r}")
        return dims
    dims = [int(x) for x in text.split(",") if x.strip()]
    if not dims or min(dims) < 1:
        raise ValueError(f"bad dimension list {text!r}")
    return dims


def parse_config(path, overrides=None) -> ExperimentConfig:
    """Read, merge ``overrides`` (``{section: {key: value}}``) on top, and validate."""
    raw = read_ini(path) if path is not None else {}
    return validate(merge(raw, overrides))


def parse_config_text(text, overrides=None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([str(exc)]) from exc
    raw = {s: dict(cp.items(s)) for s in cp.sections()}
    return validate(merge(raw, overrides))
