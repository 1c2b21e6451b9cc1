"""``huo-lab <kind> [--config path] [--seed u64] [--out dir] [--tol name=value ...]``.

Exit status: 0 when every check passes, 1 when any check fails or a stage
errors, 2 for usage or configuration errors. ``HUOLAB_THREADS`` sets the BLAS
thread count; every physics parameter is explicit.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

USAGE_EXIT, FAIL_EXIT = 2, 1


def _threads():
    n = os.environ.get("HUOLAB_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = n


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment configuration")
    common.add_argument("--seed", help="root seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory (or file for maximize/evolve)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="tolerance override")

    p = argparse.ArgumentParser(prog="huo-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="kind", required=True)

    s = sub.add_parser("mub", parents=[common], help="generate a complete MUB family")
    s.add_argument("--dim", help="dimension (prime or power of two)")

    s = sub.add_parser("huo", parents=[common], help="build a HUB and a HUO for a Hamiltonian")
    s.add_argument("--hamiltonian", help="INI file with a [model] section")
    s.add_argument("--method", help="fourier or mub:k")
    s.add_argument("--spectrum", help="nondegenerate, degenerate:D1 or custom:v*m,...")
    s.add_argument("--arrangement", choices=["shuffled", "contiguous"])

    s = sub.add_parser("entropy", parents=[common], help="Shannon entropy of a state measured in a basis")
    s.add_argument("--state", help="density-matrix dump")
    s.add_argument("--basis", help="basis dump (columns)")
    s.add_argument("--manifest", help="JSON list of {state, basis1, basis2} for batch mode")
    s.add_argument("--bits", action="store_true", help="report entropies in bits")

    s = sub.add_parser("maximize", parents=[common], help="maximize H_O at fixed mean energy")
    s.add_argument("--observable", help="observable directory written by 'huo'")
    s.add_argument("--hamiltonian")
    s.add_argument("--energy", help="target mean energy E0")
    s.add_argument("--delta", help="shell width for the microcanonical comparison")

    s = sub.add_parser("evolve", parents=[common], help="evolve a narrow-energy state and trace H_O(t)")
    s.add_argument("--hamiltonian")
    s.add_argument("--state", help="INI file with [state] and [shell] sections")
    s.add_argument("--observable")
    s.add_argument("--tmax")
    s.add_argument("--tmin")
    s.add_argument("--n-times", dest="n_times")

    s = sub.add_parser("eth", parents=[common], help="ETH statistics of an observable")
    s.add_argument("--observable")
    s.add_argument("--hamiltonian")
    s.add_argument("--scan-dims", dest="scan_dims", help="e.g. 64..2048 or 64,128,256")
    s.add_argument("--n-pairs", dest="n_pairs")

    s = sub.add_parser("acceptance", parents=[common], help="run the acceptance checks")
    s.add_argument("--checks", help="comma list of criterion numbers (default all)")
    return p


# flag -> (section, key)
FLAG_KEYS = {
    "seed": ("experiment", "seed"), "out": ("experiment", "out"), "dim": ("mub", "dim"),
    "method": ("observable", "method"), "spectrum": ("observable", "spectrum"),
    "arrangement": ("observable", "arrangement"), "observable": ("observable", "path"),
    "bits": ("entropy", "bits"), "manifest": ("entropy", "manifest"), "basis": ("entropy", "basis"),
    "energy": ("maximize", "energy"), "delta": ("shell", "delta"), "tmax": ("evolve", "tmax"),
    "tmin": ("evolve", "tmin"), "n_times": ("evolve", "n_times"), "scan_dims": ("eth", "scan_dims"),
    "n_pairs": ("eth", "n_pairs"), "checks": ("acceptance", "checks"),
}


def overrides_from_args(args):
    """Raw config sections from command-line flags; file-valued flags pull in their sections."""
    from pathlib import Path

    from .config import merge, read_ini
    from .errors import ConfigError

    cwd = Path.cwd()
    raw = {"experiment": {"kind": (args.kind, None)}}
    included = []
    if getattr(args, "hamiltonian", None):
        included.append({s: kv for s, kv in read_ini(args.hamiltonian).items() if s == "model"})
    if args.kind == "evolve" and args.state:
        included.append({s: kv for s, kv in read_ini(args.state).items() if s in ("state", "shell")})
    flags = {}
    for name, (section, key) in FLAG_KEYS.items():
        value = getattr(args, name, None)
        if value is None or value is False:
            continue
        if name == "state" and args.kind != "entropy":
            continue
        flags.setdefault(section, {})[key] = (str(value), cwd)
    if args.kind == "entropy" and args.state:
        flags.setdefault("entropy", {})["state"] = (args.state, cwd)
    problems = []
    for item in args.tol:
        name, sep, value = item.partition("=")
        if not sep:
            problems.append(f"--tol expects NAME=VALUE, got {item!r}")
            continue
        flags.setdefault("tolerances", {})[name.strip()] = (value.strip(), cwd)
    if problems:
        raise ConfigError(problems)
    return merge(*included, flags, raw)


def main(argv=None):
    _threads()
    parser = build_parser()
    args = parser.parse_args(argv)

    from .config import merge, read_ini, validate
    from .errors import ConfigError, HuoLabError, ResourceError, StageError, UnsupportedDimensionError, ValidationError
    from .runner import run

    try:
        base = read_ini(args.config) if args.config else {}
        cfg = validate(merge(base, overrides_from_args(args)))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"huo-lab: config error: {problem}", file=sys.stderr)
        return USAGE_EXIT
    try:
        record = run(cfg)
    except StageError as exc:
        print(f"huo-lab: {exc}", file=sys.stderr)
        usage = isinstance(exc.cause, (ValidationError, ResourceError, UnsupportedDimensionError, ConfigError))
        return USAGE_EXIT if usage else FAIL_EXIT
    except HuoLabError as exc:
        print(f"huo-lab: {exc}", file=sys.stderr)
        return FAIL_EXIT
    results = record.summary.get("results", {})
    if cfg.kind == "entropy" and "H" in results:
        print(json.dumps(results, sort_keys=True))
    if cfg.kind == "acceptance":
        for key, info in results.items():
            print(f"[{record.verdicts[key].upper()}] {key}: {info['message']}")
    for name, verdict in record.verdicts.items():
        if cfg.kind != "acceptance":
            print(f"{name}: {verdict}")
    print(f"outputs in {record.out_dir} ({len(record.manifest)} files, {record.wall_clock:.1f} s)")
    return 0 if record.passed else FAIL_EXIT


if __name__ == "__main__":
    sys.exit(main())
