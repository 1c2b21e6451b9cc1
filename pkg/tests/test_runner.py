import json
import shutil

import numpy as np
import pytest

from huolab import runner
from huolab.acceptance import CHECKS
from huolab.config import parse_config_text
from huolab.core import random_mixed_state, random_pure_state
from huolab.errors import ResourceError, SchemaError, StageError
from huolab.io import read_csv, write_matrix
from huolab.mub import generate_mub_family
from huolab.runner import compare_golden, run

ISING4 = "[model]\nmodel = ising\nn_sites = 4\nJ = 1.0\nh = 0.9045\ng = 0.809\n"


def cfg(text, out, **over):
    return parse_config_text(text, {"experiment": {"out": str(out)}, **over})


def csv_bodies(record):
    return {n: (record.out_dir / n).read_bytes() for n in record.manifest if n.endswith(".csv")}


def entropy_inputs(tmp_path):
    fam = generate_mub_family(4)
    write_matrix(tmp_path / "b1.dump", fam.basis(0))
    write_matrix(tmp_path / "b2.dump", fam.basis(2))
    rng = np.random.default_rng(0)
    trials = []
    for k in range(5):
        psi = random_pure_state(4, rng).vector
        write_matrix(tmp_path / f"s{k}.dump", np.outer(psi, psi.conj()))
        trials.append({"state": f"s{k}.dump", "basis1": "b1.dump", "basis2": "b2.dump"})
    write_matrix(tmp_path / "mixed.dump", random_mixed_state(4, rng=rng).density_matrix())
    (tmp_path / "manifest.json").write_text(json.dumps(trials))


KINDS = {
    "mub": "[experiment]\nkind = mub\nseed = 3\n[mub]\ndim = 8\n",
    "huo": "[experiment]\nkind = huo\n" + ISING4,
    "maximize": "[experiment]\nkind = maximize\n" + ISING4 + "[maximize]\nenergy = -2.0\n[shell]\ndelta = 4.0\n",
    "evolve": "[experiment]\nkind = evolve\n" + ISING4 + "[shell]\ne0 = 0.0\ndelta = 2.0\n[evolve]\nn_times = 40\n",
    "eth": "[experiment]\nkind = eth\nseed = 1\n" + ISING4 + "[eth]\nscan_dims = 16..128\nn_pairs = 500\n",
}


@pytest.mark.parametrize("kind", sorted(KINDS))
def test_determinism(kind, tmp_path):
    r1 = run(cfg(KINDS[kind], tmp_path / "a"))
    r2 = run(cfg(KINDS[kind], tmp_path / "b"))
    assert r1.manifest == r2.manifest
    assert csv_bodies(r1) == csv_bodies(r2)
    assert r1.config_hash == r2.config_hash
    for name, digest in r1.manifest.items():
        assert runner.sha256_file(r1.out_dir / name) == digest
    assert all(v in ("pass", "fail") or v.startswith("skipped(") for v in r1.verdicts.values())
    assert (r1.out_dir / (runner.RECORD_NAME if kind not in ("maximize", "evolve") else
                          ("eq" if kind == "maximize" else "trace") + ".run.json")).exists()


def test_entropy_kinds(tmp_path):
    entropy_inputs(tmp_path)
    single = f"[experiment]\nkind = entropy\n[entropy]\nstate = {tmp_path}/mixed.dump\nbasis = {tmp_path}/b1.dump\nbits = true\n"
    run(cfg(single, tmp_path / "one"))
    rec = json.loads((tmp_path / "one" / "entropy.json").read_text())
    assert rec["units"] == "bits" and rec["dim"] == 4 and 0 <= rec["H"] <= 2
    batch = f"[experiment]\nkind = entropy\n[entropy]\nmanifest = {tmp_path}/manifest.json\n"
    r1, r2 = run(cfg(batch, tmp_path / "x")), run(cfg(batch, tmp_path / "y"))
    assert r1.verdicts == {"uncertainty_bound": "pass"}
    header, rows = read_csv(tmp_path / "x" / "entropy.csv")
    assert header == ["trial", "H1", "H2", "slack"] and len(rows) == 5
    assert csv_bodies(r1) == csv_bodies(r2)


def test_output_schemas(tmp_path):
    r = run(cfg(KINDS["eth"], tmp_path / "eth"))
    assert read_csv(tmp_path / "eth" / "diagonal.csv")[0] == ["alpha", "Oaa", "deviation"]
    assert read_csv(tmp_path / "eth" / "offdiag.csv")[0] == ["alpha", "beta", "re", "im", "Ebar", "omega"]
    assert read_csv(tmp_path / "eth" / "scaling.csv")[0] == ["D", "std_re", "std_im"]
    summary = json.loads((tmp_path / "eth" / "summary.json").read_text())
    assert "slope" in summary["scaling"] and summary["verdicts"] == r.verdicts
    run(cfg(KINDS["huo"], tmp_path / "huo"))
    header, rows = read_csv(tmp_path / "huo" / "phases.csv")
    assert header == ["j", "s", "alpha", "theta"] and len(rows) == 256
    run(cfg(KINDS["evolve"], tmp_path / "ev" / "trace.csv"))
    assert read_csv(tmp_path / "ev" / "trace.csv")[0] == ["t", "expectation", "entropy", "tv_distance"]
    run(cfg(KINDS["maximize"], tmp_path / "mx" / "eq.json"))
    assert read_csv(tmp_path / "mx" / "eq_distribution.csv")[0] == ["lambda", "p"]
    eq = json.loads((tmp_path / "mx" / "eq.json").read_text())
    assert {"entropy", "lambda_n", "lambda_e", "ee1_max", "ee2_max", "linear_relation_gap"} <= set(eq)


def test_observable_reuse(tmp_path):
    run(cfg(KINDS["huo"], tmp_path / "huo"))
    text = KINDS["eth"].replace("[eth]", f"[observable]\npath = {tmp_path}/huo\n[eth]")
    r = run(cfg(text, tmp_path / "eth"))
    assert r.verdicts["diagonal_constancy"] == "pass"


def test_failed_stage_leaves_no_partial_outputs(tmp_path, monkeypatch):
    def broken(c, stage):
        runner.write_csv(stage.path("half.csv"), ["a"], [(1,)])
        raise RuntimeError("interrupted")

    monkeypatch.setitem(runner.RUNNERS, "mub", broken)
    out = tmp_path / "out"
    with pytest.raises(StageError) as e:
        run(cfg(KINDS["mub"], out))
    assert e.value.stage == "mub" and "interrupted" in str(e.value)
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_resource_error_before_allocation(tmp_path):
    text = "[experiment]\nkind = eth\n" + ISING4 + "[eth]\nscan_dims = 64..8192\n"
    with pytest.raises(StageError) as e:
        run(cfg(text, tmp_path / "big"))
    assert isinstance(e.value.cause, ResourceError)
    text = "[experiment]\nkind = huo\n[model]\nmodel = ising\nn_sites = 13\n"
    with pytest.raises(StageError) as e:
        run(cfg(text, tmp_path / "big"))
    assert isinstance(e.value.cause, ResourceError)
    assert not (tmp_path / "big").exists()


def test_acceptance_record_has_one_verdict_per_check(tmp_path):
    assert [n for n, _, _ in CHECKS] == list(range(1, 13))
    assert len({name for _, name, _ in CHECKS}) == 12
    r = run(cfg("[experiment]\nkind = acceptance\n[acceptance]\nchecks = 1,10,12\n", tmp_path / "acc"))
    assert sorted(r.verdicts) == ["01_mub_family_completeness", "10_gibbs_identity", "12_negative_controls"]
    assert r.passed
    header, rows = read_csv(tmp_path / "acc" / "acceptance.csv")
    assert header == ["criterion", "name", "verdict"] and [row[0] for row in rows] == ["1", "10", "12"]


def test_compare_golden(tmp_path):
    r = run(cfg(KINDS["eth"], tmp_path / "run"))
    shutil.copytree(tmp_path / "run", tmp_path / "gold")
    rep = compare_golden(r, tmp_path / "gold")
    assert rep.passed and rep.diffs == []

    # rounding-level noise passes
    header, rows = read_csv(tmp_path / "gold" / "scaling.csv")
    rows[1][1] = "%.17e" % (float(rows[1][1]) + 1e-13)
    runner.write_csv(tmp_path / "gold" / "scaling.csv", header, [[float(x) for x in row] for row in rows])
    assert compare_golden(tmp_path / "run", tmp_path / "gold").passed

    # one perturbed cell is reported by row and column
    rows[2][2] = "%.17e" % (float(rows[2][2]) * 1.01)
    (tmp_path / "gold" / "scaling.csv").write_text(",".join(header) + "\n" + "\n".join(",".join(r) for r in rows) + "\n")
    rep = compare_golden(tmp_path / "run", tmp_path / "gold")
    assert rep.files["scaling.csv"] == "fail" and len(rep.diffs) == 1
    d = rep.diffs[0]
    assert (d.file, d.row, d.column) == ("scaling.csv", 2, "std_im")
    # a per-column tolerance can admit it
    assert compare_golden(tmp_path / "run", tmp_path / "gold", {"std_im": 1.0}).passed

    # schema drift
    (tmp_path / "gold" / "diagonal.csv").write_text("alpha,O_aa,deviation\n")
    with pytest.raises(SchemaError):
        compare_golden(tmp_path / "run", tmp_path / "gold")
