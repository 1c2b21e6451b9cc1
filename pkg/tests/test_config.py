import pytest

from huolab.config import TOLERANCES, parse_config, parse_config_text, parse_dims
from huolab.errors import ConfigError


def test_minimal_mub_config_defaults():
    cfg = parse_config_text("[experiment]\nkind = mub\n[mub]\ndim = 4\n")
    assert cfg.kind == "mub" and cfg.seed == 0 and str(cfg.out) == "results"
    assert cfg.get("mub", "dim") == 4
    assert cfg.tolerances == TOLERANCES
    assert cfg.get("observable", "method") == "fourier"


def test_delta_zero_rejected():
    with pytest.raises(ConfigError) as e:
        parse_config_text("[experiment]\nkind = evolve\n[model]\nmodel = ising\nn_sites = 4\n[shell]\ne0 = 0\ndelta = 0\n")
    assert "delta must be positive" in e.value.problems


def test_unknown_model_suggests_ising():
    with pytest.raises(ConfigError) as e:
        parse_config_text("[experiment]\nkind = huo\n[model]\nmodel = ising3d\nn_sites = 4\n")
    assert any("'ising3d'" in p and "did you mean 'ising'" in p for p in e.value.problems)


def test_all_problems_reported_together():
    text = "[experiment]\nkind = evolve\nsed = 3\n[model]\nmodel = ising3d\nn_sites = 4\n[shell]\ne0 = 0\ndelta = 0\n[tolerances]\nee2 = -1\n"
    with pytest.raises(ConfigError) as e:
        parse_config_text(text)
    probs = e.value.problems
    assert any("unknown key 'sed'" in p and "'seed'" in p for p in probs)
    assert any("ising3d" in p for p in probs)
    assert "delta must be positive" in probs
    assert any("ee2" in p for p in probs)
    assert len(probs) >= 4


@pytest.mark.parametrize("text, needle", [
    ("[experiment]\nseed = 1\n", "missing required field 'kind'"),
    ("[experiment]\nkind = mub\n", "missing required field 'dim'"),
    ("[experiment]\nkind = mubs\n[mub]\ndim = 2\n", "did you mean 'mub'"),
    ("[experiment]\nkind = mub\nseed = -1\n[mub]\ndim = 2\n", "64-bit"),
    ("[experiment]\nkind = mub\n[mub]\ndim = two\n", "dim"),
    ("[experiment]\nkind = mub\n[mubb]\ndim = 2\n", "unknown section [mubb]"),
    ("[experiment]\nkind = huo\n[model]\nmodel = random\n", "'dim'"),
    ("[experiment]\nkind = eth\n[model]\nmodel = ising\nn_sites = 3\n[eth]\nscan_dims = 8..4\n", "scan_dims"),
    ("[experiment]\nkind = entropy\n", "manifest"),
    ("[experiment]\nkind = huo\n[model]\nmodel = ising\nn_sites = 3\n[observable]\npath = /nonexistent/o.d\n", "file not found"),
    ("[experiment]\nkind = evolve\n[model]\nmodel = ising\nn_sites = 3\n[shell]\ne0 = 0\n[state]\nprofile = gaussian\n", "sigma"),
])
def test_validation_messages(text, needle):
    with pytest.raises(ConfigError) as e:
        parse_config_text(text)
    assert any(needle in p for p in e.value.problems), e.value.problems


def test_file_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "s.dump").write_text("dim=1\n0 0 1 0\n")
    (tmp_path / "c.ini").write_text("[experiment]\nkind = entropy\nout = res\n[entropy]\nstate = sub/s.dump\nbasis = sub/s.dump\n")
    cfg = parse_config(tmp_path / "c.ini")
    assert cfg.get("entropy", "state") == tmp_path / "sub" / "s.dump"
    assert cfg.out == tmp_path / "res"


def test_overrides_and_hash(tmp_path):
    (tmp_path / "c.ini").write_text("[experiment]\nkind = mub\nseed = 5\n[mub]\ndim = 4\n")
    a = parse_config(tmp_path / "c.ini")
    b = parse_config(tmp_path / "c.ini", {"experiment": {"out": "elsewhere"}})
    c = parse_config(tmp_path / "c.ini", {"mub": {"dim": "8"}})
    assert a.hash() == b.hash() != c.hash()
    assert c.get("mub", "dim") == 8
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.ini")


def test_model_spec_mapping():
    cfg = parse_config_text("[experiment]\nkind = huo\n[model]\nmodel = xxz\nn_sites = 4\nanisotropy = 0.5\n")
    assert cfg.model_spec() == {"model": "xxz", "seed": 0, "n_sites": 4, "J": 1.0, "h": 1.0, "delta": 0.5}


def test_parse_dims():
    assert parse_dims("64..2048") == [64, 128, 256, 512, 1024, 2048]
    assert parse_dims("3..5") == [4]
    assert parse_dims("64, 100") == [64, 100]
    for bad in ("5..3", "", "0,4", "5..7"):
        with pytest.raises(ValueError):
            parse_dims(bad)
