"""Command-line driver: file formats, artifact contracts, reproducibility."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from conefluct import MatrixLaw
from conefluct.cli import LawFormatError, law_fingerprint, load_config, load_law, main, save_law
from conefluct.fixtures import reference_law_text


@pytest.fixture(scope="module")
def law_path(tmp_path_factory) -> Path:
    p = tmp_path_factory.mktemp("law") / "reference_law.json"
    p.write_text(reference_law_text(), encoding="utf-8")
    return p


@pytest.fixture(scope="module")
def config_path(tmp_path_factory, law_path) -> Path:
    cfg = {
        "law": str(law_path),
        "seed": 20240907,
        "grid": {"resolution": 128},
        "simulate": {
            "n_values": [16, 32, 64, 128, 256],
            "paths": 20000,
            "v_schedule": [16, 32, 64, 128],
            "v_paths": 20000,
            "a_paths": 4000,
            "conditional_n": [16, 64, 256],
            "conditional_paths": 30000,
            "sigma2_n": 512,
            "sigma2_paths": 10000,
        },
        "covariance": {"paths": 30000, "max_lag": 3},
        "validate": {"martingale_paths": 500, "martingale_horizon": 128},
        "thresholds": {"ks_threshold": 0.08, "min_survivors": 100},
    }
    p = tmp_path_factory.mktemp("cfg") / "config.json"
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return p


# ---------------------------------------------------------------------------
# law files


def test_law_round_trip(tmp_path, ref_law):
    p = tmp_path / "law.json"
    save_law(ref_law, p, metadata={"note": "round trip"})
    loaded, meta = load_law(p)
    assert isinstance(loaded, MatrixLaw)
    assert meta == {"note": "round trip"}
    assert np.array_equal(loaded.weights, ref_law.weights)
    for a, b in zip(loaded.atoms, ref_law.atoms):
        assert np.array_equal(a.entries, b.entries)
    assert law_fingerprint(loaded) == law_fingerprint(ref_law)


def test_fingerprint_ignores_metadata_but_not_entries(tmp_path, ref_law):
    base = law_fingerprint(ref_law)
    scaled = MatrixLaw.from_entries([g.entries * 1.000001 for g in ref_law.atoms], ref_law.weights)
    assert law_fingerprint(scaled) != base


@pytest.mark.parametrize(
    "payload, field",
    [
        ("not json {", "valid JSON"),
        ('{"dim": 2, "atoms": [[[1, 1], [1, 1]]]}', "weights"),
        ('{"dim": 2, "weights": [1.0]}', "atoms"),
        ('{"atoms": [[[1, 1], [1, 1]]], "weights": [1.0]}', "dim"),
        ('{"dim": 2, "atoms": [[[1, 1], [1, 1]]], "weights": [1.0], "extra": 1}', "unknown"),
        ('{"dim": 3, "atoms": [[[1, 1], [1, 1]]], "weights": [1.0]}', "shape"),
        ('{"dim": 2, "atoms": [[[1, 1], [1, 1]]], "weights": [0.5]}', "sum to 1"),
        ('{"dim": 2, "atoms": [[[1, -1], [1, 1]]], "weights": [1.0]}', "negative"),
    ],
)
def test_law_parse_errors(tmp_path, payload, field):
    p = tmp_path / "bad.json"
    p.write_text(payload, encoding="utf-8")
    with pytest.raises(LawFormatError, match=field):
        load_law(p)


def test_law_missing_file(tmp_path):
    with pytest.raises(LawFormatError, match="cannot read"):
        load_law(tmp_path / "nope.json")


# ---------------------------------------------------------------------------
# config assembly


def test_config_requires_seed(tmp_path, law_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"law": str(law_path)}), encoding="utf-8")
    with pytest.raises(LawFormatError, match="wall-clock"):
        load_config(p)


def test_config_rejects_unknown_keys(tmp_path, law_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"law": str(law_path), "seed": 1, "simulate": {"pathz": 7}}), encoding="utf-8")
    with pytest.raises(LawFormatError, match="pathz"):
        load_config(p)


def test_config_precedence(tmp_path, law_path, monkeypatch):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"law": str(law_path), "seed": 1, "workers": 2}), encoding="utf-8")
    cfg = load_config(p)
    assert cfg["seed"] == 1 and cfg["workers"] == 2
    monkeypatch.setenv("CONEFLUCT_SEED", "5")
    monkeypatch.setenv("CONEFLUCT_WORKERS", "3")
    cfg = load_config(p)
    assert cfg["seed"] == 5 and cfg["workers"] == 3
    cfg = load_config(p, overrides={"seed": 9})
    assert cfg["seed"] == 9 and cfg["workers"] == 3


# ---------------------------------------------------------------------------
# subcommands


def test_check_passes_on_reference_law(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["check", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    assert "all pass" in capsys.readouterr().out
    payload = json.loads((out / "hypotheses.json").read_text())
    assert payload["passed"] is True
    assert payload["report"]["p3_n0"] == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "check"
    assert sorted(manifest) == [
        "artifacts", "command", "config_sha256", "law_fingerprint", "seed", "versions",
    ]


def test_check_fails_on_drifting_law(tmp_path):
    law = MatrixLaw.from_entries([np.eye(2) * 0.5], np.array([1.0]))
    law_file = tmp_path / "law.json"
    save_law(law, law_file)
    out = tmp_path / "out"
    code = main(["check", "--law", str(law_file), "--seed", "3", "--out", str(out)])
    assert code == 1
    payload = json.loads((out / "hypotheses.json").read_text())
    assert payload["passed"] is False
    assert any("drift" in f for f in payload["failures"])


def test_spectral_artifacts(config_path, tmp_path):
    out = tmp_path / "out"
    code = main(["spectral", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "spectral.json").read_text())
    assert abs(summary["gamma"]) < 1e-6
    assert summary["sigma2"] == pytest.approx(0.1747, abs=0.002)
    assert summary["A"] > 0.0
    with open(out / "nu.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["param", "weight"]
    assert len(rows) - 1 == summary["grid_resolution"]
    weights = np.array([float(r[1]) for r in rows[1:]])
    assert weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_spectral_refuses_higher_dimension(tmp_path, capsys):
    law = MatrixLaw.from_entries([np.eye(3) + 1.0], np.array([1.0]))
    law_file = tmp_path / "law3.json"
    save_law(law, law_file)
    code = main(["spectral", "--law", str(law_file), "--seed", "3", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "Monte Carlo" in capsys.readouterr().err


def test_simulate_artifacts_and_rerun_identical(config_path, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["simulate", "--config", str(config_path), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(config_path), "--out", str(out2), "--workers", "3"]) == 0
    names = ["survival.csv", "v_curve.csv", "v_table.csv", "conditional.csv", "simulate.json", "manifest.json"]
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert sorted(manifest["artifacts"]) == sorted(names)
    with open(out1 / "survival.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "p_hat", "ci_half_width", "survivors"]
    p_vals = [float(r[1]) for r in rows[1:]]
    assert all(b <= a for a, b in zip(p_vals, p_vals[1:]))


def test_out_dir_protection(config_path, tmp_path, capsys):
    out = tmp_path / "busy"
    out.mkdir()
    (out / "keep.txt").write_text("data")
    code = main(["covariance", "--config", str(config_path), "--out", str(out)])
    assert code == 2
    assert "--force" in capsys.readouterr().err
    code = main(["covariance", "--config", str(config_path), "--out", str(out), "--force"])
    assert code == 0
    assert (out / "covariance.json").exists()


def test_covariance_artifacts(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["covariance", "--config", str(config_path), "--out", str(out)]) == 0
    payload = json.loads((out / "covariance.json").read_text())
    assert payload["burn_in"] == 50
    assert payload["convolution_rate"]["value"] < 0.3
    with open(out / "covariance.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["lag", "cov", "stderr", "in_fit_window"]
    assert len(rows) - 1 == 4  # lags 0..3
    assert float(rows[1][1]) > 0.0


def test_validate_passes_and_reports(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["validate", "--config", str(config_path), "--out", str(out)])
    text = capsys.readouterr().out
    assert code == 0, text
    payload = json.loads((out / "report.json").read_text())
    verdicts = payload["verdicts"]
    assert verdicts["exit_asymptotics"] and verdicts["conditional_law"] and verdicts["v_properties"]
    assert "negative_control" not in verdicts
    assert payload["report"]["sigma2"]["relative_gap"] < 0.2
    assert payload["diagnostics"]["martingale_gap"] <= payload["diagnostics"]["A"]
    for name in ("ratio_table.csv", "ks_table.csv", "v_table.csv"):
        assert (out / name).exists()
    assert "PASS exit_asymptotics" in text


def test_validate_negative_control(config_path, tmp_path):
    out = tmp_path / "out"
    code = main([
        "validate", "--config", str(config_path), "--out", str(out), "--sigma-scale", "2.0",
    ])
    assert code == 0
    payload = json.loads((out / "report.json").read_text())
    control = payload["report"]["negative_control"]
    assert control["pass"] is True
    assert control["final_ks"] > 0.15
    assert payload["report"]["conditional_section"] is None
    assert payload["verdicts"]["negative_control"] is True


def test_cli_error_paths(tmp_path, capsys):
    assert main(["check", "--law", str(tmp_path / "missing.json"), "--seed", "1", "--out", str(tmp_path / "o")]) == 2
    assert "cannot read" in capsys.readouterr().err
    assert main(["check", "--out", str(tmp_path / "o2")]) == 2
    assert "law" in capsys.readouterr().err
