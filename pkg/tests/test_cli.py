import json

import numpy as np
import pytest

from momentum_flow import io
from momentum_flow.cli import main


def _config(tmp_path, **sections):
    doc = {
        "train": {"iterations": 40, "log_every": 10},
        "model": {"width": 16},
        "dataset": {"n": 128},
        "reverse": {"n_samples": 100, "steps_per_subpath": 5},
        "verify": {"n_mc": 20_000, "n_posterior": 200_000},
    }
    for k, v in sections.items():
        doc.setdefault(k, {}).update(v)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


def test_verify_passes(tmp_path, capsys):
    assert main(["verify", "--config", str(_config(tmp_path)), "--out", str(tmp_path)]) == 0
    report = io.read_json(tmp_path / "verify_report.json")
    assert report["all_passed"]
    assert all(s["status"] == "PASS" for s in report["suites"])
    assert "FAIL" not in capsys.readouterr().out


def test_invalid_gamma_exits_nonzero(tmp_path, capsys):
    cfg = _config(tmp_path, schedule={"gamma": 1.5})
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "gamma" in capsys.readouterr().err


def test_malformed_config(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    assert main(["gen-data", "--config", str(p)]) == 2
    assert "bad.json:1:" in capsys.readouterr().err


def test_end_to_end(tmp_path, capsys):
    cfg = str(_config(tmp_path, eval={"metrics": ["sliced_w2", "energy_distance", "exact_w2", "knn_recall"]}))
    out = str(tmp_path / "run")
    assert main(["gen-data", "--config", cfg, "--out", out]) == 0
    data = tmp_path / "run" / "data.csv"
    assert len(io.read_points(data)) == 128
    assert io.read_json(io.sidecar_path(data))["config"]["dataset"]["n"] == 128

    assert main(["train", "--config", cfg, "--out", out, "--data", str(data)]) == 0
    model = tmp_path / "run" / "model.json"
    assert io.read_json(model)["meta"]["config"]["schedule"]["T"] == 2
    assert (tmp_path / "run" / "loss.csv").read_text().count("\n") == 5

    assert main(["sample", "--out", out, "--model", str(model), "--trajectories"]) == 0
    samples = tmp_path / "run" / "samples.csv"
    meta = io.read_json(io.sidecar_path(samples))
    assert meta["nfe"] == 2 * 25
    assert (tmp_path / "run" / "trajectories.csv").exists()

    # exact_w2 needs equal sizes: 128 data points vs 2000 default samples
    assert main(["eval", "--config", cfg, "--out", out, "--a", str(data), "--b", str(samples)]) == 2
    assert "equal sizes" in capsys.readouterr().err

    assert main(["sample", "--config", cfg, "--out", out, "--model", str(model), "--seed", "3"]) == 0
    samples = tmp_path / "run" / "samples.csv"
    assert len(io.read_points(samples)) == 100
    cfg_no_exact = str(_config(tmp_path, eval={"metrics": ["sliced_w2", "knn_recall"]}))
    assert main(["eval", "--config", cfg_no_exact, "--out", out, "--a", str(data), "--b", str(samples)]) == 0
    printed = capsys.readouterr().out
    assert "sliced_w2" in printed and "recall" in printed
    lines = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
    assert {json.loads(l)["metric"] for l in lines} == {"sliced_w2", "recall", "precision"}

    assert main(["profile", "--config", cfg, "--out", out, "--model", str(model), "--n", "500"]) == 0
    profile = io.read_json(tmp_path / "run" / "profile.json")["profile"]
    assert len(profile["forward_shared_v0"]) == 2 and len(profile["reverse"]) == 2


def test_seed_override_reproducible(tmp_path):
    cfg = str(_config(tmp_path))
    for name in ("a", "b"):
        assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / name), "--seed", "9"]) == 0
    np.testing.assert_array_equal(io.read_points(tmp_path / "a" / "data.csv").points,
                                  io.read_points(tmp_path / "b" / "data.csv").points)


def test_sample_missing_model(tmp_path, capsys):
    assert main(["sample", "--out", str(tmp_path), "--model", str(tmp_path / "none.json")]) == 2
    assert "none.json" in capsys.readouterr().err
    assert main(["sample", "--out", str(tmp_path)]) == 2


def test_sample_schedule_mismatch(tmp_path, capsys):
    cfg = str(_config(tmp_path))
    assert main(["train", "--config", cfg, "--out", str(tmp_path)]) == 0
    other = str(_config(tmp_path, schedule={"T": 3}))
    assert main(["sample", "--config", other, "--out", str(tmp_path), "--model", str(tmp_path / "model.json")]) == 2
    assert "trained with T=2" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["fly"])
