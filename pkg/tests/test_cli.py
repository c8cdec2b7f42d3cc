import json
import subprocess
import sys

import pytest

from fiberdim import cli


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return str(p)


def test_list_names_every_experiment(capsys):
    assert cli.main(["--list"]) == 0
    out = capsys.readouterr().out
    for name in cli.REGISTRY:
        assert name in out
    assert len(cli.REGISTRY) == 13


def test_missing_seed_is_a_config_error(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "perturbation-run", "params": {"a": [6, 6, 6]}})
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "seed" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize(
    "doc, key",
    [
        ({"experiment": "nope"}, "experiment"),
        ({"params": {}}, "experiment"),
        ({"experiment": "staircase", "params": {"depht": 3}}, "depht"),
        ({"experiment": "fat-cantor-build", "params": {"a": [2, "x"]}}, "a[1]"),
        ({"experiment": "fat-cantor-build", "params": {"a": [2], "epsilon": "one"}}, "epsilon"),
        ({"experiment": "staircase", "params": {"alpha": ["1/4", "1/5"]}}, "alpha"),
        ({"experiment": "sawtooth-witness", "params": {"h": {"family": "cubic"}}}, "h.family"),
    ],
)
def test_bad_configs_name_the_key(tmp_path, capsys, doc, key):
    cfg = write(tmp_path, doc)
    assert cli.main(["--validate", cfg]) == 2 or cli.main(["run", cfg, "--out", str(tmp_path)]) == 2
    assert key in capsys.readouterr().err


def test_unreadable_and_malformed_configs(tmp_path):
    assert cli.main(["--validate", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    assert cli.main(["--validate", str(bad)]) == 2


def test_usage_errors():
    assert cli.main([]) == 2
    assert cli.main(["run"]) == 2


def test_run_writes_three_files(tmp_path):
    cfg = write(tmp_path, {"experiment": "fat-cantor-build", "params": {"a": [2, 3, 2, 3], "epsilon": "1/4"}})
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["passed"] and res["experiment"] == "fat-cantor-build"
    assert "hypotheses" in res and len(res["digest"]) == 64
    csv = (out / "data.csv").read_bytes()
    assert b"\r" not in csv and csv.startswith(b"n,count,hull_length")
    assert b"3/8," in csv  # rationals as p/q
    assert (out / "plot.svg").read_text().lstrip().startswith("<?xml")
    assert not [p for p in out.iterdir() if p.name.startswith(".tmp")]


def test_triadic_config_reports_slope(tmp_path):
    cfg = write(tmp_path, {"experiment": "triadic-dim", "params": {"depth": 12, "k_lo": 3, "k_hi": 9}})
    assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["summary"]["slope"] == pytest.approx(0.631, abs=1e-3)


def test_failed_threshold_exits_one(tmp_path):
    cfg = write(tmp_path, {"experiment": "triadic-dim", "params": {"depth": 8, "k_lo": 2, "k_hi": 6, "target": 0.9}})
    assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 1


def test_mass_bound_records_ratio_condition(tmp_path):
    cfg = write(tmp_path, {"experiment": "mass-bound", "params": {"a": [16, 512], "b": [8, 256]}})
    assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["hypotheses"]["ratio_condition"] == [{"n": 1, "holds": True}]


@pytest.mark.parametrize("name", ["staircase", "gauge-schedule", "ultrametric-map", "indicatrix", "singleton-cone"])
def test_small_experiments_pass_with_defaults(tmp_path, name):
    cfg = write(tmp_path, {"experiment": name, "params": {}})
    assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 0


def test_same_config_same_digest(tmp_path, monkeypatch):
    cfg = write(tmp_path, {"experiment": "fiber-witness", "params": {"a": [6] * 6, "seeds": [1, 2, 3]}})
    name, params, _ = cli.load_config(cfg)
    d1 = cli.run_experiment(name, params)[1]["digest"]
    monkeypatch.setenv("NO_PARALLEL", "1")
    assert cli.run_experiment(name, params)[1]["digest"] == d1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fiberdim.cli", "--list"], capture_output=True, text=True)
    assert r.returncode == 0 and "graph-dim" in r.stdout
