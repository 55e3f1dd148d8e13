import csv
import json
import math

import pytest

from levygrad import cli
from levygrad.cli import ExperimentConfig, Result, main


def body(text):
    """CSV rows without the '#' header line."""
    lines = text.splitlines()
    assert lines[0].startswith("# levygrad")
    return list(csv.reader(lines[1:]))


def test_alpha_rows(capsys):
    assert main(["alpha", "--S", "power:1", "--t", "0.5,1,2"]) == 0
    rows = body(capsys.readouterr().out)
    assert rows[0] == ["t", "alpha"]
    for t, a in rows[1:]:
        assert float(a) == pytest.approx(math.sqrt(math.pi / float(t)), rel=1e-9)


def test_header_fields(capsys):
    main(["alpha", "--S", "power:0.5", "--seed", "7"])
    head = capsys.readouterr().out.splitlines()[0]
    assert "config_hash=" in head and "seed=7" in head and "time=" in head


def test_gradient_deterministic_across_threads(capsys):
    args = ["gradient", "--samples", "40000", "--t", "0.5", "--x=-1,0.5", "--seed", "11"]
    assert main(args + ["--threads", "1"]) == 0
    one = body(capsys.readouterr().out)
    assert main(args + ["--threads", "4"]) == 0
    four = body(capsys.readouterr().out)
    assert one == four
    estimators = {r[3] for r in one[1:]}
    assert estimators == {"derivative_formula[P_t^1]", "finite_difference[P_t^1]", "finite_difference[P_t]"}


def test_seed_changes_output(capsys):
    main(["gradient", "--samples", "1000", "--seed", "1", "--threads", "1"])
    a = body(capsys.readouterr().out)
    main(["gradient", "--samples", "1000", "--seed", "2", "--threads", "1"])
    b = body(capsys.readouterr().out)
    assert a != b


def test_shift_check(capsys):
    code = main(["shift-check", "--samples", "20000", "--functional", "1,sin,even", "--t", "1", "--threads", "1"])
    rows = body(capsys.readouterr().out)
    assert code in (0, 4)
    assert len(rows) == 4
    passed = [r[rows[0].index("passed")] for r in rows[1:]]
    assert code == (0 if all(p == "true" for p in passed) else 4)


def test_decomposition_small(capsys):
    code = main(["decomposition", "--samples", "500", "--n-in", "10", "--f", "cos", "--t", "0.5", "--threads", "1"])
    assert code in (0, 4)
    rows = body(capsys.readouterr().out)
    assert rows[0][:3] == ["t", "x", "lambda0_t"]


def test_bounds_and_rate_fit(capsys):
    assert main(["bounds", "--S", "power:0.75", "--t", "0.1,0.5,1"]) == 0
    rows = body(capsys.readouterr().out)
    assert len(rows) == 4
    assert main(["rate-fit", "--S", "log_power:1", "--t", "0.001,0.002,0.003,0.005,0.007,0.01"]) == 0
    err = capsys.readouterr().err
    slope = float(err.split("slope=")[1].split()[0])
    assert slope == pytest.approx(1.0, abs=0.2)


def test_perturb_json_and_manifest(tmp_path, capsys):
    out = tmp_path / "p.json"
    sigma = json.dumps({"kappa": {"kind": "constant", "value": 0.5}, "m": {"kind": "gaussian", "mean": 0, "std": 1}})
    code = main(["perturb", "--sigma", sigma, "--t", "0.5", "--x", "0", "--samples", "20000",
                 "--format", "json", "--out", str(out), "--threads", "1"])
    assert code in (0, 4)
    doc = json.loads(out.read_text())
    assert doc["experiment"] == "perturb" and "timestamp" not in doc
    man = json.loads((tmp_path / "p.json.manifest.json").read_text())
    assert man["config_hash"] == doc["config_hash"] and "timestamp" in man
    assert man["axes"] and man["columns"] == doc["columns"]


def test_oracle_compare(capsys):
    code = main(["oracle-compare", "--model", "gaussian", "--samples", "20000", "--x=-1,0,1", "--threads", "1"])
    rows = body(capsys.readouterr().out)
    assert code in (0, 4) and len(rows) == 4


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"S": "power:1", "t": [4.0], "seed": 3}))
    assert main(["alpha", "--config", str(cfg), "--t", "1"]) == 0
    rows = body(capsys.readouterr().out)
    assert rows[1][0] == "1" and float(rows[1][1]) == pytest.approx(math.sqrt(math.pi))


def test_model_file(tmp_path, capsys):
    from levygrad.catalog import named_model

    path = tmp_path / "m.json"
    path.write_text(json.dumps(named_model("gaussian-floor").to_config()))
    assert main(["gradient", "--model", str(path), "--samples", "200", "--threads", "1"]) == 0


@pytest.mark.parametrize("argv", [
    ["gradient", "--model", "/nonexistent/model.json"],
    ["gradient", "--samples", "50"],
    ["alpha", "--S", "power:1", "--t", "-1"],
    ["gradient", "--model", "no-such-model"],
    ["perturb", "--sigma", '{"kappa": {"kind": "cubic"}}'],
    ["alpha", "--config", "/nonexistent.json"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv + ["--threads", "1"]) == 2
    assert "config error" in capsys.readouterr().err


def test_numeric_error_exit_3(capsys):
    # the spectral oracle cannot treat a law with an atom
    code = main(["oracle-compare", "--model", "gaussian-floor", "--samples", "200", "--threads", "1"])
    assert code in (2, 3)


def test_statistical_failure_exit_4(monkeypatch, capsys):
    monkeypatch.setitem(cli.RUNNERS, "alpha", lambda cfg, streams: Result(["a"], [[1.0]], {}, {}, failures=1))
    assert cli.run(ExperimentConfig("alpha", S="power:1")) == 4


def test_config_hash_ignores_output_fields():
    a = ExperimentConfig("alpha", S="power:1", out="a.csv", threads=1).validate()
    b = ExperimentConfig("alpha", S="power:1", out=None, threads=8, format="json").validate()
    c = ExperimentConfig("alpha", S="power:1", seed=5).validate()
    assert a.config_hash() == b.config_hash() != c.config_hash()
