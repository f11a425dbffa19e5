import csv
import json

import pytest

from stochcoll.cli import main, validate_moments
from stochcoll.config import bundled_scenario


def test_run_exp1_writes_outputs(tmp_path, capsys):
    out = tmp_path / "exp1"
    assert main(["run", "--config", "exp1", "--out", str(out), "--draws", "20"]) == 0
    stdout = capsys.readouterr().out.splitlines()
    assert stdout[0].startswith("method,collision_prob_pct")
    for name in ("metrics.csv", "ensembles.csv", "criterion_trace.csv", "auction_log.jsonl", "run_report.json"):
        assert (out / name).exists()
    with open(out / "criterion_trace.csv") as fh:
        assert next(csv.reader(fh)) == ["phase", "agent", "t", "gamma"]
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["NONE", "AUC-WAIT"]
    assert float(rows[1]["collision_prob_pct"]) == 0
    log = [json.loads(line) for line in (out / "auction_log.jsonl").read_text().splitlines()]
    assert log and {"round", "participants", "bids", "winner", "t_coll"} <= set(log[0])
    report = json.loads((out / "run_report.json").read_text())
    assert report["resolved"] and report["method"] == "AUC-WAIT"


def test_run_with_overrides(tmp_path):
    out = tmp_path / "fp"
    assert main(["run", "--config", "exp1", "--out", str(out), "--protocol", "fp", "--criterion", "cheb",
                 "--draws", "5", "--dt", "0.002", "--seed", "3"]) == 0
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert rows[1]["method"] == "FP-WAIT"


def test_unresolved_exit_code(tmp_path):
    cfg = tmp_path / "tight.yaml"
    raw = bundled_scenario("exp1").read_text().replace("max_rounds: 50", "max_rounds: 1")
    raw = raw.replace("protocol: auc", "protocol: fp")
    cfg.write_text(raw)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--draws", "2"]) == 2


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nhorizon: [0, 1]\nagents: []\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "agents" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", "exp1"])
    assert exc.value.code == 1


def test_detect_fig1(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["detect", "--fig1", "--out", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "verdict=non_positive_found" in out and "evaluations=" in out
    assert trace.read_text().startswith("t,value,floor")


def test_detect_config(capsys):
    assert main(["detect", "--config", "exp1", "--agent", "2"]) == 0
    assert "agent=2 flag=1" in capsys.readouterr().out


def test_confidence(capsys):
    assert main(["confidence", "--prior", "0:0.5,1:0.1,2:0.4", "--theta", "0.99"]) == 0
    assert "k=40" in capsys.readouterr().out
    assert main(["confidence", "--prior", "0:0.5,1:0.1,2:0.4", "--k", "10"]) == 0
    assert "miss_probability=0.04" in capsys.readouterr().out


def test_confidence_unreachable(capsys):
    assert main(["confidence", "--prior", "2:1.0", "--theta", "0.99999999999990"]) == 1
    assert "best" in capsys.readouterr().err


def test_validate_moments_passes(capsys):
    assert main(["validate-moments", "--draws", "20000"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 2
    rows = validate_moments(draws=20_000)
    assert rows[0][1] == pytest.approx(0.63212, abs=1e-5)
    assert rows[1][1] == pytest.approx(0.086466, abs=1e-6)


def test_plots_rendered(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "p"
    assert main(["run", "--config", "exp1", "--out", str(out), "--draws", "5", "--plots"]) == 0
    assert sorted(p.name for p in out.glob("*.png"))
