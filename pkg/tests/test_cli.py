import csv
import io
import json
from pathlib import Path

import pytest

from potts_parisi.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_evaluate_zero_model(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {"D": 2, "betas": {}}, "evaluate": {"alpha": {"t": [0, 1], "m": [1]}}})
    code, out, _ = run(capsys, "evaluate", "--config", cfg)
    assert code == 0
    res = json.loads(out)
    assert res["value"] == 0.0 and set(res["terms"]) == {"phi0", "theta_term", "correction"}


def test_malformed_heights(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {"D": 2, "betas": {"2": 1}}, "evaluate": {"alpha": {"t": [0, 0.5, 1], "m": [0.9, 0.1]}}})
    code, out, err = run(capsys, "evaluate", "--config", cfg)
    assert code == 2 and "non-monotone heights" in err and out == ""


@pytest.mark.parametrize(
    "cfg",
    [
        {"model": {"D": 2, "betas": {"2": 1}}, "unknown": 1},
        {"model": {"D": 2, "betas": {"x": 1}}},
        {"model": {"D": 2}},
        {"model": {"D": 2, "betas": {"2": 1}}, "evaluate": {"alpha": {"t": [0, 1], "m": [1]}, "extra": True}},
    ],
)
def test_schema_rejects(tmp_path, capsys, cfg):
    code, _, err = run(capsys, "evaluate", "--config", write(tmp_path, cfg))
    assert code == 2 and "invalid config" in err


def test_missing_file_and_section(tmp_path, capsys):
    assert run(capsys, "evaluate", "--config", str(tmp_path / "nope.json"))[0] == 2
    code, _, err = run(capsys, "oracle", "--config", write(tmp_path, {"model": {"D": 2, "betas": {"2": 1}}}))
    assert code == 2 and "oracle" in err


def test_check_lemma_on_shipped_example(capsys):
    code, out, _ = run(capsys, "evaluate", "--config", str(CONFIGS / "evaluate_example.json"), "--check-lemma")
    assert code == 0
    res = json.loads(out)
    assert res["discrepancy"] <= 5e-4
    assert res["p_value"] == pytest.approx(res["value"], abs=5e-4)


def test_grid_failure_exit_one(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {"D": 2, "betas": {"2": 2}}, "evaluate": {"alpha": {"t": [0, 1], "m": [0.3]}}})
    code, _, err = run(capsys, "evaluate", "--config", cfg, "--grid-extent", "2", "--grid-points", "256")
    assert code == 1 and "grid underflow" in err


def test_verify_quadratic(capsys):
    code, out, _ = run(capsys, "verify", "--config", str(CONFIGS / "verify_quadratic.json"))
    assert code == 0
    res = json.loads(out)
    row = next(r for r in res["checks"] if r["name"] == "condition (1)")
    assert row["informational"] and row["detail"].startswith("fails (λ_u=0)")
    assert res["passed"]


def test_minimize_uniqueness_report_and_round_trip(tmp_path, capsys):
    cfg = {"model": {"D": 2, "betas": {"2": 2}}, "grid": {"points": 1024}, "minimize": {"k": 4, "starts": 10}}
    code, out, _ = run(capsys, "minimize", "--config", write(tmp_path, cfg))
    assert code == 0
    res = json.loads(out)
    rep = res["uniqueness"]
    assert len(rep["values"]) == 10 and rep["value_spread"] <= 1e-7
    ev = {"model": cfg["model"], "grid": cfg["grid"], "evaluate": {"alpha": res["alpha_star"]}}
    code, out, _ = run(capsys, "evaluate", "--config", write(tmp_path, ev, "ev.json"))
    # evaluate sees the merged (canonical) steps; equal up to grid error
    assert code == 0 and json.loads(out)["value"] == pytest.approx(res["value"], abs=1e-8)


def test_minimize_csv_trace(tmp_path, capsys):
    cfg = {"model": {"D": 2, "betas": {"2": 1.5}}, "grid": {"points": 512}, "minimize": {"k": 3}}
    out_path = tmp_path / "trace.csv"
    code, _, _ = run(capsys, "minimize", "--config", write(tmp_path, cfg), "--format", "csv", "--out", str(out_path))
    rows = list(csv.reader(out_path.open()))
    assert code == 0 and rows[0] == ["iteration", "value"] and len(rows) >= 2


def test_oracle_reproducible(capsys):
    argv = ("oracle", "--config", str(CONFIGS / "oracle_example.json"), "--seed", "11")
    a = json.loads(run(capsys, *argv)[1])
    b = json.loads(run(capsys, *argv)[1])
    assert a == b
    assert {"mean", "se", "replicas", "M", "seed"} <= set(a) and a["seed"] == 11
    assert abs(a["z_score"]) <= 4


def test_finite_n_csv(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {"D": 2, "betas": {"2": 0.2}}, "finite_n": {"N": [2, 3], "samples": 20}})
    code, out, _ = run(capsys, "finite-n", "--config", cfg, "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["N", "mean", "se", "samples", "seed"] and len(rows) == 3


def test_threads_validation(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {"D": 2, "betas": {}}, "evaluate": {"alpha": {"t": [0, 1], "m": [1]}}})
    assert run(capsys, "evaluate", "--config", cfg, "--threads", "0")[0] == 2
