import json
import subprocess
import sys
import time

import numpy as np
import pytest

from beamlearn import checks
from beamlearn.cli import COMPARE_COLUMNS, main
from beamlearn.learner import METRIC_COLUMNS
from beamlearn.losses import LossResult, NeighborScoring, sort_perms

SMOKE = "m = 50\nlength = 4\nk = 2\nfeature_dim = 512\nvalid_every = 10\ncheckpoint_every = 20\nregret_every = 10\n"


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(SMOKE)
    return p


def test_missing_config_exits_2(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "beamlearn", "train", "--config", str(tmp_path / "absent.cfg")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert "usage" in proc.stderr


def test_train_smoke_writes_all_artifacts(cfg_path, tmp_path):
    out = tmp_path / "run"
    t0 = time.perf_counter()
    assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert time.perf_counter() - t0 < 10
    for name in ("metrics.csv", "final_model.bin", "last_model.bin", "cost_curve.csv",
                 "regret_curve.csv", "summary.json", "config.txt"):
        assert (out / name).is_file(), name
    assert len(list((out / "checkpoints").glob("theta_*.bin"))) == 2
    assert (out / "metrics.csv").read_text().splitlines()[0] == ",".join(METRIC_COLUMNS)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rounds"] == 40 and summary["regret_certified"]
    assert summary["stopreset_bound"] is None
    assert main(["evaluate", "--config", str(cfg_path), "--out", str(out)]) == 0
    ev = json.loads((out / "evaluation.json").read_text())
    assert ev["mean_terminal_cost"] == pytest.approx(summary["valid_terminal_cost"])


def test_reruns_are_byte_identical(cfg_path, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["train", "--config", str(cfg_path), "--out", str(out), "--preset", "laso_perceptron"]) == 0
    for name in ("metrics.csv", "final_model.bin", "summary.json", "cost_curve.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["stopreset_bound"] is not None
    assert "strategy = reset" in (outs[0] / "config.txt").read_text()


def test_seed_flag_changes_the_run(cfg_path, tmp_path):
    main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "b" / "metrics.csv").read_bytes()


def test_compare_writes_one_row_per_cell(cfg_path, tmp_path):
    out = tmp_path / "cmp"
    argv = ["compare", "--config", str(cfg_path), "--out", str(out),
            "--losses", "upper_bound,log_neighbors", "--strategies", "continue,stop"]
    assert main(argv) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    assert lines[0] == ",".join(COMPARE_COLUMNS) and len(lines) == 5
    assert main(["compare", "--config", str(cfg_path), "--out", str(out), "--preset", "dagger,bso"]) == 0
    rows = (out / "compare.csv").read_text().splitlines()[1:]
    assert rows[0].startswith("dagger,log_neighbors,continue,1,")


@pytest.mark.parametrize(
    "extra",
    [["--losses", ""], ["--losses", "nope"], ["--strategies", ""], ["--preset", "nope"], ["--strategies", "interp:3"]],
)
def test_compare_bad_lists_exit_2(cfg_path, tmp_path, extra):
    assert main(["compare", "--config", str(cfg_path), "--out", str(tmp_path)] + extra) == 2


def test_unknown_train_preset_is_a_usage_error(cfg_path):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--config", str(cfg_path), "--preset", "nope"])
    assert exc.value.code == 2


def test_evaluate_dimension_mismatch(cfg_path, tmp_path):
    model = tmp_path / "m.bin"
    from beamlearn.scoring import save_params

    save_params(model, np.zeros(3))
    assert main(["evaluate", "--config", str(cfg_path), "--out", str(tmp_path), "--model", str(model)]) == 2


def test_check_passes_in_under_a_minute(capsys):
    t0 = time.perf_counter()
    assert main(["check"]) == 0
    assert time.perf_counter() - t0 < 60
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def upper_bound_without_margin(ns: NeighborScoring) -> LossResult:
    p = sort_perms(ns)
    if ns.k >= ns.n:
        return LossResult(0.0, np.zeros(ns.n))
    top, rest = p.sigma_star[0], p.sigma_star[ns.k:]
    deltas = (ns.costs[rest] - ns.costs[top]) * (ns.scores[rest] - ns.scores[top])
    return LossResult(max(0.0, float(deltas.max())), np.zeros(ns.n))


def test_mutated_upper_bound_is_caught():
    res = checks.check_upper_bound(n_random=2000, loss=upper_bound_without_margin)
    assert not res.passed and "violation" in res.detail
