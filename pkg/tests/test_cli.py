import numpy as np
import pandas as pd
import pytest

from dynmediation.config import AnalysisMode
from dynmediation.harness.cli import CliHandlers, build_parser, config_from_args, main


def _write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_every_mode_has_a_handler():
    for mode in AnalysisMode:
        assert callable(getattr(CliHandlers, mode.get_handler_name()))


def test_flags_override_config_file(tmp_path):
    config = _write_config(tmp_path, "n = 50\nT = 4\nseed = 9\n")
    args = build_parser().parse_args(["simulate", "--config", str(config), "--n", "80"])
    cfg = config_from_args(args)
    assert (cfg.sim.n, cfg.sim.T, cfg.seed) == (80, 4, 9)
    assert cfg.mode is AnalysisMode.SIMULATE


def test_simulate_then_estimate(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out), "--n", "200", "--T", "3", "--seed", "1"]) == 0
    panel = pd.read_csv(out / "panel.csv")
    assert len(panel) == 600
    assert list(panel.columns) == ["id", "t", "A", "M1", "M2", "M3", "R"]
    assert len(pd.read_csv(out / "truth.csv")) == 9

    est = tmp_path / "est"
    assert main(["estimate-finite", "--input", str(out / "panel.csv"), "--out", str(est)]) == 0
    report = pd.read_csv(est / "report.csv")
    assert report["mediator"].tolist() == [1, 2, 3] * 3
    assert report["se_eta"].isna().all()


def test_estimate_infinite_from_simulated_panel(tmp_path):
    out = tmp_path / "sim"
    args = ["--out", str(out), "--n", "100", "--T", "40", "--horizon", "infinite", "--seed", "2"]
    assert main(["simulate", *args]) == 0
    est = tmp_path / "est"
    assert main(["estimate-infinite", "--input", str(out / "panel.csv"), "--out", str(est)]) == 0
    report = pd.read_csv(est / "report.csv")
    assert len(report) == 3
    assert report["t"].unique().tolist() == [1]


def test_ragged_input_exits_with_validation_code(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("id,t,A,M1,R\n1,1,0,0.1,1\n1,2,1,0.2,2\n2,1,0,0.3,3\n")
    assert main(["estimate-finite", "--input", str(path), "--out", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out" / "report.csv").exists()


def test_missing_input_is_a_config_error(tmp_path):
    assert main(["estimate-finite", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "absent.toml")]) == 2


def test_constant_mediator_exits_with_numerical_code(tmp_path):
    rng = np.random.default_rng(0)
    n, T = 40, 2
    frame = pd.DataFrame({
        "id": np.repeat(np.arange(n), T),
        "t": np.tile([1, 2], n),
        "A": rng.integers(0, 2, n * T),
        "M1": 1.0,
        "R": rng.normal(size=n * T),
    })
    path = tmp_path / "constant.csv"
    frame.to_csv(path, index=False)
    assert main(["estimate-finite", "--input", str(path), "--out", str(tmp_path / "out")]) == 3


def test_oracle_writes_truth(tmp_path):
    assert main(["oracle", "--out", str(tmp_path), "--T", "5", "--d", "2"]) == 0
    truth = pd.read_csv(tmp_path / "oracle.csv")
    assert len(truth) == 10
    assert truth["mediator"].tolist() == [1, 2] * 5


def test_benchmark_without_replications_is_a_config_error(tmp_path):
    assert main(["benchmark", "--reps", "0", "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "benchmark.csv").exists()


@pytest.mark.parametrize("threads", ["1", "2"])
def test_benchmark_is_reproducible(tmp_path, threads):
    config = _write_config(
        tmp_path,
        'n_values = [60]\nT_values = [2]\nreps = 2\nmethods = ["proposed"]\nknown_order = [0, 1, 2]\n',
    )
    runs = []
    for label in ("a", "b"):
        out = tmp_path / label
        args = ["benchmark", "--config", str(config), "--out", str(out), "--seed", "4", "--threads", threads]
        assert main(args) == 0
        runs.append((out / "benchmark.csv").read_bytes())
    assert runs[0] == runs[1]
    assert len(pd.read_csv(tmp_path / "a" / "benchmark.csv")) == 3


def test_analyze_writes_outputs(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out), "--n", "200", "--T", "6", "--d", "2", "--seed", "3"]) == 0
    result = tmp_path / "analysis"
    args = ["analyze", "--input", str(out / "panel.csv"), "--out", str(result), "--spline-df", "4", "--standardize"]
    assert main(args) == 0
    assert {p.name for p in result.iterdir()} == {"report.csv", "trajectories.csv", "summary.json"}
