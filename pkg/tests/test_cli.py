import json
import os
import shutil
import subprocess

import numpy as np
import pytest

from ako import __version__
from ako.cli import main, read_matrix
from ako.simulation import SimConfig, generate_dataset

SIM = ["--n", "60", "--p", "30", "--rho", "0.5", "--sparsity", "0.2", "--snr", "5", "--seed", "5"]


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data"
    assert main(["simulate", *SIM, "--out", str(out)]) == 0
    return out


def infer(capsys, *args):
    capsys.readouterr()
    code = main(["infer", *args])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 and out.out else None), out.err


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_simulate_round_trip_exact(dataset):
    data = generate_dataset(SimConfig(n=60, p=30, rho=0.5, sparsity=0.2, snr=5.0, master_seed=5))
    assert np.array_equal(read_matrix(dataset / "X.csv"), data.x)
    assert np.array_equal(read_matrix(dataset / "y.csv")[:, 0], data.y)
    assert np.array_equal(read_matrix(dataset / "beta.csv")[:, 0], data.beta_star)
    meta = json.loads((dataset / "meta.json").read_text())
    assert meta["config"]["seed"] == 5 and meta["sigma_noise"] == data.sigma_noise
    assert meta["support"] == [int(j) + 1 for j in data.support]


def test_simulate_byte_identical(dataset, tmp_path):
    again = tmp_path / "again"
    assert main(["simulate", *SIM, "--out", str(again)]) == 0
    for name in ("X.csv", "y.csv", "beta.csv", "meta.json"):
        assert (dataset / name).read_bytes() == (again / name).read_bytes()


def test_simulate_rejects_empty_support(tmp_path, capsys):
    assert main(["simulate", "--sparsity", "0", "--out", str(tmp_path)]) == 2


def test_simulate_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", *SIM, "--out", str(blocker / "sub")]) == 3


def test_infer_report_and_replay(dataset, capsys):
    args = ["--x", str(dataset / "X.csv"), "--y", str(dataset / "y.csv"), "--fdr", "0.2",
            "--bootstraps", "3", "--gamma", "0.3", "--seed", "7", "--lambda", "fixed:0.5"]
    code, rep, _ = infer(capsys, "--method", "ako", *args)
    assert code == 0
    assert rep["schema"] == 1 and rep["method"] == "ako" and rep["p"] == 30 and rep["n"] == 60
    assert len(rep["pi_bar"]) == 30 and len(rep["bootstraps"]) == 3
    assert all(1 <= j <= 30 for j in rep["selected"]) and rep["selected"] == sorted(rep["selected"])
    _, again, _ = infer(capsys, "--method", "ako", *args)
    rep.pop("runtime_ms"), again.pop("runtime_ms")
    assert rep == again


def test_infer_default_config(dataset, capsys):
    code, rep, _ = infer(capsys, "--x", str(dataset / "X.csv"), "--y", str(dataset / "y.csv"),
                         "--lambda", "fixed:0.5", "--oracle-cov", "toeplitz:0.5")
    assert code == 0
    assert rep["config"]["bootstraps"] == 25 and rep["config"]["gamma"] == 0.3 and rep["alpha"] == 0.1


@pytest.mark.parametrize("fdr", ["0.1", "0.3"])
def test_infer_single_bootstrap_equals_ko(dataset, capsys, fdr):
    base = ["--x", str(dataset / "X.csv"), "--y", str(dataset / "y.csv"), "--fdr", fdr, "--seed", "11",
            "--oracle-cov", "toeplitz:0.5"]
    _, ako, _ = infer(capsys, "--method", "ako", "--bootstraps", "1", "--gamma", "1.0", "--fdr-method", "bh", *base)
    _, ko, _ = infer(capsys, "--method", "ko", *base)
    assert ako["selected"] == ko["selected"]


def test_infer_writes_out_file(dataset, tmp_path, capsys):
    target = tmp_path / "report.json"
    code = main(["infer", "--method", "ko", "--x", str(dataset / "X.csv"), "--y", str(dataset / "y.csv"),
                 "--lambda", "fixed:0.5", "--out", str(target)])
    assert code == 0 and json.loads(target.read_text())["method"] == "ko"


def test_infer_row_mismatch(dataset, tmp_path, capsys):
    lines = (dataset / "y.csv").read_text().splitlines()
    short = tmp_path / "short.csv"
    short.write_text("\n".join(lines[:-1]) + "\n")
    code, _, err = infer(capsys, "--x", str(dataset / "X.csv"), "--y", str(short))
    assert code == 2 and "60" in err and "59" in err


def test_infer_malformed_csv(tmp_path, capsys):
    x = tmp_path / "x.csv"
    x.write_text("1,2\n3,4\n5\n")
    code, _, err = infer(capsys, "--x", str(x), "--y", str(x))
    assert code == 2 and "row 3" in err
    x.write_text("1,2\n3,abc\n")
    code, _, err = infer(capsys, "--x", str(x), "--y", str(x))
    assert code == 2 and "row 2" in err and "column 2" in err


def test_header_row_accepted(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    assert np.array_equal(read_matrix(path), [[1, 2], [3, 4]])


@pytest.mark.parametrize("flags", [["--gamma", "0"], ["--gamma", "1.5"], ["--bootstraps", "0"]])
def test_infer_invalid_flags(dataset, capsys, flags):
    code, _, _ = infer(capsys, "--x", str(dataset / "X.csv"), "--y", str(dataset / "y.csv"), *flags)
    assert code == 2


def test_infer_missing_file(tmp_path, capsys):
    code, _, err = infer(capsys, "--x", str(tmp_path / "nope.csv"), "--y", str(tmp_path / "nope.csv"))
    assert code == 3 and "nope.csv" in err


def test_benchmark_errors(tmp_path, capsys):
    assert main(["benchmark", "--experiment", "nope", "--out", str(tmp_path)]) == 2
    assert main(["benchmark", "--experiment", "grid", "--runs", "0", "--out", str(tmp_path)]) == 2


BENCH = ["--n", "60", "--p", "30", "--sparsity", "0.2", "--snr", "5", "--fdr", "0.2", "--bootstraps", "3",
         "--lambda", "fixed:0.5", "--seed", "9"]


@pytest.mark.parametrize(
    "extra",
    [
        ["--experiment", "stability", "--ako-runs", "2", "--ko-runs", "4"],
        ["--experiment", "grid", "--vary", "rho", "--values", "0.2,0.5", "--runs", "2",
         "--methods", "ako,ko,ako-by"],
        ["--experiment", "bgamma", "--b-list", "1,3", "--gamma-list", "0.3,1.0", "--runs", "2"],
    ],
)
def test_benchmark_thread_independent(tmp_path, extra):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["benchmark", *BENCH, *extra, "--threads", "1", "--out", str(a)]) == 0
    assert main(["benchmark", *BENCH, *extra, "--threads", "4", "--out", str(b)]) == 0
    assert (a / "records.csv").read_bytes() == (b / "records.csv").read_bytes()
    header = (a / "records.csv").read_text().splitlines()[0]
    assert header == "experiment,cell,method,run,fdp,power"
    summary = json.loads((a / "summary.json").read_text())
    assert all("fdr_se" in row and "power_se" in row for row in summary["cells"])


def test_benchmark_spearman(tmp_path):
    out = tmp_path / "s"
    args = ["benchmark", *BENCH, "--experiment", "spearman", "--observations", "10", "--max-pairs", "10",
            "--gamma", "1.0", "--bootstraps", "2", "--out", str(out)]
    assert main(args) == 0
    lines = (out / "spearman.csv").read_text().splitlines()
    assert lines[0] == "feature_a,feature_b,spearman_rho,pvalue" and len(lines) <= 11


@pytest.mark.skipif(shutil.which("ako") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["ako", "version"], capture_output=True, text=True, env=dict(os.environ))
    assert res.returncode == 0 and res.stdout.strip() == __version__
