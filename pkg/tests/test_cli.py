import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from elsgd import __version__
from elsgd.cli import EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, main, sidecar_path
from elsgd.roc import average_sq_roc_closed_form_2d


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_meta(path):
    return json.loads(sidecar_path(str(path)).read_text())


def usage_error(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main([*argv, "--out", "/nonexistent/never-written.csv"])
    assert exc.value.code == EXIT_USAGE
    return capsys.readouterr().err


# ---------------------------------------------------------------- roc-trace

def test_roc_trace_worst_seed(tmp_path):
    code, out = run(tmp_path, "roc-trace", "--lambda", "2,1", "--x0", "worst")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["k", "a_norm", "rho_k", "s_k"]
    assert len(rows) > 10
    for r in rows:
        assert float(r["rho_k"]) == pytest.approx(1 / 3, rel=1e-12)
    meta = read_meta(out)
    assert meta["version"] == __version__
    assert meta["config"]["command"] == "roc-trace"
    assert meta["config"]["params"]["lam"] == [2.0, 1.0]
    assert [c["name"] for c in meta["columns"]] == ["k", "a_norm", "rho_k", "s_k"]


def test_roc_trace_eigenvector(tmp_path):
    code, out = run(tmp_path, "roc-trace", "--lambda", "2,1", "--x0", "1,0")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 1 and float(rows[0]["rho_k"]) == 0.0
    assert read_meta(out)["converged"] is True


def test_roc_trace_seeded_midpoint(tmp_path):
    code, out = run(tmp_path, "roc-trace", "--n", "3", "--a", "0.01", "--seed", "1")
    assert code == EXIT_OK
    rows = read_csv(out)
    meta = read_meta(out)
    tail = np.array([float(r["rho_k"]) for r in rows[-20:]])
    # the per-step factors alternate; their geometric mean settles in the Akaike band
    gm = math.sqrt(tail[-1] * tail[-2])
    assert meta["summary"]["akaike_lower_bound"] - 1e-9 <= gm <= meta["summary"]["worst_case_roc"]


def test_roc_trace_non_convergence_exit_code(tmp_path):
    code, out = run(tmp_path, "roc-trace", "--n", "3", "--a", "0.01", "--seed", "1",
                    "--max-k", "5")
    assert code == EXIT_NONCONVERGED
    assert len(read_csv(out)) == 5
    assert read_meta(out)["converged"] is False


@pytest.mark.parametrize("argv", [
    ["roc-trace"],
    ["roc-trace", "--lambda", "1,2"],
    ["roc-trace", "--lambda", "2,1", "--n", "2"],
    ["roc-trace", "--lambda", "2,1", "--x0", "1,2,3"],
    ["roc-trace", "--lambda", "2,1", "--x0", "0,0"],
    ["roc-trace", "--lambda", "2,1", "--x0", "worst", "--seed", "3"],
    ["roc-trace", "--n", "3", "--a", "0.1", "--alpha", "0.5,0.2"],
    ["roc-trace", "--lambda", "a,b"],
])
def test_roc_trace_usage_errors(argv, capsys):
    assert "error" in usage_error(argv, capsys)


# ---------------------------------------------------------------- average-roc

def test_average_sweep_matches_closed_form(tmp_path):
    code, out = run(tmp_path, "average-roc", "--sweep", "12")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 13
    for r in rows:
        a = float(r["a"])
        assert float(r["sqrt_avg_square"]) == pytest.approx(
            math.sqrt(average_sq_roc_closed_form_2d(a)), abs=1e-10)
        assert float(r["worst"]) == pytest.approx((1 - a) / (1 + a))
        assert float(r["average"]) <= float(r["sqrt_avg_square"]) + 1e-12


def test_average_a_equal_one(tmp_path):
    code, out = run(tmp_path, "average-roc", "--a", "1")
    assert code == EXIT_OK
    (row,) = read_csv(out)
    assert all(float(row[c]) == 0.0 for c in ("worst", "average", "sqrt_avg_square"))


def test_average_mc_three_dimensional(tmp_path):
    code, out = run(tmp_path, "average-roc", "--n", "3", "--a", "0.01", "--method", "mc",
                    "--samples", "5000", "--seed", "2")
    assert code == EXIT_OK
    (row,) = read_csv(out)
    assert float(row["average"]) >= 0.96
    assert int(row["samples"]) == 5000


def test_average_mc_with_lambda(tmp_path):
    code, out = run(tmp_path, "average-roc", "--lambda", "1,0.505,0.01", "--method", "mc",
                    "--samples", "2000")
    assert code == EXIT_OK
    assert "akaike_lower_bound" in read_meta(out)["summary"]


@pytest.mark.parametrize("argv", [
    ["average-roc", "--n", "3", "--a", "0.01", "--method", "quad"],
    ["average-roc", "--lambda", "1,0.5,0.1"],
    ["average-roc"],
    ["average-roc", "--a", "0"],
    ["average-roc", "--a", "0.5", "--sweep", "3"],
])
def test_average_usage_errors(argv, capsys):
    usage_error(argv, capsys)


# ---------------------------------------------------------------- limit-angles

def test_limit_angles(tmp_path):
    code, out = run(tmp_path, "limit-angles", "--n", "3", "--a", "0.1", "--samples", "20000")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["bin_center", "density", "roc"] and len(rows) == 200
    s = read_meta(out)["summary"]
    lo, hi = s["mode_bin"]
    assert lo <= math.atan(10) <= hi
    assert s["atan_inv_a"] == pytest.approx(math.atan(10))
    assert s["outside_interval"] == 0 and s["nonconverged"] == 0
    assert s["worst_case_roc"] == pytest.approx(0.9 / 1.1)


def test_limit_angles_two_dimensional_rejected(capsys):
    usage_error(["limit-angles", "--lambda", "2,1"], capsys)


# ---------------------------------------------------------------- phase-retrieval

def test_phase_retrieval_small(tmp_path):
    code, out = run(tmp_path, "phase-retrieval", "--n", "20", "--m", "200", "--seed", "2",
                    "--tol", "1e-8")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["method", "k", "rel_error", "f"]
    meta = read_meta(out)["summary"]
    assert meta["hessian_cond"] >= 1.0
    assert meta["els"]["iterations"] < meta["const"]["iterations"]
    els = [float(r["rel_error"]) for r in rows if r["method"] == "els"]
    assert els[-1] <= 1e-8 and len(els) == meta["els"]["iterations"] + 1


def test_phase_retrieval_from_truth(tmp_path):
    code, out = run(tmp_path, "phase-retrieval", "--n", "10", "--m", "100", "--init", "truth",
                    "--method", "els")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 1 and float(rows[0]["rel_error"]) == 0.0


def test_phase_retrieval_budget_exit_code(tmp_path):
    code, out = run(tmp_path, "phase-retrieval", "--n", "20", "--m", "200", "--max-k", "3")
    assert code == EXIT_NONCONVERGED
    assert len(read_csv(out)) == 8


def test_phase_retrieval_usage(capsys):
    usage_error(["phase-retrieval", "--n", "0"], capsys)
    usage_error(["phase-retrieval", "--method", "newton"], capsys)


# ---------------------------------------------------------------- rosenbrock

def test_rosenbrock_small(tmp_path):
    code, out = run(tmp_path, "rosenbrock", "--seeds", "3", "--stride", "50")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["run", "k", "f", "reference"]
    meta = read_meta(out)["summary"]
    assert 2400 <= meta["hessian_cond"] <= 2600
    first = [r for r in rows if r["run"] == "0"]
    assert float(first[0]["reference"]) == float(first[0]["f"])
    assert float(first[-1]["f"]) < 1e-10


def test_rosenbrock_four_dimensional_tracks_reference(tmp_path):
    code, out = run(tmp_path, "rosenbrock", "--n", "4", "--seeds", "5", "--stride", "1000")
    assert code == EXIT_OK
    ratio = read_meta(out)["summary"]["median_iteration_ratio"]
    assert 0.5 <= ratio <= 2.0


def test_rosenbrock_usage(capsys):
    usage_error(["rosenbrock", "--n", "1"], capsys)
    usage_error(["rosenbrock", "--stride", "0"], capsys)


# ---------------------------------------------------------------- hessian-table

def test_hessian_table_single_size(tmp_path):
    code, out = run(tmp_path, "hessian-table", "--sizes", "100")
    assert code == EXIT_OK
    (row,) = read_csv(out)
    assert list(row) == ["n", "m", "cond_at_xstar", "cond_along_a1", "cond_random_1",
                         "cond_random_2", "cond_random_3"]
    assert int(row["m"]) == round(100 * math.log2(100))
    assert 5 <= float(row["cond_at_xstar"]) <= 50


def test_hessian_table_usage(capsys):
    usage_error(["hessian-table", "--sizes", ","], capsys)
    usage_error(["hessian-table", "--sizes", "5000"], capsys)


# ---------------------------------------------------------------- cross-cutting

@pytest.mark.parametrize("argv", [
    ["roc-trace", "--n", "4", "--a", "0.05", "--seed", "3"],
    ["average-roc", "--n", "3", "--a", "0.1", "--method", "mc", "--samples", "3000"],
    ["limit-angles", "--lambda", "1,0.6,0.3,0.1", "--samples", "3000", "--bins", "50"],
    ["phase-retrieval", "--n", "10", "--m", "80", "--tol", "1e-6"],
    ["rosenbrock", "--seeds", "2", "--stride", "100"],
    ["hessian-table", "--sizes", "20,30"],
])
def test_byte_identical_reruns(tmp_path, argv, monkeypatch):
    _, a = run(tmp_path, *argv, name="a.csv")
    monkeypatch.setenv("ELS_GD_THREADS", "3")
    _, b = run(tmp_path, *argv, name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    assert read_meta(a)["summary"] == read_meta(b)["summary"]


def test_console_entry_point(tmp_path):
    out = tmp_path / "t.csv"
    proc = subprocess.run([sys.executable, "-m", "elsgd", "roc-trace", "--lambda", "2,1",
                           "--x0", "worst", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists() and sidecar_path(str(out)).exists()
    proc = subprocess.run([sys.executable, "-m", "elsgd", "rosenbrock", "--n", "1",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 2 and "--n must be at least 2" in proc.stderr
