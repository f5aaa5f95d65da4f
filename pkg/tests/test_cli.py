import subprocess
import sys

import numpy as np
import pytest

from modspec.algebra import ParameterGrid
from modspec.cli import SWEEP_HEADER, main
from modspec.diagonalizer import ModuleOperator
from modspec.fieldio import OperatorFieldFile, write_coefficients


def write_op(path, fibers, dims, length, weights=None, encoding="decimal"):
    weights = np.full(len(dims), 1.0 / len(dims)) if weights is None else weights
    K = ModuleOperator(ParameterGrid(weights, dims), length, [np.asarray(f, dtype=complex) for f in fibers])
    OperatorFieldFile.from_operator(K).write(path, encoding)
    return path


def statuses(report):
    return [line.rsplit(" ", 1)[1] for line in report.splitlines() if line.startswith("theta=")]


def sweep_args(out, coeffs=None, tmin=0.3, tmax=0.4):
    args = ["butterfly", "--theta-min", str(tmin), "--theta-max", str(tmax), "--steps", "3",
            "--osc-dim", "12", "--bloch-points", "2", "--q-max", "16", "--output", str(out)]
    return args + ([str(coeffs)] if coeffs else [])


# -- diagonalize ----------------------------------------------------------------------------

def test_diagonalize_diagonal_file(tmp_path, capsys):
    path = write_op(tmp_path / "d.txt", [np.diag([3.0, 2.0, 1.0]), np.diag([5.0, 4.0, 0.5])], [1, 1], 3)
    out = tmp_path / "out"
    assert main(["diagonalize", str(path), "--output", str(out)]) == 0
    rows = (out / "eigenvalues.csv").read_text().splitlines()[2:]
    vals = {}
    for r in rows:
        t, g, _, _, re, _ = r.split(",")
        vals[(int(t), int(g))] = float(re)
    assert [vals[(t, 0)] for t in range(3)] == pytest.approx([3, 2, 1])
    assert [vals[(t, 1)] for t in range(3)] == pytest.approx([5, 4, 0.5])
    assert "PASS" in (out / "report.txt").read_text()


def test_diagonalize_example35_verdict(capsys):
    assert main(["diagonalize", "--example35", "12"]) == 0
    assert "H*_A-only at this truncation" in capsys.readouterr().out


def test_diagonalize_corrupted_payload(tmp_path, capsys):
    path = write_op(tmp_path / "b.txt", [np.eye(2)], [1], 2, encoding="base64")
    text = path.read_bytes()
    i = text.index(b"fiber 0\n") + len(b"fiber 0\n")
    path.write_bytes(text[:i] + b"@@" + text[i + 2:])
    assert main(["diagonalize", str(path)]) == 2
    assert f"byte offset {i}" in capsys.readouterr().err


def test_diagonalize_missing_file(tmp_path):
    assert main(["diagonalize", str(tmp_path / "nope.txt")]) == 2


def test_diagonalize_certificate_failure_exit_1(tmp_path):
    path = write_op(tmp_path / "d.txt", [np.diag([3.0, 2.0, 1.0])], [1], 3)
    out = tmp_path / "out"
    assert main(["diagonalize", str(path), "--tol", "-1", "--output", str(out)]) == 1
    assert (out / "report.txt").exists()


# -- quadform ----------------------------------------------------------------------------------

def test_quadform_diag31(tmp_path, capsys):
    path = write_op(tmp_path / "q.txt", [np.diag([3.0, 1.0])], [1], 2)
    assert main(["quadform", str(path)]) == 0
    out = capsys.readouterr().out
    q = float(out.split("Q_star")[1].split()[0])
    defect = float(out.split("projection defect")[1].split()[0])
    assert q == pytest.approx(3.0, abs=1e-9) and defect <= 1e-6


def test_quadform_m2(tmp_path, capsys):
    path = write_op(tmp_path / "q.txt", [np.diag([4.0, 3.0, 2.0, 1.0])], [2], 2)
    assert main(["quadform", str(path)]) == 0
    out = capsys.readouterr().out
    assert float(out.split("Q_star")[1].split()[0]) == pytest.approx(3.5, abs=1e-5)


def test_quadform_zero_refused(tmp_path, capsys):
    path = write_op(tmp_path / "z.txt", [np.zeros((2, 2))], [1], 2)
    assert main(["quadform", str(path)]) == 1
    assert "REFUSED" in capsys.readouterr().out


# -- magnetic drivers ----------------------------------------------------------------------------

def test_butterfly_zero_w(tmp_path, capsys):
    empty = tmp_path / "w.csv"
    empty.write_text("# no coefficients\n")
    out = tmp_path / "s.csv"
    assert main(sweep_args(out, empty)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == SWEEP_HEADER and lines[1] == "theta,bloch1,bloch2,eigenvalue,trusted"
    for r in lines[2:]:
        th, _, _, e, _ = (float(x) for x in r.split(","))
        i = round((e / th + 1) / 2)
        assert e == pytest.approx((2 * i - 1) * th, abs=1e-10)
    err = capsys.readouterr().err
    assert statuses(err) == ["PASS"] * 3


def test_butterfly_small_w_pass(tmp_path, capsys):
    c = tmp_path / "w.csv"
    write_coefficients(c, {(1, 1): 0.08 + 0.04j, (-1, -1): 0.08 - 0.04j, (0, 0): 0.06 + 0j})
    report = tmp_path / "gap.txt"
    assert main(sweep_args(tmp_path / "s.csv", c) + ["--report", str(report)]) == 0
    text = report.read_text()
    assert statuses(text) == ["PASS"] * 3 and "hypothesis=yes" in text


def test_butterfly_large_w_not_applicable(tmp_path, capsys):
    c = tmp_path / "w.csv"
    write_coefficients(c, {(0, 0): 1.2 + 0j})
    assert main(sweep_args(tmp_path / "s.csv", c)) == 0
    err = capsys.readouterr().err
    assert statuses(err) == ["NOT-APPLICABLE"] * 3


def test_butterfly_deterministic_csv(tmp_path):
    c = tmp_path / "w.csv"
    write_coefficients(c, {(1, 0): 0.05 + 0.05j, (-1, 0): 0.05 - 0.05j})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(sweep_args(a, c)) == 0
    assert main(sweep_args(b, c)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_butterfly_q_overflow_is_notice(tmp_path, capsys):
    args = sweep_args(tmp_path / "s.csv", tmin=0.3, tmax=0.41)
    args[args.index("--q-max") + 1] = "3"
    assert main(args) == 0
    assert "NOTICE skipped" in capsys.readouterr().err


def test_butterfly_bad_coefficients(tmp_path):
    c = tmp_path / "w.csv"
    c.write_text("1,0,0.1\n")
    assert main(sweep_args(tmp_path / "s.csv", c)) == 2


def test_gaps_band(capsys):
    assert main(["gaps", "--theta", "0.4", "--osc-dim", "12", "--bloch-points", "2"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "tau(<x,x>) = 0.4" in out


def test_example35_command(capsys):
    assert main(["example35", "--levels", "8"]) == 0
    assert "H*_A-only" in capsys.readouterr().out


def test_threads_env(tmp_path):
    path = write_op(tmp_path / "d.txt", [np.diag([3.0, 1.0])] * 2, [1, 1], 2)
    env = {"MODSPEC_THREADS": "0", "PATH": ""}
    r = subprocess.run([sys.executable, "-m", "modspec.cli", "diagonalize", str(path)], capture_output=True, env=env)
    assert r.returncode == 2
    env["MODSPEC_THREADS"] = "2"
    r = subprocess.run([sys.executable, "-m", "modspec.cli", "diagonalize", str(path)], capture_output=True, env=env)
    assert r.returncode == 0
