"""Command-line entry point.

Exit codes: 0 when every certificate passes, 1 on a mathematical
certificate failure or refused hypothesis, 2 on I/O or format errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .algebra import trace_tau
from .diagonalizer import RESIDUAL_TOL, diagonalize
from .errors import FormatError, GapHypothesisError, HypothesisError, QOverflowError, RankError
from .example35 import example35_operator, run_example35
from .fieldio import OperatorFieldFile, read_coefficients
from .magnetic import MagneticModel, band_eigenvalues, fiber_spectra, gap_check, spectrum_sweep
from .module import inner, tail_profile
from .parallel import worker_count
from .quadform import QuadraticForm, kyfan_value, maximize_on_ball

EXIT_OK, EXIT_CERT, EXIT_IO = 0, 1, 2
SWEEP_HEADER = "# modspec sweep v1 columns: theta,bloch1,bloch2,eigenvalue,trusted"

log = logging.getLogger("modspec")


def _f(x) -> str:
    return format(float(x), ".17g")


def _load(path) -> OperatorFieldFile:
    try:
        return OperatorFieldFile.read(path)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# diagonalize
# ---------------------------------------------------------------------------

def _write_decomposition(dec, outdir, extra=""):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "eigenvalues.csv"), "w", newline="\n") as fh:
        fh.write("# modspec eigenvalues v1 columns: term,point,row,col,re,im\n")
        fh.write("term,point,row,col,re,im\n")
        for i, t in enumerate(dec.terms):
            for g, lam in enumerate(t.lam.fibers):
                for r in range(lam.shape[0]):
                    for c in range(lam.shape[1]):
                        z = lam[r, c]
                        fh.write(f"{i},{g},{r},{c},{_f(z.real)},{_f(z.imag)}\n")
    report = dec.report() + ("\n" + extra if extra else "") + "\n"
    with open(os.path.join(outdir, "report.txt"), "w", newline="\n") as fh:
        fh.write(report)
    return report


def cmd_diagonalize(args) -> int:
    if args.example35 is not None:
        K = example35_operator(args.example35)
    else:
        if args.input is None:
            raise FormatError("an input file or --example35 LEVELS is required")
        K = _load(args.input).to_operator()
    dec = diagonalize(K, max_terms=args.max_terms, target=args.target, residual_tol=args.tol)
    extra = ""
    if dec.terms:
        prof = tail_profile(dec.terms[0].x)
        extra = (
            "top eigenvector sup tails: "
            + " ".join(f"{t:.6g}" for t in prof.sup_tails)
            + f"\ntail-profile verdict: {prof.verdict}"
        )
    if args.output:
        report = _write_decomposition(dec, args.output, extra)
    else:
        report = dec.report() + ("\n" + extra if extra else "") + "\n"
    sys.stdout.write(report)
    return EXIT_OK if dec.all_passed() else EXIT_CERT


# ---------------------------------------------------------------------------
# quadform
# ---------------------------------------------------------------------------

def cmd_quadform(args) -> int:
    K = _load(args.input).to_operator()
    form = QuadraticForm(K)
    if not form.is_positive():
        print(f"REFUSED: operator is not positive kernel-free (min eigenvalue {K.min_eigenvalue():.3e})")
        return EXIT_CERT
    res = maximize_on_ball(form, iters=args.iters, tol=args.tol)
    kf = kyfan_value(form)
    p = inner(res.x, res.x)
    defect = max(np.abs(f @ f - f).max() for f in p.fibers)
    unit = (p - 1.0).norm()
    diff = abs(res.value - kf.value)
    print(f"Q_star            {_f(res.value)}")
    print(f"tau(lambda_1)     {_f(kf.value)}")
    print(f"difference        {diff:.3e}")
    print(f"projection defect {defect:.3e}")
    print(f"|<x,x> - 1|       {unit:.3e}")
    print(f"iterations        {res.iterations} ({'certified' if res.certified else 'NOT certified'})")
    if not kf.separated:
        print("note: spectral separation of lambda_1, lambda_2 fails; Ky Fan hypothesis unmet")
    ok = res.certified and defect <= 1e-6 and (diff <= 1e-5 or not kf.separated)
    return EXIT_OK if ok else EXIT_CERT


# ---------------------------------------------------------------------------
# magnetic drivers
# ---------------------------------------------------------------------------

def _coeffs(path):
    if path is None:
        return {}
    try:
        return read_coefficients(path)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None


def _write_sweep(result, fh):
    fh.write(SWEEP_HEADER + "\n")
    fh.write("theta,bloch1,bloch2,eigenvalue,trusted\n")
    for r in result.rows:
        fh.write(f"{_f(r.theta)},{_f(r.bloch1)},{_f(r.bloch2)},{_f(r.eigenvalue)},{int(r.trusted)}\n")


def _gap_report(result) -> str:
    lines = ["# modspec gap report v1"]
    lines += [c.line() for c in result.checks]
    lines += [f"NOTICE {msg}" for _, msg in result.skipped]
    counts = {s: sum(c.status == s for c in result.checks) for s in ("PASS", "FAIL", "NOT-APPLICABLE")}
    lines.append(
        f"summary: {counts['PASS']} PASS, {counts['FAIL']} FAIL, "
        f"{counts['NOT-APPLICABLE']} NOT-APPLICABLE, {len(result.skipped)} skipped"
    )
    return "\n".join(lines) + "\n"


def cmd_butterfly(args) -> int:
    coeffs = _coeffs(args.coeffs)
    if args.steps < 1 or not (0 < args.theta_min <= args.theta_max < 1):
        raise FormatError("need 0 < theta-min <= theta-max < 1 and steps >= 1")
    thetas = np.linspace(args.theta_min, args.theta_max, args.steps)
    tol = 0.5 * (thetas[1] - thetas[0]) if args.steps > 1 else 1e-9
    # the base model fixes osc_dim, coefficients and Bloch grid; θ is replaced per row
    base = MagneticModel(0.5, args.osc_dim, coeffs, args.bloch_points, args.q_max, tol)
    result = spectrum_sweep(base, thetas)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="\n")
    try:
        _write_sweep(result, out)
    finally:
        if out is not sys.stdout:
            out.close()
    report = _gap_report(result)
    if args.report:
        with open(args.report, "w", newline="\n") as fh:
            fh.write(report)
    sys.stderr.write(report)
    return EXIT_CERT if any(c.status == "FAIL" for c in result.checks) else EXIT_OK


def cmd_gaps(args) -> int:
    coeffs = _coeffs(args.coeffs)
    status = EXIT_OK
    for theta in args.theta:
        try:
            model = MagneticModel(theta, args.osc_dim, coeffs, args.bloch_points, args.q_max)
        except QOverflowError as exc:
            print(f"NOTICE skipped theta={theta!r}: {exc}")
            continue
        _, W, spectra = fiber_spectra(model)
        check = gap_check(model, W, spectra)
        print(check.line())
        if check.status == "FAIL":
            status = EXIT_CERT
        if args.band:
            try:
                band = band_eigenvalues(model, args.band)
            except GapHypothesisError as exc:
                print(f"  band {args.band}: REFUSED ({exc})")
                continue
            allspec = np.concatenate(band.spectra)
            tau = trace_tau(band.term.p).real
            print(
                f"  band {args.band}: spectrum of lambda in [{allspec.min():.12g}, {allspec.max():.12g}], "
                f"tau(<x,x>) = {tau:.12g}, residual {band.residual:.3e}"
            )
            if band.residual > RESIDUAL_TOL:
                status = EXIT_CERT
    return status


def cmd_example35(args) -> int:
    r = run_example35(args.levels)
    print(r.report())
    print(r.decomposition.report())
    ok = (
        r.eigenvalue_error <= 1e-10
        and r.vector_error <= 1e-9
        and r.inner_square_error <= 1e-9
        and r.decomposition.all_passed()
    )
    return EXIT_OK if ok else EXIT_CERT


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modspec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"modspec {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("diagonalize", help="operator-valued diagonalization of an operator-field file")
    d.add_argument("input", nargs="?")
    d.add_argument("--target", type=float, default=1.0)
    d.add_argument("--max-terms", type=int, default=None)
    d.add_argument("--tol", type=float, default=RESIDUAL_TOL, help="residual tolerance")
    d.add_argument("--output", "-o", help="directory for eigenvalues.csv and report.txt")
    d.add_argument("--example35", type=int, metavar="LEVELS", help="use the dyadic example operator")
    d.set_defaults(func=cmd_diagonalize)

    q = sub.add_parser("quadform", help="maximize tau(<Dx,x>) on the unit ball")
    q.add_argument("input")
    q.add_argument("--iters", type=int, default=20000)
    q.add_argument("--tol", type=float, default=1e-9)
    q.set_defaults(func=cmd_quadform)

    b = sub.add_parser("butterfly", help="spectrum of D = Delta + W over a theta range")
    b.add_argument("coeffs", nargs="?", help="k,l,re,im coefficient file (omit for W = 0)")
    b.add_argument("--theta-min", type=float, default=0.1)
    b.add_argument("--theta-max", type=float, default=0.9)
    b.add_argument("--steps", type=int, default=41)
    b.add_argument("--q-max", type=int, default=64)
    b.add_argument("--osc-dim", type=int, default=64)
    b.add_argument("--bloch-points", type=int, default=3)
    b.add_argument("--output", "-o", help="CSV path ('-' for stdout)")
    b.add_argument("--report", help="gap-report path (also printed to stderr)")
    b.set_defaults(func=cmd_butterfly)

    e = sub.add_parser("example35", help="reproduce the dual-module example")
    e.add_argument("--levels", type=int, default=12)
    e.set_defaults(func=cmd_example35)

    g = sub.add_parser("gaps", help="gap check and band eigenvalues at given theta values")
    g.add_argument("coeffs", nargs="?")
    g.add_argument("--theta", type=float, nargs="+", required=True)
    g.add_argument("--osc-dim", type=int, default=64)
    g.add_argument("--bloch-points", type=int, default=3)
    g.add_argument("--q-max", type=int, default=64)
    g.add_argument("--band", type=int, default=1, help="band index (0 to skip)")
    g.set_defaults(func=cmd_gaps)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        worker_count()
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HypothesisError, RankError) as exc:
        print(f"REFUSED: {exc}", file=sys.stderr)
        return EXIT_CERT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
