"""Command-line interface.

Exit codes: 0 success, 1 certification or feasibility failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bell, nondegen, simlab
from .entbounds import analyze

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
CROSS_CHECK_TOL = 1e-4


class InputError(Exception):
    pass


class CertificationError(Exception):
    pass


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def parse_visibility(spec: str) -> list[float]:
    """``0.9`` | ``1.0,0.95,0.9`` | ``start:stop:step``."""
    try:
        if ":" in spec:
            start, stop, step = (float(s) for s in spec.split(":"))
            if step <= 0:
                raise ValueError
            return simlab.default_grid(start, stop, step)
        return [float(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"bad --visibility value {spec!r}; use a float, a comma list or start:stop:step") from None


def _dims(args, n: int, extras: dict | None = None) -> tuple[int, ...]:
    raw = args.dims if args.dims else (extras or {}).get("dims")
    if raw is None:
        return (2,) * n
    if isinstance(raw, str):
        try:
            raw = [int(s) for s in raw.split(",")]
        except ValueError:
            raise InputError(f"bad --dims value {raw!r}") from None
    dims = tuple(int(d) for d in raw)
    if len(dims) != n:
        raise InputError(f"dimension vector {dims} does not have {n} entries")
    return dims


def _resolve_expression(args, n: int | None):
    """Returns ``(expr, extras, is_mabk)``."""
    if args.bell == "mabk":
        if n is None:
            raise InputError("-n is required with --bell mabk")
        return bell.mabk(n), {}, True
    try:
        expr, extras = bell.load_expression(args.bell)
    except FileNotFoundError:
        raise InputError(f"no such Bell expression file: {args.bell}") from None
    if n is not None and expr.scenario.n != n:
        raise InputError(f"expression has {expr.scenario.n} parties but -n {n} was given")
    return expr, extras, False


def build_certificate(args, expr, extras, is_mabk) -> nondegen.NondegeneracyCertificate:
    n = expr.scenario.n
    dims = _dims(args, n, extras)
    if is_mabk and all(d == 2 for d in dims):
        analytic = 2 ** ((n - 1) / 2)
        if getattr(args, "skip_seesaw", False):
            return nondegen.mabk_certificate(n)
        res = nondegen.seesaw_eigsum(expr, dims, 1, restarts=args.restarts, seed=args.seed)
        print(f"seesaw C1 estimate: {res.value:.12g} (analytic {analytic:.12g}, {res.sweeps} sweeps)",
              file=sys.stderr)
        if abs(res.value - analytic) > CROSS_CHECK_TOL:
            raise CertificationError(
                f"seesaw C1 {res.value:.12g} disagrees with the analytic value {analytic:.12g}")
        return nondegen.mabk_certificate(n)
    if "c1" in extras:
        c1 = float(extras["c1"])
    else:
        c1 = nondegen.seesaw_eigsum(expr, dims, 1, restarts=args.restarts, seed=args.seed).value
    if "c2_upper" in extras:
        c2 = float(extras["c2_upper"])
    else:
        c2 = nondegen.seesaw_eigsum(expr, dims, 2, restarts=args.restarts, seed=args.seed).value
    _warn("nondegeneracy is not rigorously certified for this expression "
          "(heuristic seesaw / declared values)")
    if c1 <= 0:
        raise CertificationError(f"C1 estimate {c1!r} is not positive")
    return nondegen.certify(expr, dims, c1, c2, nondegen.HEURISTIC_SEESAW)


def cmd_certify(args) -> int:
    expr, extras, is_mabk = _resolve_expression(args, args.n)
    cert = build_certificate(args, expr, extras, is_mabk)
    text = cert.to_json()
    print(text)
    _write(args.out, text + "\n")
    return EXIT_OK if cert.nondegenerate else EXIT_FAIL


def cmd_analyze(args) -> int:
    if args.inp is None:
        raise InputError("analyze needs --in <correlation.json>")
    try:
        corr, residual = bell.load_correlation(args.inp)
    except FileNotFoundError:
        raise InputError(f"no such correlation file: {args.inp}") from None
    if residual > 1e-6:
        _warn(f"worst normalisation residual {residual:.3g} exceeds 1e-6; rows were renormalised")
    if args.n is not None and args.n != corr.n:
        raise InputError(f"correlation has {corr.n} parties but -n {args.n} was given")
    expr, extras, is_mabk = _resolve_expression(args, corr.n)
    if expr.scenario != corr.scenario:
        raise InputError(f"expression scenario {expr.scenario} does not match correlation {corr.scenario}")
    args.skip_seesaw = True
    cert = build_certificate(args, expr, extras, is_mabk)
    if cert.method != nondegen.ANALYTIC_MABK:
        _warn("bounds rest on a heuristic certificate")
    if not cert.nondegenerate:
        _warn("expression is not certified nondegenerate; a1 bound is vacuous")
    try:
        report = analyze(corr, cert, expr, restarts=args.restarts, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if report.fhat_spread > 1e-6:
        _warn(f"product-fidelity restarts disagree by up to {report.fhat_spread:.3g}")
    text = report.to_json()
    print(text)
    _write(args.out, text + "\n")
    return EXIT_OK if report.feasible else EXIT_FAIL


def _noise_models(args) -> list[simlab.NoiseModel]:
    vis = parse_visibility(args.visibility)
    if not vis:
        raise InputError("empty visibility grid")
    try:
        return [simlab.NoiseModel(v, args.angle_jitter, args.state_jitter, args.seed) for v in vis]
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _require_mabk(args):
    if args.bell != "mabk":
        raise InputError("simulation is defined for the MABK configuration only (--bell mabk)")
    if args.n is None:
        raise InputError("-n is required")


def cmd_simulate(args) -> int:
    _require_mabk(args)
    models = _noise_models(args)
    if len(models) != 1:
        raise InputError("simulate takes a single --visibility value")
    corr = simlab.simulate(args.n, models[0], args.shots)
    text = json.dumps(bell.correlation_to_json(corr), indent=1)
    if args.out is None:
        print(text)
    else:
        _write(args.out, text + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require_mabk(args)
    spec = simlab.SweepSpec(args.n, tuple(_noise_models(args)), args.restarts, args.seed, args.shots)
    if args.out is not None and not Path(args.out).resolve().parent.is_dir():
        raise InputError(f"cannot write {args.out}: directory does not exist")
    reports = simlab.sweep(spec)
    text = simlab.sweep_csv(spec, reports)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write(args.out, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bell", default="mabk", help="'mabk' or a JSON coefficient file")
    common.add_argument("-n", type=int, default=None, help="number of parties")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--restarts", type=int, default=None)
    common.add_argument("--dims", default=None, help="comma-separated local dimensions (default: qubits)")
    common.add_argument("--out", default=None, help="output path")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--visibility", default=None, help="float, comma list or start:stop:step")
    noise.add_argument("--angle-jitter", type=float, default=0.0)
    noise.add_argument("--state-jitter", type=float, default=0.0)
    noise.add_argument("--shots", type=int, default=None)

    p = argparse.ArgumentParser(prog="entbound", description=(
        "Semi-device-independent lower bounds on multipartite entanglement from Bell data."))
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("certify", parents=[common], help="certify nondegeneracy of a Bell expression")
    a = sub.add_parser("analyze", parents=[common], help="bound the entanglement behind a correlation file")
    a.add_argument("--in", dest="inp", default=None)
    sub.add_parser("simulate", parents=[common, noise], help="write a simulated correlation file")
    sub.add_parser("sweep", parents=[common, noise], help="bounds along a noise grid, as CSV")
    return p


_DEFAULT_RESTARTS = {"certify": 50, "analyze": 20, "simulate": 20, "sweep": 20}
_DEFAULT_VISIBILITY = {"simulate": "1.0", "sweep": "1.0:0.7:0.005"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.restarts is None:
        args.restarts = _DEFAULT_RESTARTS[args.command]
    if getattr(args, "visibility", None) is None and args.command in _DEFAULT_VISIBILITY:
        args.visibility = _DEFAULT_VISIBILITY[args.command]
    handlers = {"certify": cmd_certify, "analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep}
    try:
        if args.restarts < 1:
            raise InputError("--restarts must be >= 1")
        if args.n is not None and args.n < 2:
            raise InputError("-n must be >= 2")
        if getattr(args, "shots", None) is not None and args.shots < 1:
            raise InputError("--shots must be >= 1")
        return handlers[args.command](args)
    except CertificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
