"""
Command-line front end.

Subcommands::

    model     generate a system JSON from a model kind and configuration
    loworder  compute (w2, w1, w0) by the spectral or algebraic route
    simulate  step response CSV by Crank-Nicolson
    fit       regression estimate of (w2, w1, w0) from a response CSV
    validate  run a reference scenario and print a pass/fail table

Exit codes: 0 success, 1 a validation check failed, 2 invalid input,
3 route precondition violated, 4 numerical failure. Errors are reported
on stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
import warnings
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import algebraic, models, regress, serialize, simulate, spectral, validation
from .core import (DimensionError, InvalidInputError, LowFreqError, NumericalError,
                   PreconditionError)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4


def _read(path: str) -> str:
    try:
        return _sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        _sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def parse_samples(text: str) -> np.ndarray:
    """Parse ``start:step:stop`` (inclusive) or a comma-separated list of times."""
    try:
        if ":" in text:
            start, step, stop = (float(p) for p in text.split(":"))
            if not step > 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return np.round(start + step * np.arange(n), 12)
        return np.array([float(p) for p in text.split(",")])
    except ValueError as exc:
        raise InvalidInputError(f"bad --samples {text!r}: {exc}") from None


def parse_window(text: str | None):
    if text is None:
        return None
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise InvalidInputError(f"bad --window {text!r}; expected t_start:t_stop") from None
    return (lo, hi)


def parse_u0(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise InvalidInputError(f"bad --u0 {text!r}") from None


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_model(args) -> int:
    doc = {}
    if args.config:
        try:
            doc = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"invalid config JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidInputError("config JSON must be an object")
    if args.kind == "example1":
        if doc or args.n_elem or args.load or args.mesh:
            raise InvalidInputError("example1 takes no configuration")
        sys = models.example_ode3()
    else:
        doc = dict(doc)
        if args.n_elem is not None:
            if args.kind == "plate":
                raise InvalidInputError("use --mesh MxxMy for the plate")
            doc["n_elem"] = args.n_elem
        if args.mesh is not None:
            if args.kind != "plate":
                raise InvalidInputError("--mesh applies to the plate only")
            try:
                doc["Mx"], doc["My"] = (int(p) for p in args.mesh.lower().split("x"))
            except ValueError:
                raise InvalidInputError(f"bad --mesh {args.mesh!r}; expected e.g. 12x16") from None
        if args.load is not None:
            if args.kind != "plate":
                raise InvalidInputError("--load applies to the plate only")
            doc["load"] = args.load
        try:
            cfg = models.config_from_dict(args.kind, doc)
        except TypeError as exc:
            raise InvalidInputError(f"bad {args.kind} config: {exc}") from None
        sys = models.build(args.kind, cfg)
    _write(args.out, serialize.dump_system(sys))
    return EXIT_OK


def cmd_loworder(args) -> int:
    sys = serialize.load_system(_read(args.system))
    channels = None if args.channel is None else [args.channel]
    if args.route == "spectral":
        lom = spectral.low_order_spectral_all(sys, channels)
    else:
        lom = algebraic.low_order_algebraic(sys, channels=channels)
    _write(args.out, serialize.dump_lom(lom))
    if args.grid_csv:
        _write(args.grid_csv, serialize.dump_grid_csv(sys, lom, 0))
    return EXIT_OK


def cmd_simulate(args) -> int:
    sys = serialize.load_system(_read(args.system))
    samples = parse_samples(args.samples) if args.samples else None
    resp = simulate.step_response(sys, parse_u0(args.u0), args.t_end, args.dt,
                                  sample_times=samples,
                                  rigid_basis=None if args.no_deflation else "auto")
    _write(args.out, serialize.dump_response_csv(resp))
    return EXIT_OK


def cmd_fit(args) -> int:
    resp = serialize.load_response_csv(_read(args.response))
    rep = regress.fit_trend(resp, parse_window(args.window))
    extra = {"fit": {"residual_rms": rep.residual_rms,
                     "condition_estimate": rep.condition_estimate,
                     "times": rep.times,
                     "residual_rms_dof": rep.residual_rms_dof}}
    _write(args.out, serialize.dump_lom(rep.to_lom(), extra))
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = validation.run_suite(args.suite)
    print(validation.format_table(checks))
    ok = all(c.passed for c in checks)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowfreq",
                                description="Low-frequency expansion of second-order systems.")
    p.add_argument("--threads", type=int, default=None,
                   help="cap the BLAS/LAPACK thread pools")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model", help="generate a system JSON")
    m.add_argument("--kind", choices=models.KINDS, required=True)
    m.add_argument("--config", help="model configuration JSON")
    m.add_argument("--n-elem", type=int, help="element count (string, beam)")
    m.add_argument("--mesh", help="plate mesh as MxxMy, e.g. 12x16")
    m.add_argument("--load", choices=("lumped", "consistent"), help="plate edge load")
    m.add_argument("--out", help="output path (default stdout)")
    m.set_defaults(func=cmd_model)

    lo = sub.add_parser("loworder", help="compute (w2, w1, w0)")
    lo.add_argument("system", help="system JSON ('-' for stdin)")
    lo.add_argument("--route", choices=("spectral", "algebraic"), default="algebraic")
    lo.add_argument("--channel", type=int, help="input channel (default all)")
    lo.add_argument("--out", help="output path (default stdout)")
    lo.add_argument("--grid-csv", help="also write displacement fields x,y,w2,w1,w0")
    lo.set_defaults(func=cmd_loworder)

    s = sub.add_parser("simulate", help="step response CSV")
    s.add_argument("system", help="system JSON ('-' for stdin)")
    s.add_argument("--u0", default="1", help="step amplitude(s), comma separated")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-end", type=float, default=4.0)
    s.add_argument("--samples", help="start:step:stop or t1,t2,... (default 3:0.1:4)")
    s.add_argument("--no-deflation", action="store_true",
                   help="do not deflate rigid modes in the integrator")
    s.add_argument("--out", help="output path (default stdout)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="regression fit of a response CSV")
    f.add_argument("response", help="response CSV ('-' for stdin)")
    f.add_argument("--window", help="t_start:t_stop (default the last 11 samples)")
    f.add_argument("--out", help="output path (default stdout)")
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("validate", help="run a reference scenario")
    v.add_argument("--suite", choices=tuple(validation.SUITES), required=True)
    v.set_defaults(func=cmd_validate)
    return p


def _report(exc: BaseException, code: int) -> int:
    _sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                  "exit_code": code}, ensure_ascii=False) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        return _report(InvalidInputError("--threads must be >= 1"), EXIT_INVALID)
    try:
        with threadpool_limits(limits=args.threads), warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (InvalidInputError, DimensionError) as exc:
        return _report(exc, EXIT_INVALID)
    except PreconditionError as exc:
        return _report(exc, EXIT_PRECONDITION)
    except NumericalError as exc:
        return _report(exc, EXIT_NUMERICAL)
    except LowFreqError as exc:
        return _report(exc, EXIT_INVALID)
    except OSError as exc:
        return _report(exc, EXIT_INVALID)


if __name__ == "__main__":
    raise SystemExit(main())
