"""Command-line front end.

    chemoslab run study.yaml --out results --jobs 4
    chemoslab validate study.yaml
    chemoslab version

Exit codes: 0 success, 1 gate failure, 2 configuration error,
3 runtime or solver error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

from . import __version__
from .config import load_config
from .errors import ChemoslabError, ConfigurationError, SolverError, ValidationError
from .model import validate_compatibility
from .study import StudyResult, build_setup, manifest, run_study, write_manifest, write_outputs

EXIT_OK, EXIT_GATES, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("chemoslab")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chemoslab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the study described by a configuration file")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output.dir)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for sweep members")
    run.add_argument("--strict-gates", dest="gates", action="store_true", default=True,
                     help="gate failures set exit code 1 (default)")
    run.add_argument("--no-gates", dest="gates", action="store_false",
                     help="report gates but do not let them affect the exit code")
    val = sub.add_parser("validate", help="check configuration and compatibility conditions")
    val.add_argument("config")
    sub.add_parser("version", help="print the tool version")
    return p


def _validate(path) -> int:
    cfg = load_config(path)
    setup = build_setup(cfg)
    for eps in cfg.epsilons():
        setup.with_epsilon(eps)
    rep = validate_compatibility(setup)
    for c in rep.checks:
        print(f"{c.name:<24} {c.endpoint:<6} residual={c.residual:.3e} {'ok' if c.passed else 'FAIL'}")
    if not rep.passed and not cfg.study.allow_incompatible:
        print(f"compatibility conditions fail (tol {rep.tol:g})", file=sys.stderr)
        return EXIT_CONFIG
    print(f"configuration ok: {cfg.study.kind}, epsilons {cfg.epsilons()}")
    return EXIT_OK


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be at least 1")
    out = args.out or cfg.output.dir
    t0 = time.perf_counter()
    try:
        result = run_study(cfg, jobs=args.jobs)
    except (ConfigurationError, ValidationError):
        raise
    except Exception as exc:
        # the runner was reached, so a manifest is still owed
        partial = StudyResult(kind=cfg.study.kind, config=cfg, wall_time=time.perf_counter() - t0)
        partial.warnings.append(f"{type(exc).__name__}: {exc}")
        write_manifest(manifest(partial, status="failed", exit_code=EXIT_RUNTIME), out)
        raise
    if result.failures:
        code = EXIT_RUNTIME
    elif args.gates and not result.gates_passed:
        code = EXIT_GATES
    else:
        code = EXIT_OK
    write_outputs(result, out, exit_code=code)
    for name, g in result.gates.items():
        val = g.get("value")
        shown = f"{val:.4f}" if isinstance(val, float) else "n/a"
        print(f"gate {name:<20} {shown:>8}  [{g['lo']}, {g['hi']}]  {'pass' if g['passed'] else 'FAIL'}")
    for f in result.failures:
        print(f"run failed: {f}", file=sys.stderr)
    print(f"outputs written to {out} (exit {code})")
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "version":
            print(f"chemoslab {__version__}")
            return EXIT_OK
        if args.command == "validate":
            return _validate(args.config)
        return _run(args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ChemoslabError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
