"""Command-line runner: ``messcore <kind> [--spec FILE] [--out DIR] [--seed N] [--threads N]``.

Exit codes: 0 success, 2 spec validation failure, 3 solver non-convergence
(rows and envelope are still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from messcore.config import EXPERIMENT_KINDS, ExperimentSpec
from messcore.errors import NonConvergenceError, SpecValidationError
from messcore.experiments import ResultEnvelope, library_versions, run
from messcore.export import write_results
from messcore.scan import ScanTable

logger = logging.getLogger("messcore")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _threads(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="messcore", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--spec", type=Path, help="experiment YAML (default: the shipped spec)")
        p.add_argument("--out", type=Path, default=Path("results") / kind, help="output directory")
        p.add_argument("--seed", type=_seed, help="override the spec seed")
        p.add_argument("--threads", type=_threads, default=1)
        p.add_argument("--xlsx", action="store_true", help="also write rows.xlsx")
    v = sub.add_parser("validate", help="check a spec file without running it")
    v.add_argument("spec", type=Path)
    return parser


def load_spec(kind: str, path: Path | None, seed: int | None) -> ExperimentSpec:
    spec = ExperimentSpec.default(kind) if path is None else ExperimentSpec.from_yaml(path)
    if spec.kind != kind:
        raise SpecValidationError("kind", f"spec is for {spec.kind!r}, not {kind!r}")
    return spec if seed is None else spec.with_seed(seed)


def _failure_envelope(spec: ExperimentSpec, exc: Exception, started: str, clock: float) -> ResultEnvelope:
    table = ScanTable(("status",), [(f"{type(exc).__name__}: {exc}",)])
    return ResultEnvelope(spec, table, False, started, time.perf_counter() - clock, library_versions())


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")

    if args.kind == "validate":
        try:
            spec = ExperimentSpec.from_yaml(args.spec)
        except (SpecValidationError, OSError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"ok: {spec.kind}, seed {spec.seed}, l0 = {spec.l0:.6g}")
        return EXIT_OK

    try:
        spec = load_spec(args.kind, args.spec, args.seed)
    except (SpecValidationError, OSError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    clock = time.perf_counter()
    try:
        envelope = run(spec, threads=args.threads)
    except SpecValidationError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonConvergenceError as exc:
        logger.error("%s did not converge: %s", spec.kind, exc)
        envelope = _failure_envelope(spec, exc, started, clock)
        write_results(envelope, args.out, xlsx=args.xlsx, error=str(exc))
        return EXIT_NONCONVERGENCE

    paths = write_results(envelope, args.out, xlsx=args.xlsx)
    for p in paths:
        print(p)
    return EXIT_OK if envelope.converged else EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
