import argparse
import logging
import sys
from typing import Optional, Sequence

from app.core.config import LOG_LEVEL, RunMode, load_run_config
from app.core.errors import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NUMERICAL,
    ConfigError,
    NonConvergence,
    OutputError,
    StarkSpectraError,
)
from app.services.spectra import run

logger = logging.getLogger("stark_spectra")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stark-spectra",
        description="Spectra of the quantum Rabi-Stark model: sweeps, G-function roots, confluence and slow-mode analytics.",
    )
    parser.add_argument("mode", choices=[m.value for m in RunMode], help="What to compute.")
    parser.add_argument("--config", required=True, help="Run configuration file (INI sections).")
    parser.add_argument("--out", default=None, help="Override [output] path.")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads for per-g work. Defaults to [run] threads or STARK_SPECTRA_THREADS.",
    )
    parser.add_argument("--verbose", action="store_true", help="Log at INFO level.")
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.INFO if verbose else getattr(logging, LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s", stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    if args.threads is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_run_config(args.config, args.mode)
        config = config.with_overrides(output_path=args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logger.info("run_start mode=%s config=%s threads=%s", args.mode, args.config, config.threads)

    try:
        return run(config)
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonConvergence as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StarkSpectraError as exc:
        logger.exception("run_failed mode=%s", args.mode)
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
