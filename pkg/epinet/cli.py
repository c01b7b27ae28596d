"""
epinet - Command Line Interface
Punto de entrada de línea de comandos

Uso:
----
    python -m epinet <experiment> [--config FILE] [--out DIR] [--seed N] [--jobs K]

Experimentos: analyze, simulate, montecarlo, scaling, vaccinate-sweep,
branching, examples. Cada uno escribe manifest.json y results.csv (más los
CSV propios del experimento) en el directorio de salida.

Códigos de salida:
------------------
0  éxito
1  fallo en ejecución (registrado con traceback)
2  configuración inválida o rechazada
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from analytics import UnsupportedRegimeError
from distributions import DomainError
from experiment_config import ExperimentConfig, Settings, load_experiment_config, load_settings
from harness import EXPERIMENTS, RefusedConfigurationError, run_experiment

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_REFUSED = 0, 1, 2
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# =============================================================================
# LOGGING
# =============================================================================

def configure_logging(settings: Settings, level: Optional[str] = None) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


# =============================================================================
# ARGUMENTOS
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epinet",
        description="Duration of supercritical SIR epidemics on configuration-model graphs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos de uso:
  python -m epinet analyze --config model.json --out results/analyze
  python -m epinet scaling --config scaling.json --out results/scaling --jobs 4
  python -m epinet examples --out results/examples
        """,
    )
    subparsers = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub = subparsers.add_parser(name, help=f"run the {name} experiment")
        sub.add_argument("--config", help="JSON experiment config (or bare parameter set)")
        sub.add_argument("--out", help="output directory (overrides output_dir)")
        sub.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
        sub.add_argument("--jobs", type=int, help="worker processes for replicates")
        sub.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    return parser


def resolve_config(args: argparse.Namespace, settings: Settings) -> ExperimentConfig:
    jobs = args.jobs if args.jobs is not None else (settings.default_jobs if settings.default_jobs > 1 else None)
    config = load_experiment_config(args.config, args.experiment, seed=args.seed, jobs=jobs, out=args.out)
    if settings.debug_invariants and not config.check_invariants:
        config = config.model_copy(update={"check_invariants": True})
    return config


# =============================================================================
# PUNTO DE ENTRADA
# =============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings()
    configure_logging(settings, args.log_level)

    try:
        config = resolve_config(args, settings)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_REFUSED
    except (OSError, ValueError) as e:
        logger.error(f"Could not read configuration: {e}")
        return EXIT_REFUSED

    try:
        table = run_experiment(config)
    except RefusedConfigurationError as e:
        logger.error(f"Refused configuration: {e}")
        return EXIT_REFUSED
    except (DomainError, UnsupportedRegimeError) as e:
        logger.error(f"Unsupported parameters: {e}")
        return EXIT_REFUSED
    except Exception as e:
        logger.error(f"Error in {args.experiment}: {e}", exc_info=True)
        return EXIT_FAILURE

    logger.info(f"{args.experiment} completed successfully: {len(table.rows)} rows in {config.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
