#!/usr/bin/env python3
"""
Main CLI entry point for the Kawahara numerical laboratory
"""

import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from src.config_loader import ConfigLoader
from src.exceptions import ConfigError, NumericalError
from src.models import ScenarioKind
from src.scenario_runner import ScenarioRunner

LOG_FILE = "kawahara_lab.log"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger(__name__)


class UTF8StreamHandler(logging.StreamHandler):
    """StreamHandler that uses UTF-8 encoding for Windows compatibility"""
    def __init__(self, stream=None):
        if stream is None:
            stream = sys.stdout
        if sys.platform == 'win32' and hasattr(stream, 'reconfigure'):
            try:
                stream.reconfigure(encoding='utf-8', errors='replace')
            except (AttributeError, ValueError):
                pass
        super().__init__(stream)


def setup_logging(verbose: bool = False):
    """Console plus kawahara_lab.log, configured once per process"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            UTF8StreamHandler(sys.stdout),
            logging.FileHandler(LOG_FILE, encoding='utf-8')
        ]
    )


def build_parser() -> argparse.ArgumentParser:
    """Subcommand per scenario, shared run options on each"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        type=str,
        default=None,
        help='Path to configuration YAML file (default: config/default_config.yaml)'
    )
    common.add_argument(
        '--out',
        type=str,
        default=None,
        help='Output directory (overrides config and KAWAHARA_OUTPUT_DIR)'
    )
    common.add_argument(
        '--seed',
        type=int,
        default=None,
        help='Experiment seed (overrides config and KAWAHARA_SEED)'
    )
    common.add_argument(
        '--threads',
        type=int,
        default=None,
        help='Parallel sweep points (overrides config and KAWAHARA_THREADS)'
    )
    common.add_argument(
        '--verbose',
        action='store_true',
        help='Log sweep progress at DEBUG level'
    )

    parser = argparse.ArgumentParser(
        description='Kawahara / modified Kawahara numerical laboratory',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py solve
  python main.py resonance-scan --config experiments/resonance.yaml
  python main.py block-norm --seed 7 --threads 4 --out runs/blocks

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 anything else
        """
    )
    subparsers = parser.add_subparsers(dest='scenario', required=True, metavar='scenario')
    for kind in ScenarioKind:
        subparsers.add_parser(kind.value, parents=[common], help=f'Run the {kind.value} scenario')
    return parser


async def run(args: argparse.Namespace) -> int:
    """Load, override, validate and run one scenario"""
    config = ConfigLoader.load_config(args.config)
    raw = ConfigLoader.select_scenario(config, args.scenario)

    # CLI overrides beat config file and environment
    if args.out is not None:
        raw['output_dir'] = args.out
    if args.seed is not None:
        raw['seed'] = args.seed
    if args.threads is not None:
        raw['threads'] = args.threads

    experiment = ConfigLoader.parse_experiment_config(raw)
    manifest = await ScenarioRunner(experiment).run()

    logger.info("\n" + "=" * 60)
    logger.info("Execution Complete!")
    logger.info("=" * 60)
    logger.info(f"Artifacts written to: {experiment.output_dir}/{experiment.scenario.value}")
    for name in sorted(manifest.artifacts):
        logger.debug(f"  {name}  {manifest.artifacts[name][:12]}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run, and map failures to exit codes"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return asyncio.run(run(args))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except Exception as e:
        logger.error(f"Error during execution: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
