import argparse
import logging
import sys
from pathlib import Path

sys.path.append(".")

from src.config import load_config, preset_path
from src.constants import FIGURE_PRESETS, PRESETS_DIR
from src.errors import ConfigError, PolaritonLabError
from src.runners import SUBCOMMANDS, run_subcommand

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polariton-lab",
        description="Dressed states, Stark splitting and fluorescence spectra "
        "of a driven four-level atom in a cavity.",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument(
        "figure",
        nargs="?",
        choices=FIGURE_PRESETS,
        help="bundled preset for `figures` (overrides --config)",
    )
    parser.add_argument("--config", type=Path, help="path of the run configuration")
    parser.add_argument("--out", type=Path, help="output directory override")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Parse the command line, run one subcommand and return its exit status."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        if args.figure is not None:
            if args.subcommand != "figures":
                raise ConfigError("a figure name is only accepted by `figures`")
            config = load_config(preset_path(args.figure, PRESETS_DIR))
            run = config.run.model_copy(update={"figure": args.figure})
            config = config.model_copy(update={"run": run})
        elif args.config is not None:
            config = load_config(args.config)
        else:
            raise ConfigError("--config is required unless a figure name is given")
        if args.out is not None:
            output = config.output.model_copy(update={"directory": args.out})
            config = config.model_copy(update={"output": output})
        result = run_subcommand(args.subcommand, config)
    except ConfigError as exc:
        logging.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except (PolaritonLabError, OSError, ValueError) as exc:
        logging.error("%s failed: %s", args.subcommand, exc)
        return EXIT_RUNTIME

    for path in result.artifacts:
        print(path)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
