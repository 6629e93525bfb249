"""Command-line interface.

Every configuration key is mirrored as a flag (``--event.trigger 0.4``), can
be set in a ``--config`` file, or via a ``SURGE_``-prefixed environment
variable. Precedence: CLI > environment > file > defaults. Exit status is 0
on success and 1 on failure with a stage-tagged message on stderr.
"""

from __future__ import annotations

import argparse
import sys

from .errors import SurgeError
from .pipeline import (
    CONFIG_SCHEMA,
    cmd_build_features,
    cmd_detect_events,
    cmd_evaluate,
    cmd_grid_search,
    cmd_predict,
    cmd_reduce_features,
    cmd_synth,
    cmd_train,
    parse_config_file,
    resolve_config,
    run_end_to_end,
)

_COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic corpus into paths.out"),
    "detect-events": (cmd_detect_events, "detect surge events from gauge files"),
    "build-features": (cmd_build_features, "assemble the (storm, point) feature matrix"),
    "reduce-features": (cmd_reduce_features, "drop correlated features above feature.tau"),
    "train": (cmd_train, "train the two-stage model"),
    "grid-search": (cmd_grid_search, "evaluate all classifier x regressor pairs"),
    "predict": (cmd_predict, "predict peak surge for the test split"),
    "evaluate": (cmd_evaluate, "score predictions and write metric reports"),
    "run": (None, "run the full pipeline end to end"),
}

_ALIASES = {
    "reduce-features": {"--tau": "feature.tau"},
    "train": {"--classifier": "model.classifier", "--regressor": "model.regressor"},
    "run": {"--classifier": "model.classifier", "--regressor": "model.regressor"},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surgekit",
                                     description="Peak storm surge surrogate modeling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key=value configuration file")
        for key, (_, _, key_help) in CONFIG_SCHEMA.items():
            p.add_argument(f"--{key}", dest=key, default=None, metavar="V", help=key_help)
        for alias, key in _ALIASES.get(name, {}).items():
            p.add_argument(alias, dest=key, default=None, metavar="V",
                           help=f"alias for --{key}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    values = vars(args)
    try:
        file_values = parse_config_file(args.config) if args.config else None
        cli_values = {k: v for k, v in values.items() if k in CONFIG_SCHEMA and v is not None}
        cfg = resolve_config(file_values, cli_values)
        if args.command == "run":
            manifest = run_end_to_end(cfg)
            m = manifest["metrics"]
            print(f"run complete: r2={m['r2']:.4f} rmse={m['rmse']:.4f} mae={m['mae']:.4f} n={m['n']}")
        else:
            fn, _ = _COMMANDS[args.command]
            artifact = fn(cfg)
            print(f"{args.command}: wrote {artifact}")
    except SurgeError as e:
        print(f"surgekit {args.command}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
