"""Command line entry point.

    replayratio run     [--config FILE] [--<field> VALUE ...]
    replayratio single  --ratio 1:4 --k 0 --seed-index 0 [--checkpoint FILE]
    replayratio eval    --checkpoint FILE [--episodes 25] [--seed 0]
    replayratio grid    --ratio 1:4

Exit codes: 0 success (diverged runs allowed), 1 configuration error, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import (
    KINDS,
    evaluate_checkpoint,
    parse_config,
    run_experiment,
    run_single,
)
from .nncore import CheckpointError
from .ratio import K_VALUES, LearnRatio, lr_grid

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    group = p.add_argument_group("configuration fields")
    for name, kind in KINDS.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=f"cfg_{name}",
                           metavar=kind.upper().replace(" ", "_").replace("'", ""))


def _config_from(args):
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return parse_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replayratio", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full ratio x learning-rate sweep")
    _add_config_flags(p)

    p = sub.add_parser("single", help="train one (ratio, k, seed) cell")
    _add_config_flags(p)
    p.add_argument("--ratio", required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--seed-index", type=int, default=0)
    p.add_argument("--checkpoint", help="save the trained agent here")

    p = sub.add_parser("eval", help="evaluate an agent checkpoint greedily")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("grid", help="print the learning-rate grid for a ratio")
    p.add_argument("--ratio", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "grid":
            ratio = LearnRatio.parse(args.ratio)
            for k, lr in zip(K_VALUES, lr_grid(ratio)):
                print(f"{ratio}\tk={k:+d}\t{lr!r}")
            return EXIT_OK

        cfg = _config_from(args)
        if args.command == "run":
            result = run_experiment(cfg)
            for row in result.best():
                print(f"{row['ratio']}\tk={row['k']:+d}\tlr={row['learning_rate']:.3g}"
                      f"\tscore={row['score']:.2f}\treward={row['reward']:.1f}")
        elif args.command == "single":
            res = run_single(cfg, args.ratio, args.k, args.seed_index, args.checkpoint)
            print(json.dumps({
                "ratio": str(LearnRatio.parse(args.ratio)), "k": args.k, "seed": res.seed,
                "final_score": res.final_score, "final_reward": res.final_reward,
                "diverged": res.diverged, "n_updates": res.n_updates,
            }))
        elif args.command == "eval":
            point = evaluate_checkpoint(args.checkpoint, cfg.train, args.episodes, args.seed)
            print(json.dumps({"mean_score": point.mean_score, "mean_reward": point.mean_reward}))
    except (OSError, CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # ConfigError and invalid ratio strings
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
