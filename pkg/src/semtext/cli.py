"""Command-line entry point: train, sweep, bench, trace."""

from __future__ import annotations

import argparse
import sys

from . import harness


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtext",
        description="Predictive text transmission experiments: train models, "
                    "sweep policies, benchmark predictors, dump traces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("train", "train all models and write artifacts + manifest"),
            ("sweep", "run the policy sweep and write CSV + plot data"),
            ("bench", "measure per-word prediction latency"),
            ("trace", "dump one session's per-word trace")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment YAML file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--out", default=None, help="override the output dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = harness.load_config(args.config, seed_override=args.seed,
                                  out_override=args.out)
        if args.command == "train":
            manifest = harness.cmd_train(cfg)
            for name, entry in sorted(manifest["artifacts"].items()):
                print(f"wrote {name}  sha256={entry['sha256'][:12]}")
            print(f"manifest: {cfg.out_dir}/manifest.json")
        elif args.command == "sweep":
            rows = harness.cmd_sweep(cfg)
            print(f"wrote {cfg.out_dir}/sweep.csv ({len(rows)} rows)")
        elif args.command == "bench":
            report = harness.cmd_bench(cfg)
            for name in ("mcm", "slm"):
                r = report[name]
                print(f"{name}: mean {r['mean_ms']:.4f} ms, "
                      f"median {r['median_ms']:.4f} ms over {r['n']} predictions")
            print(f"slm/mcm mean ratio: {report['slm_over_mcm_mean_ratio']:.1f}x")
        elif args.command == "trace":
            path = harness.cmd_trace(cfg)
            print(f"wrote {path}")
    except (harness.ConfigError, harness.StaleModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
