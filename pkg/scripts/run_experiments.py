#!/usr/bin/env python3
"""Run the full experiment pipeline: train, sweep, bench, trace.

Usage:
    python3 scripts/run_experiments.py --config configs/desk.yaml [--seed N] [--out DIR]

Equivalent to running the four CLI subcommands in order, then printing a
compact summary of the cost-similarity sweep.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from semtext import harness


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", required=True, help="experiment YAML file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--out", default=None, help="override the output dir")
    args = parser.parse_args()

    try:
        cfg = harness.load_config(args.config, seed_override=args.seed,
                                  out_override=args.out)
        print("== train")
        manifest = harness.cmd_train(cfg)
        print(f"   vocab {manifest['corpus']['vocab_size']}, "
              f"train {manifest['corpus']['train_sentences']} sentences, "
              f"test {manifest['corpus']['test_sentences']} sentences")

        print("== sweep")
        rows = harness.cmd_sweep(cfg)
        print(f"   {len(rows)} cells -> {cfg.out_dir}/sweep.csv")
        header = f"   {'cell':38s} {'cbar':>7s} {'sbar':>7s} {'%WP':>6s} {'%WC':>6s}"
        print(header)
        for cell, m in rows:
            print(f"   {cell.cell_id:38s} {m.cbar:7.4f} {m.sbar:7.4f} "
                  f"{m.pct_wp:6.1f} {m.pct_wc:6.1f}")

        print("== bench")
        report = harness.cmd_bench(cfg)
        for name in ("mcm", "slm"):
            r = report[name]
            print(f"   {name}: mean {r['mean_ms']:.4f} ms over {r['n']} predictions")

        print("== trace")
        path = harness.cmd_trace(cfg)
        print(f"   {path}")
    except (harness.ConfigError, harness.StaleModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
