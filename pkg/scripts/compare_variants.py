"""Train every model variant on the synthetic block dataset and print one table.

    python scripts/compare_variants.py --epochs 50 --out runs/variants
"""

import argparse
import os

from fourierkan_gcf.data import generate_synthetic
from fourierkan_gcf.experiment import ExperimentConfig, emit_report, format_table, metric_order, run
from fourierkan_gcf.models import Variant


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--synthetic", default="default")
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--layers", type=int, default=3)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--batch-size", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = []
    for variant in Variant:
        cfg = ExperimentConfig(
            synthetic=args.synthetic, model=variant.value, dim=args.dim, layers=args.layers,
            epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=args.seed,
        )
        report = run(cfg)
        keys = metric_order(report.test_metrics)
        rows.append({"model": variant.value, **{k: report.test_metrics[k] for k in keys},
                     "seconds": f"{report.wall_time:.1f}"})
        print(f"{variant.value}: R@20 {report.test_metrics['recall@20']:.4f}", flush=True)
        if args.out:
            emit_report(report, os.path.join(args.out, variant.value))
    print(format_table(rows, list(rows[0])), end="")


if __name__ == "__main__":
    main()
