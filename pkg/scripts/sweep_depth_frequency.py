"""Test Recall@20 / NDCG@20 of FourierKAN-GCF as a function of depth L and frequency count g.

    python scripts/sweep_depth_frequency.py --epochs 30
"""

import argparse

from fourierkan_gcf.experiment import ExperimentConfig, format_table, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--synthetic", default="default")
    ap.add_argument("--dataset")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--layers", default="1,2,3,4")
    ap.add_argument("--grid-sizes", default="1,2,4,8")
    ap.add_argument("--lr", type=float, default=0.01)
    args = ap.parse_args()

    base = dict(dataset=args.dataset, synthetic=None if args.dataset else args.synthetic,
                model="fourierkan-gcf", dim=args.dim, epochs=args.epochs, lr=args.lr, batch_size=256)
    rows = []
    for L in (int(v) for v in args.layers.split(",")):
        for g in (int(v) for v in args.grid_sizes.split(",")):
            rep = run(ExperimentConfig(layers=L, grid_size=g, **base))
            rows.append({"L": L, "g": g, "recall@20": rep.test_metrics["recall@20"],
                         "ndcg@20": rep.test_metrics["ndcg@20"], "best_epoch": rep.best_epoch})
            print(f"L={L} g={g} done", flush=True)
    print(format_table(rows, ["L", "g", "recall@20", "ndcg@20", "best_epoch"]), end="")


if __name__ == "__main__":
    main()
