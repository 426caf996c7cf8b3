"""Command-line experiment driver.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

Examples::

    fourierkan-gcf --synthetic default --model lightgcn --epochs 20 --out runs/lgcn
    fourierkan-gcf --dataset mooc.tsv --grid --layers 1,2,3,4 --out runs/sweep_L
    fourierkan-gcf --config exp.cfg --seed 3
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Sequence

from .data import compute_stats
from .experiment import (
    ABLATIONS,
    GRID_AXES,
    ExperimentConfig,
    emit_report,
    format_table,
    grid_search,
    load_graph,
    metric_order,
    run,
)
from .grad import ContractError

log = logging.getLogger("fourierkan_gcf")

_FIELD_TYPES = {
    "dataset": str,
    "synthetic": str,
    "delimiter": str,
    "model": str,
    "dim": int,
    "layers": int,
    "grid_size": int,
    "spline_grid": int,
    "spline_order": int,
    "activation": str,
    "shared_weights": bool,
    "msg_dropout": float,
    "node_dropout": float,
    "l2": float,
    "lr": float,
    "epochs": int,
    "batch_size": int,
    "seed": int,
    "topk": "ints",
    "eval_every": int,
    "grid": bool,
    "grid_axes": "names",
    "ablation": str,
    "out": str,
    "jobs": int,
}

class UsageError(Exception):
    pass


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _convert(key: str, text: str) -> Any:
    """Convert one textual value; returns a tuple for comma lists on grid axes."""
    kind = _FIELD_TYPES[key]
    if kind == "ints":
        return tuple(int(v) for v in text.split(",") if v.strip())
    if kind == "names":
        return tuple(v.strip().replace("-", "_") for v in text.split(",") if v.strip())
    if kind is bool:
        return _to_bool(text)
    if key in GRID_AXES and "," in text:
        return tuple(kind(v) for v in text.split(",") if v.strip())
    if kind is str and key == "delimiter":
        return {"\\t": "\t", "tab": "\t", "comma": ","}.get(text, text)
    return kind(text)


def read_config_file(path: str) -> dict[str, Any]:
    """Flat ``key = value`` file; ``#`` starts a comment, keys mirror the flags."""
    values: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _FIELD_TYPES or key == "config":
                raise UsageError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
            try:
                values[key] = _convert(key, value.strip())
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fourierkan-gcf",
        description="Train and evaluate graph collaborative filtering models.",
    )
    p.add_argument("--config", help="flat key=value config file; flags override it")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="interaction file: user, item, timestamp per line")
    src.add_argument("--synthetic", help="synthetic spec, e.g. users=200,items=100,blocks=4,edges=10,noise=0.1,seed=7")
    p.add_argument("--delimiter", help="field delimiter of --dataset (default: tab)")
    p.add_argument("--model", help="ngcf, ngcf-f1, ngcf-f2, ngcf-i, ngcf-n, lightgcn, kan-gcf, fourierkan-gcf")
    p.add_argument("--dim", help="embedding size (default 64)")
    p.add_argument("--layers", help="propagation layers L (comma list in grid mode)")
    p.add_argument("--grid-size", dest="grid_size", help="Fourier frequencies g (comma list in grid mode)")
    p.add_argument("--spline-grid", dest="spline_grid", help="B-spline intervals for kan-gcf (default: grid size)")
    p.add_argument("--activation", choices=["leaky_relu", "sigmoid", "identity"])
    p.add_argument("--msg-dropout", dest="msg_dropout", help="message dropout ratio p_m")
    p.add_argument("--node-dropout", dest="node_dropout", help="node dropout ratio p_n")
    p.add_argument("--l2", help="L2 strength lambda")
    p.add_argument("--lr", help="Adam learning rate")
    p.add_argument("--epochs")
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--eval-every", dest="eval_every", help="validate every N epochs")
    p.add_argument("--seed")
    p.add_argument("--topk", help="comma list of K (default 10,20,50)")
    p.add_argument(
        "--grid",
        nargs="?",
        const="",
        default=None,
        metavar="AXES",
        help=f"grid-search mode; optionally restrict swept axes to a comma list of {','.join(GRID_AXES)}",
    )
    p.add_argument("--ablation", choices=sorted(ABLATIONS))
    p.add_argument("--jobs", help="parallel grid trials")
    p.add_argument("--out", help="output directory for reports")
    p.add_argument("--stats", action="store_true", help="print dataset statistics and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, Any] = read_config_file(args.config) if args.config else {}
    for key in _FIELD_TYPES:
        raw = getattr(args, key, None)
        if key == "grid" or raw is None:
            continue
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise UsageError(f"--{key.replace('_', '-')}: {exc}") from None
    if args.grid is not None:
        values["grid"] = True
        if args.grid:
            values["grid_axes"] = _convert("grid_axes", args.grid)
    if values.get("dataset") and values.get("synthetic"):
        raise UsageError("--dataset and --synthetic are mutually exclusive")
    sweep = {}
    for key in GRID_AXES:
        if isinstance(values.get(key), tuple):
            sweep[key] = values.pop(key)
    if sweep:
        values["sweep"] = sweep
    return ExperimentConfig(**values)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except (UsageError, ContractError, ValueError, TypeError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"fourierkan-gcf: error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.stats:
            graph = load_graph(config)
            print(compute_stats(graph))
            return 0
        if config.grid:
            report, rows = grid_search(config)
        else:
            report, rows = run(config), None
        if config.out:
            for path in emit_report(report, config.out, rows):
                log.info("wrote %s", path)
        keys = metric_order(report.test_metrics)
        row = {"model": config.model, **{k: report.test_metrics[k] for k in keys}}
        print(format_table([row], ["model", *keys]), end="")
        if rows:
            print(f"{len(rows)} grid cells; best valid recall@20 {report.best_valid:.4f}")
        return 0
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        log.debug("run failed", exc_info=True)
        print(f"fourierkan-gcf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
