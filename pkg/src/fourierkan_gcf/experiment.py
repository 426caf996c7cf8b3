"""Single runs, hyperparameter grids and report files."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from .data import InteractionFormat, compute_stats, generate_synthetic, load_interactions
from .evaluation import DEFAULT_KS, chronological_split, evaluate_model
from .grad import ContractError
from .graph import InteractionGraph, build_normalized_adjacency
from .models import GCFModel, ModelConfig, Variant
from .training import (
    SEARCH_DROPOUT_GRID,
    SEARCH_GRID_SIZES,
    SEARCH_L2_GRID,
    SEARCH_LAYER_GRID,
    AdamState,
    TrainConfig,
    train_epoch,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SELECTION_METRIC = "recall@20"
GRID_AXES = ("l2", "layers", "grid_size", "msg_dropout", "node_dropout")
SEARCH_GRID = {
    "l2": SEARCH_L2_GRID,
    "layers": SEARCH_LAYER_GRID,
    "grid_size": SEARCH_GRID_SIZES,
    "msg_dropout": SEARCH_DROPOUT_GRID,
    "node_dropout": SEARCH_DROPOUT_GRID,
}
ABLATIONS = {"none": {}, "no-md": {"msg_dropout": 0.0}, "no-nd": {"node_dropout": 0.0}}


@dataclass(frozen=True)
class SyntheticSpec:
    users: int = 200
    items: int = 100
    blocks: int = 4
    edges: int = 10
    noise: float = 0.1
    seed: int = 7

    @classmethod
    def parse(cls, text: str) -> "SyntheticSpec":
        """``"users=200,items=100,blocks=4,edges=10,noise=0.1,seed=7"``; omitted keys use defaults."""
        kwargs: dict[str, Any] = {}
        text = text.strip()
        if text in ("", "default"):
            return cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for part in text.split(","):
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise ContractError(f"bad synthetic spec entry {part!r}; keys: {', '.join(types)}")
            kwargs[key] = float(value) if key == "noise" else int(value)
        return cls(**kwargs)

    def __str__(self) -> str:
        return ",".join(f"{f.name}={getattr(self, f.name)}" for f in dataclasses.fields(self))


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    synthetic: str | None = None
    delimiter: str = "\t"
    model: str = "fourierkan-gcf"
    dim: int = 64
    layers: int = 3
    grid_size: int = 2
    spline_grid: int | None = None
    spline_order: int = 3
    activation: str = "leaky_relu"
    shared_weights: bool = False
    msg_dropout: float = 0.1
    node_dropout: float = 0.1
    l2: float = 1e-4
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 2048
    seed: int = 0
    topk: tuple[int, ...] = DEFAULT_KS
    eval_every: int = 1
    grid: bool = False
    grid_axes: tuple[str, ...] = ()
    ablation: str = "none"
    out: str | None = None
    jobs: int = 1
    sweep: dict[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        self.model = Variant.parse(self.model).value
        if self.ablation not in ABLATIONS:
            raise ContractError(f"ablation must be one of {', '.join(ABLATIONS)}")
        if self.dataset and self.synthetic:
            raise ContractError("give either a dataset path or a synthetic spec, not both")
        self.topk = tuple(sorted(set(int(k) for k in self.topk)))
        if not self.topk or self.topk[0] < 1:
            raise ContractError("need at least one K >= 1")
        self.grid_axes = tuple(self.grid_axes)
        unknown = (set(self.sweep) | set(self.grid_axes)) - set(GRID_AXES)
        if unknown:
            raise ContractError(f"cannot sweep {sorted(unknown)}")
        for key, value in ABLATIONS[self.ablation].items():
            setattr(self, key, value)
        if (self.sweep or self.grid_axes) and not self.grid:
            raise ContractError("value lists and grid axes are only allowed in grid mode")
        self.model_config()
        self.train_config()

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            variant=Variant.parse(self.model),
            dim=self.dim,
            layers=self.layers,
            grid_size=self.grid_size,
            spline_intervals=self.spline_grid or self.grid_size,
            spline_order=self.spline_order,
            activation=self.activation,
            shared_weights=self.shared_weights,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            l2=self.l2,
            epochs=self.epochs,
            batch_size=self.batch_size,
            msg_dropout=self.msg_dropout,
            node_dropout=self.node_dropout,
            seed=self.seed,
        )

    def echo(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("jobs")
        d["topk"] = list(self.topk)
        d["sweep"] = {k: list(v) for k, v in sorted(self.sweep.items())}
        d["grid_axes"] = list(self.grid_axes)
        return d


@dataclass
class RunReport:
    config: dict[str, Any]
    dataset_stats: dict[str, Any]
    epoch_losses: list[float]
    valid_curve: list[tuple[int, float]]
    best_epoch: int
    best_valid: float
    test_metrics: dict[str, float]
    seed: int
    wall_time: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        """Deterministic serialization; wall time is excluded."""
        d = dataclasses.asdict(self)
        d.pop("wall_time")
        d["valid_curve"] = [list(p) for p in self.valid_curve]
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def load_graph(config: ExperimentConfig) -> InteractionGraph:
    if config.dataset:
        return load_interactions(config.dataset, InteractionFormat(delimiter=config.delimiter)).graph
    spec = SyntheticSpec.parse(config.synthetic or "default")
    return generate_synthetic(spec.users, spec.items, spec.blocks, spec.edges, spec.noise, spec.seed)


def run(config: ExperimentConfig, graph: InteractionGraph | None = None) -> RunReport:
    """Split, train with validation checkpointing, test the best checkpoint."""
    start = time.perf_counter()
    graph = load_graph(config) if graph is None else graph
    split = chronological_split(graph)
    adj = build_normalized_adjacency(split.train)
    mcfg, tcfg = config.model_config(), config.train_config()
    model = GCFModel.init(mcfg, graph.num_users, graph.num_items, seed=tcfg.seed)
    state = AdamState()
    ks = sorted(set(config.topk) | {20})

    losses: list[float] = []
    curve: list[tuple[int, float]] = []
    best_epoch, best_valid, best_state = 0, -1.0, model.state_dict()
    for epoch in range(1, tcfg.epochs + 1):
        stats = train_epoch(model, split.train, adj, tcfg, state, epoch)
        losses.append(stats.mean_loss)
        if epoch % config.eval_every == 0 or epoch == tcfg.epochs:
            out = model.forward(adj)
            valid = evaluate_model(out.final_user, out.final_item, split, ks, target="valid")
            score = valid[SELECTION_METRIC]
            curve.append((epoch, score))
            log.info("epoch %d loss %.4f valid %s %.4f", epoch, stats.mean_loss, SELECTION_METRIC, score)
            if score > best_valid:
                best_epoch, best_valid, best_state = epoch, score, model.state_dict()

    model.load_state_dict(best_state)
    out = model.forward(adj)
    test = evaluate_model(out.final_user, out.final_item, split, config.topk, target="test")
    stats = compute_stats(graph)
    return RunReport(
        config=config.echo(),
        dataset_stats=dataclasses.asdict(stats),
        epoch_losses=losses,
        valid_curve=curve,
        best_epoch=best_epoch,
        best_valid=max(best_valid, 0.0),
        test_metrics=test.mean,
        seed=config.seed,
        wall_time=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# grid search


def grid_cells(config: ExperimentConfig) -> list[dict[str, Any]]:
    """Cartesian product over the swept axes, in fixed axis order.

    Swept axes are those named in ``grid_axes`` (search-grid values) plus those
    with explicit value lists in ``sweep``; with neither, all five
    axes are swept. Unswept axes keep the config's scalar value. The
    grid-size axis only sweeps its search values for the Fourier variant.
    """
    swept = set(config.grid_axes) | set(config.sweep)
    if not swept:
        swept = set(GRID_AXES)
    axes: dict[str, Sequence] = {}
    for name in GRID_AXES:
        if name in config.sweep:
            axes[name] = tuple(dict.fromkeys(config.sweep[name]))
        elif name in swept and not (
            name == "grid_size" and Variant.parse(config.model) is not Variant.FOURIERKAN_GCF
        ):
            axes[name] = SEARCH_GRID[name]
        else:
            axes[name] = (getattr(config, name),)
    for key, value in ABLATIONS[config.ablation].items():
        axes[key] = (value,)
    return [dict(zip(axes, values)) for values in itertools.product(*axes.values())]


def _run_cell(config: ExperimentConfig, cell: dict[str, Any], graph: InteractionGraph) -> RunReport:
    cfg = dataclasses.replace(config, sweep={}, grid_axes=(), grid=False, **cell)
    return run(cfg, graph)


def grid_search(config: ExperimentConfig) -> tuple[RunReport, list[dict[str, Any]]]:
    """Run every grid cell; pick the best by validation Recall@20."""
    if not config.grid:
        raise ContractError("grid search needs grid mode")
    cells = grid_cells(config)
    graph = load_graph(config)
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            reports = list(pool.map(_run_cell, [config] * len(cells), cells, [graph] * len(cells)))
    else:
        reports = [_run_cell(config, cell, graph) for cell in cells]

    rows = []
    for idx, (cell, rep) in enumerate(zip(cells, reports)):
        rows.append(
            {"index": idx, "model": config.model, **cell, "best_epoch": rep.best_epoch,
             "valid_recall@20": rep.best_valid, **rep.test_metrics}
        )
    best = max(range(len(reports)), key=lambda k: (reports[k].best_valid, -k))
    return reports[best], rows


# ---------------------------------------------------------------------------
# report files


def _metric_label(key: str) -> str:
    name, k = key.split("@")
    return {"recall": "R", "ndcg": "N"}[name] + "@" + k


def metric_order(keys) -> list[str]:
    return sorted(keys, key=lambda s: (s.split("@")[0] != "recall", int(s.split("@")[1])))


def format_table(rows: list[dict[str, Any]], columns: list[str]) -> str:
    """Aligned plain-text table; floats at 4 decimals."""
    cells = [[f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]) for c in columns] for r in rows]
    heads = [_metric_label(c) if "@" in c and c.split("@")[0] in ("recall", "ndcg") else c for c in columns]
    widths = [max(len(h), *(len(row[j]) for row in cells)) for j, h in enumerate(heads)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(heads, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, out_dir: str, grid_rows: list[dict[str, Any]] | None = None) -> list[str]:
    """Write report.txt, metrics.tsv, report.json (and grid.tsv); return the paths.

    metrics.tsv schema v1: first line ``# fourierkan-gcf metrics schema <v>``,
    then a header ``model<TAB>seed<TAB>best_epoch<TAB>recall@K...<TAB>ndcg@K...``
    and one data row with floats in round-trip ``repr`` form.
    """
    if not report.test_metrics:
        raise ContractError("report has no metrics")
    os.makedirs(out_dir, exist_ok=True)
    keys = metric_order(report.test_metrics)
    model = report.config.get("model", "")
    paths = []

    row = {"model": model, **{k: report.test_metrics[k] for k in keys}}
    human = [
        f"model: {model}",
        f"seed: {report.seed}",
        f"best epoch: {report.best_epoch} (valid {SELECTION_METRIC} {report.best_valid:.4f})",
        f"dataset: {report.dataset_stats}",
        "",
        format_table([row], ["model", *keys]),
    ]
    paths.append(_write(os.path.join(out_dir, "report.txt"), "\n".join(human)))

    with open(os.path.join(out_dir, "metrics.tsv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# fourierkan-gcf metrics schema {SCHEMA_VERSION}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["model", "seed", "best_epoch", *keys])
        w.writerow([model, report.seed, report.best_epoch, *(repr(report.test_metrics[k]) for k in keys)])
    paths.append(os.path.join(out_dir, "metrics.tsv"))

    paths.append(_write(os.path.join(out_dir, "report.json"), report.to_json()))
    paths.append(_write(os.path.join(out_dir, "timing.json"), json.dumps({"wall_time": report.wall_time}) + "\n"))

    if grid_rows:
        columns = list(grid_rows[0])
        with open(os.path.join(out_dir, "grid.tsv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# fourierkan-gcf grid schema {SCHEMA_VERSION}\n")
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(columns)
            for r in grid_rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
        paths.append(os.path.join(out_dir, "grid.tsv"))
        paths.append(_write(os.path.join(out_dir, "grid.txt"), format_table(grid_rows, columns)))
    return paths


def read_metrics(path: str) -> dict[str, Any]:
    """Parse a metrics.tsv written by :func:`emit_report`."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# fourierkan-gcf metrics schema"):
            raise ContractError(f"{path}: not a metrics file")
        version = int(first.split()[-1])
        if version != SCHEMA_VERSION:
            raise ContractError(f"{path}: unsupported schema version {version}")
        header, values = list(csv.reader(fh, delimiter="\t"))[:2]
    out: dict[str, Any] = dict(zip(header, values))
    out["seed"] = int(out["seed"])
    out["best_epoch"] = int(out["best_epoch"])
    for k in header[3:]:
        out[k] = float(out[k])
    return out


def _write(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
