"""Batch experiment runner: seeded suites, summaries, heatmap exports.

A suite is a list of cells (named run configurations, seed omitted) plus a
repeat count and a seed base.  Repeat ``r`` of a cell derives its seed from
``seed_base`` and a stable hash of ``(seed_group, r)``; cells default to
their own id as seed group, and paired cells (e.g. a detection variant and
the only_learning baseline it is compared with) can share one so they see
common random numbers.

Outputs under the target directory:

* ``runs/<cell>/rep_<r>.json`` — canonical (timing-free) run records,
  byte-identical across reruns of the same suite;
* ``timings.csv`` — wall-clock per run (non-deterministic by nature);
* ``summary.csv``, ``heatmap.csv``, ``interactions.csv``, ``pairs.csv`` —
  aggregated views, regenerable from the runs directory alone.
"""

from __future__ import annotations

import csv
import hashlib
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .core import ParameterError
from .orchestrator import RunConfig, RunRecord, run

SUITE_FORMAT = "suite-v1"
SUMMARY_SCHEMA = "summary-v1"
HEATMAP_SCHEMA = "heatmap-v1"
INTERACTIONS_SCHEMA = "interactions-v1"
PAIRS_SCHEMA = "pairs-v1"

SMOKE_OVERRIDES = {
    "total_generations": 150,
    "generations_before_first": 60,
    "generations_between": 15,
}
SMOKE_REPEATS = 5


@dataclass
class SuiteCell:
    id: str
    config: dict
    seed_group: str | None = None

    def group(self) -> str:
        return self.seed_group if self.seed_group else self.id


@dataclass
class ExperimentSuite:
    name: str
    repeats: int
    seed_base: int
    cells: list[SuiteCell] = field(default_factory=list)

    def __post_init__(self):
        ids = [c.id for c in self.cells]
        if len(set(ids)) != len(ids):
            raise ParameterError("cell ids must be unique")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSuite":
        if data.get("format", SUITE_FORMAT) != SUITE_FORMAT:
            raise ParameterError(f"unsupported suite format {data.get('format')!r}")
        cells = [
            SuiteCell(id=c["id"], config=dict(c["config"]), seed_group=c.get("seed_group"))
            for c in data["cells"]
        ]
        return cls(
            name=data.get("name", "suite"),
            repeats=int(data.get("repeats", 1)),
            seed_base=int(data.get("seed_base", 0)),
            cells=cells,
        )

    @classmethod
    def load(cls, path) -> "ExperimentSuite":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "format": SUITE_FORMAT,
            "name": self.name,
            "repeats": self.repeats,
            "seed_base": self.seed_base,
            "cells": [
                {"id": c.id, "config": c.config, "seed_group": c.seed_group} for c in self.cells
            ],
        }


def cell_seed(seed_base: int, seed_group: str, repeat: int) -> int:
    """Stable across platforms and processes: seed_base + sha256(group|repeat)."""
    digest = hashlib.sha256(f"{seed_group}|{repeat}".encode()).digest()
    return seed_base + int.from_bytes(digest[:6], "big")


def apply_smoke(config: dict) -> dict:
    out = dict(config)
    out.update(SMOKE_OVERRIDES)
    return out


def _execute_run(config: dict, seed: int) -> dict:
    cfg_dict = dict(config)
    cfg_dict["seed"] = seed
    cfg = RunConfig.from_dict(cfg_dict)
    record = run(cfg)
    return {
        "canonical": record.to_json(canonical=True),
        "wall_clock_seconds": record.wall_clock_seconds,
    }


def run_suite(suite: ExperimentSuite, out_dir, jobs: int = 1, smoke: bool = False) -> Path:
    """Execute every (cell, repeat), write records and aggregates; returns out_dir.

    A failed run is recorded as ``rep_<r>.error.txt`` and the suite
    continues; the cell's summary row reflects the reduced repeat count.
    """
    out = Path(out_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    repeats = min(suite.repeats, SMOKE_REPEATS) if smoke else suite.repeats

    tasks = []
    for cell in suite.cells:
        cell_dir = runs_dir / cell.id
        cell_dir.mkdir(parents=True, exist_ok=True)
        config = apply_smoke(cell.config) if smoke else cell.config
        for rep in range(repeats):
            seed = cell_seed(suite.seed_base, cell.group(), rep)
            tasks.append((cell.id, rep, config, seed))

    timings = []

    def handle(cell_id: str, rep: int, outcome: dict | Exception) -> None:
        cell_dir = runs_dir / cell_id
        if isinstance(outcome, Exception):
            text = "".join(traceback.format_exception(outcome))
            (cell_dir / f"rep_{rep}.error.txt").write_text(text, encoding="utf-8")
            return
        (cell_dir / f"rep_{rep}.json").write_text(outcome["canonical"], encoding="utf-8")
        timings.append((cell_id, rep, outcome["wall_clock_seconds"]))

    if jobs <= 1:
        for cell_id, rep, config, seed in tasks:
            try:
                handle(cell_id, rep, _execute_run(config, seed))
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                handle(cell_id, rep, exc)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_execute_run, config, seed): (cell_id, rep)
                for cell_id, rep, config, seed in tasks
            }
            for future, (cell_id, rep) in futures.items():
                try:
                    handle(cell_id, rep, future.result())
                except Exception as exc:  # noqa: BLE001
                    handle(cell_id, rep, exc)

    resolved = ExperimentSuite(
        name=suite.name, repeats=repeats, seed_base=suite.seed_base, cells=suite.cells
    )
    (out / "suite.json").write_text(json.dumps(resolved.to_dict(), indent=2), encoding="utf-8")
    _write_csv(
        out / "timings.csv",
        ["cell_id", "repeat", "wall_clock_seconds"],
        [[c, r, f"{t:.3f}"] for c, r, t in sorted(timings)],
    )
    summarize(out, out / "summary.csv", pairs_out=out / "pairs.csv", long_out=out / "interactions.csv")
    heatmap(out, out / "heatmap.csv")
    return out


def load_records(in_dir) -> dict[str, list[tuple[int, RunRecord]]]:
    """Records per cell id, sorted by repeat; corrupt files are skipped with a warning."""
    runs_dir = Path(in_dir) / "runs"
    if not runs_dir.is_dir():
        raise ParameterError(f"{in_dir} does not look like a suite output directory")
    out: dict[str, list[tuple[int, RunRecord]]] = {}
    for cell_dir in sorted(p for p in runs_dir.iterdir() if p.is_dir()):
        records = []
        for path in sorted(cell_dir.glob("rep_*.json")):
            rep = int(path.stem.split("_")[1])
            try:
                records.append((rep, RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))))
            except (json.JSONDecodeError, KeyError, ParameterError) as exc:
                print(f"warning: skipping corrupt record {path}: {exc}")
        out[cell_dir.name] = records
    return out


def t_interval(values: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Two-sided t confidence interval for the mean; degenerate cases collapse."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    mean = float(values.mean())
    if n < 2:
        return mean, mean
    sd = float(values.std(ddof=1))
    half = float(stats.t.ppf(0.5 + level / 2.0, n - 1)) * sd / np.sqrt(n)
    return mean - half, mean + half


def _cell_fields(record: RunRecord) -> dict:
    cfg = record.config
    det = cfg.get("detection") or {}
    problem = cfg.get("problem", {})
    uf = cfg.get("uf") or {}
    return {
        "mode": cfg.get("mode", ""),
        "method": det.get("method", ""),
        "policy": det.get("policy", ""),
        "k": det.get("k", ""),
        "tau": det.get("tau", ""),
        "problem": problem.get("suite", ""),
        "variant": problem.get("variant", ""),
        "m": problem.get("m", ""),
        "uf_kind": uf.get("kind", ""),
    }


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)  # csv module emits RFC-4180 quoting
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def summarize(in_dir, out_csv, pairs_out=None, long_out=None) -> Path:
    """One row per cell: mean utility with 95% t-interval, trajectories, evals."""
    by_cell = load_records(in_dir)
    suite_path = Path(in_dir) / "suite.json"
    suite = ExperimentSuite.load(suite_path) if suite_path.exists() else None

    header = [
        "schema",
        "cell_id",
        "mode",
        "method",
        "policy",
        "k",
        "tau",
        "problem",
        "variant",
        "m",
        "uf_kind",
        "repeats_ok",
        "mean_utility",
        "ci_low",
        "ci_high",
        "mean_active_trajectory",
        "evals_total_mean",
        "post_first_total_mean",
        "post_first_relevant_share",
    ]
    rows = []
    cell_stats: dict[str, dict] = {}
    for cell_id, records in sorted(by_cell.items()):
        if not records:
            rows.append([SUMMARY_SCHEMA, cell_id] + [""] * (len(header) - 2))
            continue
        recs = [r for _, r in records]
        utilities = np.array([r.final["true_utility"] for r in recs], dtype=float)
        lo, hi = t_interval(utilities)
        trajectories = np.array(
            [[sum(mask) for mask in r.final["masks_history"]] for r in recs], dtype=float
        )
        evals_total = np.array(
            [sum(r.final["eval_counter"]["per_objective"]) for r in recs], dtype=float
        )
        post = [r.final.get("post_first_interaction") for r in recs]
        post_totals = np.array([p["total"] for p in post if p], dtype=float)
        post_relevant = np.array([p["relevant"] for p in post if p], dtype=float)
        share = (
            float(post_relevant.sum() / post_totals.sum()) if post_totals.sum() > 0 else ""
        )
        fields = _cell_fields(recs[0])
        cell_stats[cell_id] = {
            "fields": fields,
            "repeats": {rep: r for rep, r in records},
            "mean_utility": float(utilities.mean()),
            "post_first_total_mean": float(post_totals.mean()) if post_totals.size else None,
            "post_first_relevant_share": share if share != "" else None,
        }
        rows.append(
            [
                SUMMARY_SCHEMA,
                cell_id,
                fields["mode"],
                fields["method"],
                fields["policy"],
                fields["k"],
                fields["tau"],
                fields["problem"],
                fields["variant"],
                fields["m"],
                fields["uf_kind"],
                len(recs),
                f"{utilities.mean():.10g}",
                f"{lo:.10g}",
                f"{hi:.10g}",
                ";".join(f"{v:.4g}" for v in trajectories.mean(axis=0)),
                f"{evals_total.mean():.10g}",
                f"{post_totals.mean():.10g}" if post_totals.size else "",
                f"{share:.6g}" if share != "" else "",
            ]
        )
    _write_csv(Path(out_csv), header, rows)

    if long_out is not None:
        long_header = [
            "schema",
            "cell_id",
            "repeat",
            "interaction",
            "n_active",
            "best_so_far_true_utility",
            "population_best_true_utility",
        ]
        long_rows = []
        for cell_id, records in sorted(by_cell.items()):
            for rep, record in records:
                for entry in record.interactions:
                    long_rows.append(
                        [
                            INTERACTIONS_SCHEMA,
                            cell_id,
                            rep,
                            entry["index"],
                            entry["n_active"],
                            entry["best_so_far_true_utility"],
                            entry["population_best_true_utility"],
                        ]
                    )
        _write_csv(Path(long_out), long_header, long_rows)

    if pairs_out is not None:
        _write_pairs(cell_stats, suite, Path(pairs_out))
    return Path(out_csv)


def _write_pairs(cell_stats: dict, suite: ExperimentSuite | None, out_path: Path) -> None:
    """Within each seed group, compare every cell against its only_learning baseline."""
    header = [
        "schema",
        "cell_id",
        "baseline_id",
        "common_repeats",
        "mean_utility",
        "baseline_mean_utility",
        "mean_utility_diff",
        "post_first_total",
        "baseline_post_first_total",
        "eval_reduction_pct",
        "post_first_relevant_share",
    ]
    groups: dict[str, list[str]] = {}
    if suite is not None:
        for cell in suite.cells:
            groups.setdefault(cell.group(), []).append(cell.id)
    else:
        for cell_id in cell_stats:
            groups.setdefault(cell_id, []).append(cell_id)

    rows = []
    for group_cells in groups.values():
        baselines = [
            c
            for c in group_cells
            if c in cell_stats and cell_stats[c]["fields"]["mode"] == "only_learning"
        ]
        if len(baselines) != 1:
            continue
        base = cell_stats[baselines[0]]
        for cell_id in group_cells:
            if cell_id == baselines[0] or cell_id not in cell_stats:
                continue
            cur = cell_stats[cell_id]
            common = sorted(set(cur["repeats"]) & set(base["repeats"]))
            if not common:
                continue
            diffs = [
                cur["repeats"][r].final["true_utility"]
                - base["repeats"][r].final["true_utility"]
                for r in common
            ]
            reduction = ""
            if cur["post_first_total_mean"] and base["post_first_total_mean"]:
                reduction = f"{100.0 * (1.0 - cur['post_first_total_mean'] / base['post_first_total_mean']):.4g}"
            rows.append(
                [
                    PAIRS_SCHEMA,
                    cell_id,
                    baselines[0],
                    len(common),
                    f"{cur['mean_utility']:.10g}",
                    f"{base['mean_utility']:.10g}",
                    f"{float(np.mean(diffs)):.10g}",
                    f"{cur['post_first_total_mean']:.10g}" if cur["post_first_total_mean"] else "",
                    f"{base['post_first_total_mean']:.10g}" if base["post_first_total_mean"] else "",
                    reduction,
                    f"{cur['post_first_relevant_share']:.6g}"
                    if cur["post_first_relevant_share"] is not None
                    else "",
                ]
            )
    _write_csv(out_path, header, rows)


def heatmap(in_dir, out_csv) -> Path:
    """Active-objective frequency per (cell, objective, interaction).

    Interaction 0 is the initial mask; objective indices are 1-based.
    Frequencies count runs, so every value lies in [0, repeats].
    """
    by_cell = load_records(in_dir)
    header = ["schema", "cell_id", "objective", "interaction", "active_count", "repeats"]
    rows = []
    for cell_id, records in sorted(by_cell.items()):
        if not records:
            continue
        histories = [r.final["masks_history"] for _, r in records]
        n_cols = max(len(h) for h in histories)
        m = len(histories[0][0])
        counts = np.zeros((m, n_cols), dtype=int)
        for history in histories:
            for col, mask in enumerate(history):
                counts[:, col] += np.asarray(mask, dtype=int)
        for obj in range(m):
            for col in range(n_cols):
                rows.append(
                    [HEATMAP_SCHEMA, cell_id, obj + 1, col, int(counts[obj, col]), len(records)]
                )
    _write_csv(Path(out_csv), header, rows)
    return Path(out_csv)
