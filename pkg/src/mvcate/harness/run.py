"""Grid execution and the results CSV."""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..core import make_basis
from ..dgp import DgpConfig, generate
from ..egs import DEFAULT_EFFICIENCY, EfficiencyCurve, EgsConfig, biased_sample, ingest_csv, surrogate_fracture_model
from ..evaluation import pehe
from ..meta_learners import fit_all
from .config import ExperimentConfig

WORKERS_ENV = "MVCATE_WORKERS"


@dataclass(frozen=True)
class ResultRow:
    config_hash: str
    scenario: str
    base: str
    learner: str
    K: int
    n: int
    seed: int
    mpehe: float
    rank: int = -1
    dimension: int = -1
    flags: str = ""
    status: str = "ok"
    error: str = ""
    wall_ms: float = 0.0

    def sort_key(self):
        return (self.scenario, self.base, self.learner, self.K, self.n, self.seed)


CSV_COLUMNS = tuple(f.name for f in fields(ResultRow) if f.name != "wall_ms")
_INT = {"K", "n", "seed", "rank", "dimension"}


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ResultRow, ...] = ()

    def extend(self, rows) -> "ExperimentResult":
        return ExperimentResult(self.rows + tuple(rows))

    def sorted(self) -> "ExperimentResult":
        return ExperimentResult(tuple(sorted(self.rows, key=ResultRow.sort_key)))

    @property
    def failures(self) -> tuple[ResultRow, ...]:
        return tuple(r for r in self.rows if r.status != "ok")

    def __len__(self) -> int:
        return len(self.rows)


def results_to_csv(result: ExperimentResult) -> str:
    """RFC 4180 text of the deterministic columns, rows in canonical order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for row in result.sorted().rows:
        rec = asdict(row)
        writer.writerow([repr(rec[c]) if c == "mpehe" else rec[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def timings_to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(("scenario", "base", "learner", "K", "n", "seed", "wall_ms"))
    for r in result.sorted().rows:
        writer.writerow((r.scenario, r.base, r.learner, r.K, r.n, r.seed, f"{r.wall_ms:.3f}"))
    return buf.getvalue()


def read_results(path_or_text) -> ExperimentResult:
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    reader = csv.DictReader(io.StringIO(text))
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"results file lacks columns {sorted(missing)}")
    rows = []
    for rec in reader:
        kw = {}
        for c in CSV_COLUMNS:
            v = rec[c]
            kw[c] = int(v) if c in _INT else float(v) if c == "mpehe" else v
        rows.append(ResultRow(**kw))
    return ExperimentResult(tuple(rows))


@lru_cache(maxsize=4)
def _fracture_table(source: str):
    return surrogate_fracture_model() if source == "surrogate" else ingest_csv(source)


@lru_cache(maxsize=4)
def _efficiency(source: str) -> EfficiencyCurve:
    return DEFAULT_EFFICIENCY if source == "default" else EfficiencyCurve.from_csv(source)


def draw_sample(config: ExperimentConfig, K: int, seed: int):
    d = config.data
    if d.source == "egs":
        cfg = EgsConfig(n=d.n, seed=seed, sigma=d.sigma, design=d.design, selection_weight=d.selection_weight)
        return biased_sample(_fracture_table(d.fracture_table), cfg, _efficiency(d.efficiency))
    cfg = DgpConfig(
        model=d.model, design=d.design, n=d.n, K=K, sigma=d.sigma, seed=seed,
        selection_weight=d.selection_weight,
    )
    return generate(cfg)


def run_cell(config: ExperimentConfig, K: int, seed: int, base: str) -> list[ResultRow]:
    """All learners for one (K, seed, base) cell; failures become error rows."""
    template = ResultRow(config.config_hash, config.scenario.name, base, "", K, config.data.n, seed, float("nan"))
    try:
        sample, truth = draw_sample(config, K, seed)
        template = replace(template, K=sample.K)
        spec = config.base_spec(base)
        gps_spec = config.gps_spec()
        rlin = make_basis(config.rlin_basis, sample.d)
    except Exception as err:  # noqa: BLE001 - recorded per row
        return [replace(template, learner=t, status="error", error=_short(err)) for t in config.learners]

    kwargs = dict(truth=truth, gps_spec=gps_spec, rlin_basis=rlin, seed=seed)
    try:
        fits = fit_all(sample, config.scenario, spec, learners=list(config.learners), **kwargs)
        failed = {}
    except Exception:  # noqa: BLE001 - isolate the failing learners
        fits, failed = {}, {}
        for t in config.learners:
            try:
                fits.update(fit_all(sample, config.scenario, spec, learners=[t], **kwargs))
            except Exception as err:  # noqa: BLE001
                failed[t] = _short(err)

    rows = []
    for t in config.learners:
        if t in failed:
            rows.append(replace(template, learner=t, status="error", error=failed[t]))
            continue
        if t not in fits:
            continue  # not applicable under this scenario
        est = fits[t]
        try:
            value = pehe(est, truth, sample.covariates).mpehe
        except Exception as err:  # noqa: BLE001
            rows.append(replace(template, learner=t, status="error", error=_short(err)))
            continue
        diag = est.diagnostics
        rows.append(
            replace(
                template, learner=t, mpehe=value,
                rank=int(diag.get("rank", -1)), dimension=int(diag.get("dimension", -1)),
                flags=";".join(sorted(est.flags)), wall_ms=float(diag.get("wall_ms", 0.0)),
            )
        )
    return rows


def _short(err: Exception) -> str:
    return f"{type(err).__name__}: {err}".replace("\n", " ")[:200]


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        return default


def run(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Execute every (K, seed, base) cell; output order is canonical."""
    workers = worker_count() if workers is None else max(1, workers)
    K_values = config.data.K_values if config.data.source == "synthetic" else (12,)
    cells = [(K, s, b) for K in K_values for s in config.seeds for b, _ in config.base_learners]
    result = ExperimentResult()
    if workers == 1 or len(cells) <= 1:
        for cell in cells:
            result = result.extend(run_cell(config, *cell))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, config, *cell) for cell in cells]
            for fut in futures:
                result = result.extend(fut.result())
    return result.sorted()


def write_results(result: ExperimentResult, config: ExperimentConfig, output_dir=None) -> Path:
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.csv"
    path.write_text(results_to_csv(result), newline="")
    (out / "timings.csv").write_text(timings_to_csv(result), newline="")
    return path


def summarize(result: ExperimentResult) -> dict:
    """Mean mPEHE per (scenario, base, learner, K) over successful rows."""
    groups: dict = {}
    for r in result.rows:
        if r.status == "ok":
            groups.setdefault((r.scenario, r.base, r.learner, r.K), []).append(r.mpehe)
    return {k: float(np.mean(v)) for k, v in groups.items()}
