"""Quantitative evaluation (NMSE, Dice) and the multi-contrast benchmark
harness comparing segmentation with and without the curvature shape prior."""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .density import TargetModel
from .engine import SegParams, TraceRow, default_init, extract_features, segment
from .fields import ScalarField


def _check_masks(truth: ScalarField, estimate: ScalarField) -> None:
    if truth.shape != estimate.shape:
        raise ValueError("truth and estimate shapes differ")
    for name, m in (("truth", truth), ("estimate", estimate)):
        if not np.all(np.isin(np.unique(m.data), [0.0, 1.0])):
            raise ValueError(f"{name} mask is not binary")


def nmse(truth: ScalarField, estimate: ScalarField) -> float:
    """Normalized mean squared error ||M - Mhat||_F^2 / ||M||_F^2; for binary
    masks this equals (false positives + false negatives) / |M|."""
    _check_masks(truth, estimate)
    denom = float(np.sum(truth.data * truth.data))
    if denom <= 0:
        raise ValueError("truth mask is empty")
    diff = truth.data - estimate.data
    return float(np.sum(diff * diff)) / denom


def dice(truth: ScalarField, estimate: ScalarField) -> float:
    """Dice overlap 2|M & Mhat| / (|M| + |Mhat|)."""
    _check_masks(truth, estimate)
    a = float(truth.data.sum())
    b = float(estimate.data.sum())
    if a + b <= 0:
        raise ValueError("both masks are empty")
    inter = float(np.sum(truth.data * estimate.data))
    return 2.0 * inter / (a + b)


@dataclass(frozen=True)
class ImageResult:
    contrast: float
    with_prior: bool
    index: int
    nmse: float
    dice: float
    iterations: int
    converged: bool
    excluded: bool
    failure_reason: str = ""


@dataclass(frozen=True)
class ConditionAggregate:
    contrast: float
    with_prior: bool
    n_images: int
    n_excluded: int
    mean_nmse: float
    std_nmse: float
    mean_dice: float


@dataclass
class EvalReport:
    rows: list[ImageResult]
    aggregates: list[ConditionAggregate]
    traces: dict[str, list[TraceRow]] = field(default_factory=dict)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("contrast,with_prior,index,nmse,dice,iterations,"
                  "converged,excluded\n")
        for r in self.rows:
            out.write(
                f"{r.contrast:.17g},{int(r.with_prior)},{r.index},"
                f"{r.nmse:.17g},{r.dice:.17g},{r.iterations},"
                f"{int(r.converged)},{int(r.excluded)}\n"
            )
        return out.getvalue()

    def to_json(self) -> str:
        return json.dumps({"aggregates": [asdict(a) for a in self.aggregates]},
                          indent=1)

    def to_table(self) -> str:
        """Text table: one row per prior setting, one column per contrast."""
        contrasts = sorted({a.contrast for a in self.aggregates}, reverse=True)
        by_key = {(a.contrast, a.with_prior): a for a in self.aggregates}
        lines = ["setting         " + "".join(f"{c:g}:1".rjust(18) for c in contrasts)]
        for with_prior, label in ((True, "with priors   "), (False, "without priors")):
            cells = []
            for c in contrasts:
                a = by_key.get((c, with_prior))
                cells.append(
                    f"{a.mean_nmse:.3f} +/- {a.std_nmse:.3f}".rjust(18)
                    if a is not None else "--".rjust(18)
                )
            lines.append(label + "  " + "".join(cells))
        excluded = sum(a.n_excluded for a in self.aggregates)
        lines.append(f"excluded runs: {excluded}")
        return "\n".join(lines) + "\n"


def _aggregate(rows: list[ImageResult], contrast: float,
               with_prior: bool) -> ConditionAggregate:
    mine = [r for r in rows if r.contrast == contrast and r.with_prior == with_prior]
    kept = [r for r in mine if not r.excluded]
    vals = np.array([r.nmse for r in kept]) if kept else np.array([np.nan])
    dvals = np.array([r.dice for r in kept]) if kept else np.array([np.nan])
    return ConditionAggregate(
        contrast=contrast,
        with_prior=with_prior,
        n_images=len(mine),
        n_excluded=len(mine) - len(kept),
        mean_nmse=float(vals.mean()),
        std_nmse=float(vals.std()),
        mean_dice=float(dvals.mean()),
    )


def _evaluate_image(task):
    """Segment one test image under each requested prior setting.

    Returns (per-setting ImageResult list, per-setting traces). Module-level so
    worker processes can unpickle it.
    """
    contrast, index, envelope, truth, model, params, betas = task
    features = extract_features(envelope, params)
    phi0 = default_init(envelope)
    results = []
    traces = []
    for beta in betas:
        run = segment(envelope, model, phi0, params.with_overrides(beta=beta),
                      features=features)
        results.append(ImageResult(
            contrast=contrast,
            with_prior=beta > 0,
            index=index,
            nmse=nmse(truth, run.mask),
            dice=dice(truth, run.mask),
            iterations=run.iterations,
            converged=run.converged,
            excluded=run.failed,
            failure_reason=run.failure_reason,
        ))
        traces.append(run.trace)
    return results, traces


def worker_count() -> int:
    """Worker cap: LEVELSEG_THREADS if set, else the CPU count."""
    env = os.environ.get("LEVELSEG_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("LEVELSEG_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def run_table1(datasets: dict[float, list[tuple[ScalarField, ScalarField]]],
               models: dict[float, TargetModel], params: SegParams,
               with_priors_only: bool = False) -> EvalReport:
    """Benchmark harness: segment every test image of every contrast from the
    default initialization, with the shape prior (beta = params.beta) and, unless
    with_priors_only, without it (beta = 0).

    `datasets` maps contrast ratio to its list of (envelope, truth mask) test
    pairs; `models` maps contrast ratio to the model trained on that contrast's
    training split. Images run concurrently; results merge in (contrast, index)
    order, so the report is deterministic.
    """
    missing = sorted(set(datasets) - set(models))
    if missing:
        raise ValueError(f"no model for contrasts: {missing}")
    for contrast, pairs in datasets.items():
        if not pairs:
            raise ValueError(f"empty test set for contrast {contrast}")
    if params.beta <= 0:
        raise ValueError("params.beta must be positive for the comparison run")
    betas = [params.beta] if with_priors_only else [params.beta, 0.0]

    tasks = []
    for contrast in sorted(datasets, reverse=True):
        for index, (envelope, truth) in enumerate(datasets[contrast]):
            tasks.append((contrast, index, envelope, truth, models[contrast],
                          params, betas))

    n_workers = min(worker_count(), len(tasks))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(_evaluate_image, tasks, chunksize=1))
    else:
        outcomes = [_evaluate_image(t) for t in tasks]

    rows: list[ImageResult] = []
    traces: dict[str, list[TraceRow]] = {}
    for task, (results, run_traces) in zip(tasks, outcomes):
        rows.extend(results)
        for r, trace in zip(results, run_traces):
            key = f"c{r.contrast:g}_{'with' if r.with_prior else 'without'}"
            if key not in traces:  # keep the first test image per condition
                traces[key] = trace

    aggregates = [
        _aggregate(rows, contrast, beta > 0)
        for contrast in sorted(datasets, reverse=True)
        for beta in betas
    ]
    return EvalReport(rows=rows, aggregates=aggregates, traces=traces)
