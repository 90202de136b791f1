"""Fidelity, AUC, throughput, and correlation evaluation harness.

Fidelity is always computed against the node set an explanation actually
ranked: the kept/removed pools come from the explanation's own sources,
so explainers with different receptive fields stay comparable. Boundary
sparsities short-circuit to exact zeros rather than trusting float
cancellation.
"""

from __future__ import annotations

import csv
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .attribution import TargetContext, kept_value, mi_value, target_context
from .errors import DataError, NumericError
from .explainer import Explanation
from .gcn import GcnModel, gcn_forward
from .graph import Graph, induce, khop_neighbors
from .seeding import derive_rng

SPARSITY_GRID = tuple(round(0.1 * k, 1) for k in range(11))
TABLE_RANGE = (0.3, 0.7, 0.1)


def sparsity(neighborhood_size: int, selected: int) -> float:
    """Fraction of the neighborhood excluded from the explanation set."""
    if neighborhood_size < 1:
        raise DataError("neighborhood_size must be at least 1")
    if not 0 <= selected <= neighborhood_size:
        raise DataError("selected count outside [0, neighborhood_size]")
    return 1.0 - selected / neighborhood_size


def selected_count(pool_size: int, sp: float) -> int:
    """Number of top-ranked nodes kept at a sparsity level.

    Nearest-integer rounding of (1 - sp) * pool, ties rounding up; the
    paper never fixes the rounding so it is pinned here once.
    """
    if not 0.0 <= sp <= 1.0:
        raise DataError("sparsity must lie in [0, 1]")
    return min(pool_size, int((1.0 - sp) * pool_size + 0.5))


@dataclass(frozen=True)
class FidelityReport:
    """Per-sparsity fidelity of one ranking method over many targets."""

    method: str
    grid: np.ndarray
    fid_plus: np.ndarray  # (grid, targets) raw values
    fid_minus: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
            raise DataError("sparsity grid must be strictly ascending within [0, 1]")
        if self.fid_plus.shape != (grid.size, self.targets.size) or self.fid_minus.shape != self.fid_plus.shape:
            raise DataError("fidelity arrays do not match grid x targets")

    @property
    def n_targets(self) -> int:
        return int(self.targets.size)

    def plus_mean(self) -> np.ndarray:
        return self.fid_plus.mean(axis=1)

    def plus_std(self) -> np.ndarray:
        return self.fid_plus.std(axis=1)

    def minus_mean(self) -> np.ndarray:
        return self.fid_minus.mean(axis=1)

    def minus_std(self) -> np.ndarray:
        return self.fid_minus.std(axis=1)


def _node_context(model: GcnModel, g: Graph, expl: Explanation) -> TargetContext:
    nodes = np.union1d(expl.sources, [expl.target])
    sub = induce(g, nodes)
    row = gcn_forward(model, sub)[int(sub.to_local([expl.target])[0])]
    class_id = int(np.argmax(row))
    return TargetContext(model, g, int(expl.target), 0, nodes, class_id, float(row[class_id]))


def _graph_context(model: GcnModel, g: Graph) -> TargetContext:
    probs = gcn_forward(model, g)
    class_id = int(np.argmax(probs))
    nodes = np.arange(g.num_nodes, dtype=np.int64)
    return TargetContext(model, g, None, 0, nodes, class_id, float(probs[class_id]))


def _fidelity_curves(model: GcnModel, data, expl: Explanation, grid) -> tuple[np.ndarray, np.ndarray]:
    if model.head == "graph":
        ctx = _graph_context(model, data[expl.target])
        ranked = expl.sources
    else:
        ctx = _node_context(model, data, expl)
        ranked = expl.sources[expl.sources != expl.target]
    pool = ranked.size
    plus = np.empty(len(grid))
    minus = np.empty(len(grid))
    for k, sp in enumerate(grid):
        top = selected_count(pool, float(sp))
        # keeping everything is a no-op on either side: exact zero, no forward
        if top == 0:
            plus[k] = 0.0
        else:
            plus[k] = ctx.full_value - kept_value(ctx, np.setdiff1d(ctx.pool, ranked[:top], assume_unique=False))
        if top == pool:
            minus[k] = 0.0
        else:
            minus[k] = ctx.full_value - kept_value(ctx, ranked[:top])
    return plus, minus


def fidelity_report(
    model: GcnModel,
    data,
    explanations: list[Explanation],
    grid=SPARSITY_GRID,
    method: str = "explainer",
    workers: int = 1,
) -> FidelityReport:
    """Fidelity+ and Fidelity- over the sparsity grid for every target.

    ``data`` is the Graph being explained (node head) or the graph list
    (graph head, targets are indices). Per-target work is independent;
    ``workers`` > 1 evaluates targets in a thread pool.
    """
    if not explanations:
        raise DataError("no explanations to evaluate")
    grid_arr = np.asarray(grid, dtype=np.float64)

    def one(expl: Explanation):
        return _fidelity_curves(model, data, expl, grid_arr)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(one, explanations))
    else:
        curves = [one(x) for x in explanations]
    plus = np.stack([c[0] for c in curves], axis=1)
    minus = np.stack([c[1] for c in curves], axis=1)
    targets = np.array([x.target for x in explanations], dtype=np.int64)
    return FidelityReport(method=method, grid=grid_arr, fid_plus=plus, fid_minus=minus, targets=targets)


def fidelity_plus(model, data, explanations, grid=SPARSITY_GRID, method="explainer", workers=1):
    """Per-sparsity mean Fidelity+ (prediction drop after removing the top set)."""
    return fidelity_report(model, data, explanations, grid, method, workers).plus_mean()


def fidelity_minus(model, data, explanations, grid=SPARSITY_GRID, method="explainer", workers=1):
    """Per-sparsity mean Fidelity- (drop after keeping only the top set)."""
    return fidelity_report(model, data, explanations, grid, method, workers).minus_mean()


def mean_fidelity(report: FidelityReport, lo: float = TABLE_RANGE[0], hi: float = TABLE_RANGE[1], step: float = TABLE_RANGE[2]) -> tuple[float, float]:
    """Average (Fidelity+, Fidelity-) over grid points lo..hi inclusive."""
    wanted = np.round(np.arange(lo, hi + step / 2, step), 10)
    idx = []
    for w in wanted:
        hit = np.flatnonzero(np.isclose(report.grid, w))
        if hit.size != 1:
            raise DataError(f"sparsity {w} not on the report grid")
        idx.append(int(hit[0]))
    return float(report.plus_mean()[idx].mean()), float(report.minus_mean()[idx].mean())


def random_explanations(data, targets, hops: int, rng: np.random.Generator) -> list[Explanation]:
    """Random rankings over the same candidate pools as a real explainer."""
    out = []
    for v in np.asarray(targets, dtype=np.int64).reshape(-1):
        if isinstance(data, Graph):
            sources = khop_neighbors(data, int(v), hops)
        else:
            sources = np.arange(data[int(v)].num_nodes, dtype=np.int64)
        scores = rng.standard_normal(sources.size)
        order = np.lexsort((sources, -scores))
        out.append(Explanation(target=int(v), sources=sources[order], scores=scores[order]))
    return out


# ---------------------------------------------------------------------------
# AUC against ground-truth motifs


def auc_ground_truth(explanations: list[Explanation], motif_masks) -> float:
    """ROC-AUC of explanation scores against binary motif membership.

    ``motif_masks`` is one boolean per-node array (shared by all
    targets), one array per target (list, tuple, or 2-D array), or a
    dict keyed by explanation target. Scores from all explanations are
    pooled; ties get averaged ranks.
    """
    if not explanations:
        raise DataError("no explanations to score")
    shared = None
    if not isinstance(motif_masks, (dict, list, tuple)):
        arr = np.asarray(motif_masks)
        if arr.ndim == 1:
            shared = arr
        else:
            motif_masks = list(arr)
    scores = []
    labels = []
    for expl in explanations:
        mask = shared if shared is not None else motif_masks[expl.target]
        mask = np.asarray(mask, dtype=bool)
        scores.append(expl.scores)
        labels.append(mask[expl.sources])
    pooled = np.concatenate(scores)
    truth = np.concatenate(labels)
    n_pos = int(truth.sum())
    n_neg = int(truth.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: ground-truth mask is constant over the pool")
    ranks = rankdata(pooled)
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# Throughput


@dataclass(frozen=True)
class ThroughputReport:
    """Instances explained per second, median over repeats."""

    n_instances: int
    seconds: float
    throughput: float
    repeats: int
    hardware: str

    def __post_init__(self) -> None:
        if abs(self.throughput - self.n_instances / self.seconds) > 1e-9 * self.throughput:
            raise DataError("throughput must equal n_instances / seconds")


def bench_throughput(run, targets, warmup: int = 1, repeats: int = 3) -> ThroughputReport:
    """Median wall time of ``run(targets)`` over ``repeats`` measured passes."""
    if repeats < 3:
        raise DataError("repeats must be at least 3 for a stable median")
    targets = list(targets)
    for _ in range(warmup):
        run(targets)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        run(targets)
        times.append(time.perf_counter() - start)
    seconds = float(np.median(times))
    return ThroughputReport(
        n_instances=len(targets),
        seconds=seconds,
        throughput=len(targets) / seconds,
        repeats=repeats,
        hardware=f"{platform.platform()}; single-threaded",
    )


# ---------------------------------------------------------------------------
# Correlation studies


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size or x.size < 2:
        raise DataError("pearson needs two equal-length series of at least 2 points")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        raise NumericError("correlation undefined: a series has zero variance")
    return float(np.corrcoef(x, y)[0, 1])


@dataclass(frozen=True)
class CorrelationStudy:
    """Attribution-vs-Fidelity+ point cloud with its Pearson r."""

    method: str
    points: np.ndarray  # columns: attribution value, fidelity_plus
    r: float

    @property
    def pairs(self) -> int:
        return int(self.points.shape[0])


def correlation_study(
    model: GcnModel,
    g: Graph,
    method: str = "removal",
    pairs: int = 100,
    seed: int = 0,
    hops: int = 1,
) -> CorrelationStudy:
    """Sample (subset, target) pairs and correlate attribution with Fidelity+.

    The removal score of a subset is the mean single-node removal delta
    of its members; the mi score is the deterministic kept-set form.
    Both are plotted against Fidelity+ of removing the subset.
    """
    if method not in ("removal", "mi"):
        raise DataError(f"unknown correlation method {method!r}")
    rng = derive_rng(seed, "correlation", method)
    xs = np.empty(pairs)
    ys = np.empty(pairs)
    done = 0
    while done < pairs:
        v = int(rng.integers(g.num_nodes))
        ctx = target_context(model, g, target=v, hops=hops)
        pool = ctx.pool
        if pool.size < 2:
            continue
        subset = pool[rng.random(pool.size) < 0.5]
        if subset.size == 0 or subset.size == pool.size:
            continue
        if method == "removal":
            vals = [
                kept_value(ctx, [j]) - kept_value(ctx, pool[pool != j]) for j in subset
            ]
            xs[done] = float(np.mean(vals))
        else:
            xs[done] = mi_value(ctx, subset)
        ys[done] = ctx.full_value - kept_value(ctx, np.setdiff1d(pool, subset, assume_unique=True))
        done += 1
    points = np.column_stack([xs, ys])
    return CorrelationStudy(method=method, points=points, r=pearson(xs, ys))


# ---------------------------------------------------------------------------
# Report serialization


def fidelity_rows(report: FidelityReport) -> list[dict]:
    rows = []
    pm, ps = report.plus_mean(), report.plus_std()
    mm, ms = report.minus_mean(), report.minus_std()
    for k, sp in enumerate(report.grid):
        rows.append(
            {
                "method": report.method,
                "sparsity": float(sp),
                "fid_plus_mean": float(pm[k]),
                "fid_plus_std": float(ps[k]),
                "fid_minus_mean": float(mm[k]),
                "fid_minus_std": float(ms[k]),
                "n_targets": report.n_targets,
            }
        )
    return rows


FIDELITY_COLUMNS = (
    "method",
    "sparsity",
    "fid_plus_mean",
    "fid_plus_std",
    "fid_minus_mean",
    "fid_minus_std",
    "n_targets",
)


def fidelity_to_csv(path, reports: list[FidelityReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIDELITY_COLUMNS)
        writer.writeheader()
        for report in reports:
            for row in fidelity_rows(report):
                writer.writerow(row)


def correlation_to_csv(path, studies: list[CorrelationStudy]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "attribution", "fidelity_plus"])
        for study in studies:
            for x, y in study.points:
                writer.writerow([study.method, repr(float(x)), repr(float(y))])


def throughput_payload(report: ThroughputReport) -> dict:
    return {
        "n_instances": report.n_instances,
        "seconds": report.seconds,
        "throughput": report.throughput,
        "repeats": report.repeats,
        "hardware": report.hardware,
    }
