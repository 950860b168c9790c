"""Desk-scale experiments: kNN evaluation, timing benchmarks and figure data."""

import csv
import io
import logging
import math
import time
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional

import numpy as np

from .barycenter import f_beta
from .datasets import (
    Dataset,
    make_rotated_family_dataset,
    make_two_family_dataset,
    subset,
)
from .errors import InputError
from .kmeans import kmeans
from .parallel import ordered_map
from .sampling import SamplerConfig, sample_tree_metric
from .seeding import STREAM_BENCH, STREAM_SPLIT, derive_rng
from .sliced import (
    BaseDiscrepancy,
    SliceSpec,
    discrepancy,
    slice_measures,
    slice_value,
)
from .tree import FlowProfile, Measure, Tree, flow_profile
from .univariate import LossKind, univariate_ot

logger = logging.getLogger(__name__)


class Task(Enum):
    """What the kNN experiment predicts."""

    CLASSIFY = "classification"
    REGRESS = "regression"


class Family(Enum):
    """Synthetic dataset behind the k-means scaling series."""

    TWO = "two"  # unit and ten-times scaled clouds
    ROTATED = "rotated"  # rotated copies of two templates


@dataclass(frozen=True)
class ExperimentConfig:
    """kNN protocol: random splits, repeated, with one discrepancy."""

    spec: SliceSpec = field(default_factory=SliceSpec)
    knn_k: tuple[int, ...] = (1, 3, 5)
    split: float = 0.8
    repeats: int = 20
    seed: int = 0
    task: Task = Task.CLASSIFY
    threads: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.split < 1.0:
            raise InputError(f"split must be in (0, 1), got {self.split}")
        if self.repeats < 1:
            raise InputError(f"repeats must be >= 1, got {self.repeats}")
        if not self.knn_k or min(self.knn_k) < 1:
            raise InputError(f"knn_k values must be >= 1, got {self.knn_k}")
        object.__setattr__(self, "knn_k", tuple(int(k) for k in self.knn_k))


class DiscrepancyCache:
    """Pairwise discrepancies between dataset measures.

    Slice trees (and, for aligned FlowAlign, flow profiles) are built once per
    measure; they depend only on the measure and the slice seed.
    """

    def __init__(self, ds: Dataset, spec: SliceSpec) -> None:
        self.ds = ds
        self.spec = spec
        self.slices: Optional[list[list[tuple[Measure, Tree]]]] = None
        self.profiles: Optional[list[list[FlowProfile]]] = None
        if spec.base is BaseDiscrepancy.SGW or spec.joint:
            return
        self.slices = [
            slice_measures(p, spec, w) for p, w in zip(ds.points, ds.weights)
        ]
        if spec.base is BaseDiscrepancy.FLOW and spec.aligned:
            self.profiles = [[flow_profile(m, t) for m, t in sl] for sl in self.slices]

    def value(self, i: int, j: int) -> float:
        spec = self.spec
        if self.profiles is not None:
            vals = [
                math.sqrt(univariate_ot(p, q, LossKind.SQUARED)[0])
                for p, q in zip(self.profiles[i], self.profiles[j])
            ]
        elif self.slices is not None:
            vals = [
                slice_value(mx, tx, mz, tz, spec)
                for (mx, tx), (mz, tz) in zip(self.slices[i], self.slices[j])
            ]
        else:
            ds = self.ds
            return discrepancy(
                ds.points[i], ds.points[j], spec, ds.weights[i], ds.weights[j]
            )
        return math.fsum(vals) / spec.n_slices

    def matrix(
        self, rows: Sequence[int], cols: Sequence[int], threads: int = 1
    ) -> np.ndarray:
        """Discrepancies between ``rows`` and ``cols`` measures."""
        out = ordered_map(
            lambda i: [self.value(i, j) for j in cols], list(rows), threads
        )
        return np.asarray(out, dtype=np.float64).reshape(len(rows), len(cols))


@dataclass
class KnnRow:
    k: int
    mean: float
    std: float
    scores: list[float]


@dataclass
class KnnReport:
    """Accuracy (classification) or MAE (regression) per k over repeats."""

    task: Task
    rows: list[KnnRow]
    seconds: float
    n_pairs: int

    @property
    def seconds_per_pair(self) -> float:
        return self.seconds / max(self.n_pairs, 1)

    def to_csv(self, timing: bool = True) -> str:
        """CSV with one row per k; ``timing=False`` drops the wall-clock columns."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        metric = "accuracy" if self.task is Task.CLASSIFY else "mae"
        header = ["k", f"{metric}_mean", f"{metric}_std"]
        writer.writerow(header + (["seconds", "seconds_per_pair"] if timing else []))
        for r in self.rows:
            row: list[Any] = [r.k, f"{r.mean:.12g}", f"{r.std:.12g}"]
            if timing:
                row += [f"{self.seconds:.6f}", f"{self.seconds_per_pair:.9f}"]
            writer.writerow(row)
        return buf.getvalue()


def _split(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def knn_predict(
    dist: np.ndarray, train_values: Sequence[Any], k: int, task: Task
) -> list[Any]:
    """Predict each row of a test-by-train distance matrix from its k nearest.

    Neighbors are ordered by distance, then by train position. Classification
    takes the majority label (smallest label on ties); regression the mean.
    """
    preds: list[Any] = []
    k = min(k, dist.shape[1])
    for row in dist:
        nearest = np.argsort(row, kind="stable")[:k]
        vals = [train_values[int(t)] for t in nearest]
        if task is Task.CLASSIFY:
            counts = Counter(vals)
            top = max(counts.values())
            preds.append(min(v for v, c in counts.items() if c == top))
        else:
            preds.append(float(np.mean(vals)))
    return preds


def knn_experiment(ds: Dataset, cfg: ExperimentConfig) -> KnnReport:
    """Repeated random-split kNN with a sliced discrepancy.

    Reported time covers tree sampling and every test-by-train matrix.

    Raises:
        InputError: If the dataset lacks labels (classification) or targets
            (regression), or has fewer than two measures
    """
    if len(ds) < 2:
        raise InputError("knn_experiment needs at least two measures")
    if cfg.task is Task.CLASSIFY:
        if ds.labels is None:
            raise InputError("Classification needs a labeled dataset")
        values: list[Any] = list(ds.labels)
    else:
        if ds.targets is None:
            raise InputError("Regression needs a dataset with targets")
        values = list(ds.targets)

    start = time.perf_counter()
    cache = DiscrepancyCache(ds, cfg.spec)
    seconds = time.perf_counter() - start

    scores: dict[int, list[float]] = {k: [] for k in cfg.knn_k}
    n_pairs = 0
    for r in range(cfg.repeats):
        train, test = _split(len(ds), cfg.split, derive_rng(cfg.seed, STREAM_SPLIT, r))
        t0 = time.perf_counter()
        dist = cache.matrix(test, train, cfg.threads)
        seconds += time.perf_counter() - t0
        n_pairs += dist.size
        train_values = [values[int(t)] for t in train]
        truth = [values[int(t)] for t in test]
        for k in cfg.knn_k:
            pred = knn_predict(dist, train_values, k, cfg.task)
            if cfg.task is Task.CLASSIFY:
                score = float(np.mean([p == t for p, t in zip(pred, truth)]))
            else:
                score = float(np.mean(np.abs(np.asarray(pred) - np.asarray(truth))))
            scores[k].append(score)
        logger.info(f"Repeat {r + 1}/{cfg.repeats}: {len(test)} test x {len(train)} train")

    rows = [
        KnnRow(k, float(np.mean(s)), float(np.std(s)), s) for k, s in scores.items()
    ]
    return KnnReport(cfg.task, rows, seconds, n_pairs)


@dataclass
class BenchRow:
    pair: int
    i: int
    j: int
    seconds: float
    value: float


@dataclass
class BenchReport:
    """Wall time of individual discrepancy evaluations (tree sampling included)."""

    rows: list[BenchRow]

    @property
    def median(self) -> float:
        return float(np.median([r.seconds for r in self.rows]))

    @property
    def mean(self) -> float:
        return float(np.mean([r.seconds for r in self.rows]))

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pair", "i", "j"] + (["seconds"] if timing else []) + ["value"])
        for r in self.rows:
            row: list[Any] = [r.pair, r.i, r.j]
            if timing:
                row.append(f"{r.seconds:.9f}")
            writer.writerow(row + [f"{r.value:.12g}"])
        return buf.getvalue()


def bench(
    ds: Dataset, spec: SliceSpec, pairs: int, seed: int = 0, threads: int = 1
) -> BenchReport:
    """Time ``pairs`` randomly drawn discrepancy evaluations.

    One untimed warm-up evaluation runs first. Pairs are timed one after
    another; ``threads`` spreads the slices of each evaluation.

    Raises:
        InputError: If more pairs are requested than the dataset has
    """
    n = len(ds)
    available = n * (n - 1) // 2
    if pairs < 1 or pairs > available:
        raise InputError(f"pairs must be in [1, {available}], got {pairs}")
    rng = derive_rng(seed, STREAM_BENCH)
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    picks = rng.choice(len(all_pairs), size=pairs, replace=False)

    def evaluate(i: int, j: int) -> float:
        return discrepancy(
            ds.points[i], ds.points[j], spec, ds.weights[i], ds.weights[j], threads
        )

    evaluate(*all_pairs[int(picks[0])])
    rows = []
    for p, idx in enumerate(picks.tolist()):
        i, j = all_pairs[idx]
        t0 = time.perf_counter()
        value = evaluate(i, j)
        rows.append(BenchRow(p, i, j, time.perf_counter() - t0, value))
    report = BenchReport(rows)
    logger.info(f"Bench over {pairs} pairs: median {report.median:.6f}s, mean {report.mean:.6f}s")
    return report


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]], timing: bool = True) -> str:
    """CSV text; without ``timing`` every column named ``seconds`` is dropped."""
    keep = [c for c, name in enumerate(header) if timing or name != "seconds"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([header[c] for c in keep])
    writer.writerows([[row[c] for c in keep] for row in rows])
    return buf.getvalue()


def slices_tradeoff(
    ds: Dataset,
    cfg: ExperimentConfig,
    slice_counts: Sequence[int],
    timing: bool = True,
) -> str:
    """CSV of kNN error and time against the number of tree slices."""
    rows = []
    for n_slices in slice_counts:
        sub = replace(cfg, spec=replace(cfg.spec, n_slices=int(n_slices)))
        report = knn_experiment(ds, sub)
        for r in report.rows:
            error = 1.0 - r.mean if cfg.task is Task.CLASSIFY else r.mean
            rows.append([n_slices, r.k, f"{error:.12g}", f"{report.seconds:.6f}"])
    return _csv(["n_slices", "k", "error", "seconds"], rows, timing)


def sampling_time(
    points: np.ndarray,
    depths: Sequence[int],
    kappas: Sequence[int],
    seed: int = 0,
    timing: bool = True,
) -> str:
    """CSV of tree-sampling time and tree size against (max_depth, num_clusters)."""
    rows = []
    for h in depths:
        for kappa in kappas:
            cfg = SamplerConfig(num_clusters=int(kappa), max_depth=int(h), seed=seed)
            t0 = time.perf_counter()
            emb = sample_tree_metric(points, cfg)
            elapsed = time.perf_counter() - t0
            rows.append([h, kappa, f"{elapsed:.6f}", emb.tree.n_nodes])
    return _csv(["max_depth", "num_clusters", "seconds", "n_nodes"], rows, timing)


def kmeans_scaling(
    sizes: Sequence[int],
    spec: SliceSpec,
    k_supports: int = 100,
    max_iter: int = 20,
    seed: int = 0,
    timing: bool = True,
    threads: int = 1,
    family: Family = Family.TWO,
) -> str:
    """CSV of k-means F_beta and time on nested synthetic datasets of growing size.

    The largest dataset is generated once and every size clusters its first
    n measures; families alternate, so each prefix is balanced.

    Raises:
        InputError: If a size is below 2
    """
    if not sizes or min(sizes) < 2:
        raise InputError(f"sizes must all be >= 2, got {list(sizes)}")
    largest = int(max(sizes))
    if family is Family.TWO:
        full = make_two_family_dataset(n_measures=largest, seed=seed)
    else:
        full = make_rotated_family_dataset(n_families=2, n_measures=largest, seed=seed)
    rows = []
    for n in sizes:
        ds = subset(full, range(int(n)))
        t0 = time.perf_counter()
        result = kmeans(ds.points, 2, spec, k_supports, max_iter, seed, ds.weights, threads)
        elapsed = time.perf_counter() - t0
        assert ds.labels is not None
        score = f_beta(result.assignment.tolist(), ds.labels)
        rows.append([n, f"{score:.12g}", f"{elapsed:.6f}", result.iterations])
    return _csv(["n_measures", "f_beta", "seconds", "iterations"], rows, timing)
