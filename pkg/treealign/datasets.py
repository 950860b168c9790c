"""Datasets of weighted point-set measures: manifest I/O and synthetic generators.

A manifest is a JSON object ``{"measures": [{"file": ..., "label": ...,
"target": ..., "weighted": ...}, ...]}``. File paths are relative to the
manifest. A point file holds one point per row, whitespace separated; the
first column is an (unnormalized) weight when the file starts with a
``# weighted`` line or the manifest says ``"weighted": true``.
"""

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from scipy.stats import special_ortho_group

from .errors import DatasetLoadError, InputError
from .seeding import STREAM_MEASURE, derive_rng

logger = logging.getLogger(__name__)

# Normalized weights must sum to 1 within this tolerance
WEIGHT_TOL = 1e-6
# Comment line marking a leading weight column
WEIGHTED_HEADER = "# weighted"

PathLike = Union[str, Path]


@dataclass
class Dataset:
    """Weighted point sets with optional class labels and regression targets."""

    points: list[np.ndarray]
    weights: list[np.ndarray]
    labels: Optional[list[int]] = None
    targets: Optional[list[float]] = None
    names: list[str] = field(default_factory=list)
    manifest_path: Optional[Path] = None

    def __post_init__(self) -> None:
        n = len(self.points)
        if len(self.weights) != n:
            raise InputError(f"{n} point sets but {len(self.weights)} weight vectors")
        for i, (p, w) in enumerate(zip(self.points, self.weights)):
            if p.ndim != 2 or p.shape[0] != w.shape[0]:
                raise InputError(f"Measure {i}: {p.shape} points with {w.shape[0]} weights")
        if self.labels is not None and len(self.labels) != n:
            raise InputError(f"{n} measures but {len(self.labels)} labels")
        if self.targets is not None and len(self.targets) != n:
            raise InputError(f"{n} measures but {len(self.targets)} targets")
        if not self.names:
            self.names = [f"measure_{i:04d}" for i in range(n)]

    def __len__(self) -> int:
        return len(self.points)


def read_point_file(
    path: PathLike, weighted: Optional[bool] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Read one point file and return (points, normalized weights).

    Args:
        path: point file
        weighted: whether the first column is a weight; None detects a
            ``# weighted`` header before the first row

    Raises:
        DatasetLoadError: On a missing file, a malformed row, or bad weights
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DatasetLoadError(f"cannot read point file ({e.strerror})", path) from e

    rows: list[list[float]] = []
    raw_weights: list[float] = []
    width: Optional[int] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if width is None and line == WEIGHTED_HEADER and weighted is None:
            weighted = True
        if not line or line.startswith("#"):
            continue
        if weighted is None:
            weighted = False
        try:
            values = [float(v) for v in line.split()]
        except ValueError as e:
            raise DatasetLoadError(f"malformed row: {e}", path, lineno) from e
        if width is None:
            width = len(values)
            if width < (2 if weighted else 1):
                raise DatasetLoadError("row has no coordinates", path, lineno)
        elif len(values) != width:
            raise DatasetLoadError(
                f"expected {width} columns, got {len(values)}", path, lineno
            )
        if not all(np.isfinite(values)):
            raise DatasetLoadError("non-finite value", path, lineno)
        if weighted:
            if values[0] < 0:
                raise DatasetLoadError(f"negative weight {values[0]}", path, lineno)
            raw_weights.append(values[0])
            rows.append(values[1:])
        else:
            rows.append(values)

    if not rows:
        raise DatasetLoadError("no points", path)
    points = np.asarray(rows, dtype=np.float64)
    if not weighted:
        return points, np.full(points.shape[0], 1.0 / points.shape[0])
    w = np.asarray(raw_weights)
    total = float(w.sum())
    if not total > 0:
        raise DatasetLoadError("weights sum to zero", path)
    w = w / total
    if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
        raise DatasetLoadError("weights do not sum to 1 after normalization", path)
    return points, w


def write_point_file(
    path: PathLike, points: np.ndarray, weights: Optional[np.ndarray] = None
) -> None:
    """Write a point file; floats use repr so they read back exactly.

    With ``weights`` the file starts with the ``# weighted`` header.
    """
    lines = [] if weights is None else [WEIGHTED_HEADER]
    for k, row in enumerate(np.asarray(points, dtype=np.float64)):
        vals = [repr(float(v)) for v in row]
        if weights is not None:
            vals.insert(0, repr(float(weights[k])))
        lines.append(" ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def _flag(value: Any) -> Optional[bool]:
    return None if value is None else bool(value)


def load_dataset(manifest_path: PathLike) -> Dataset:
    """Load a manifest and every point file it lists.

    Raises:
        DatasetLoadError: With the offending path (and line) on any read error
    """
    manifest_path = Path(manifest_path)
    try:
        spec = json.loads(manifest_path.read_text())
    except OSError as e:
        raise DatasetLoadError(f"cannot read manifest ({e.strerror})", manifest_path) from e
    except json.JSONDecodeError as e:
        raise DatasetLoadError(f"invalid JSON: {e.msg}", manifest_path, e.lineno) from e
    entries = spec.get("measures") if isinstance(spec, dict) else None
    if not isinstance(entries, list) or not entries:
        raise DatasetLoadError("manifest needs a nonempty 'measures' list", manifest_path)

    base = manifest_path.parent
    default_weighted = spec.get("weighted")
    points, weights, names = [], [], []
    labels: list[Any] = []
    targets: list[Any] = []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or "file" not in entry:
            raise DatasetLoadError(f"measure {k} has no 'file'", manifest_path)
        pts, w = read_point_file(
            base / entry["file"], _flag(entry.get("weighted", default_weighted))
        )
        points.append(pts)
        weights.append(w)
        names.append(str(entry.get("name", Path(entry["file"]).stem)))
        labels.append(entry.get("label"))
        targets.append(entry.get("target"))

    has_labels = [v is not None for v in labels]
    has_targets = [v is not None for v in targets]
    if any(has_labels) and not all(has_labels):
        raise DatasetLoadError("some measures have labels and some do not", manifest_path)
    if any(has_targets) and not all(has_targets):
        raise DatasetLoadError("some measures have targets and some do not", manifest_path)

    ds = Dataset(
        points,
        weights,
        labels=[int(v) for v in labels] if all(has_labels) else None,
        targets=[float(v) for v in targets] if all(has_targets) else None,
        names=names,
        manifest_path=manifest_path,
    )
    logger.info(f"Loaded {len(ds)} measures from {manifest_path}")
    return ds


def write_dataset(ds: Dataset, directory: PathLike) -> Path:
    """Write ``ds`` as weighted point files plus ``manifest.json``; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (pts, w) in enumerate(zip(ds.points, ds.weights)):
        fname = f"{ds.names[i]}.txt"
        write_point_file(directory / fname, pts, w)
        entry: dict[str, Any] = {"file": fname, "name": ds.names[i], "weighted": True}
        if ds.labels is not None:
            entry["label"] = ds.labels[i]
        if ds.targets is not None:
            entry["target"] = ds.targets[i]
        entries.append(entry)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"measures": entries}, indent=2) + "\n")
    return manifest


def make_two_family_dataset(
    n_measures: int = 200,
    n_points: int = 30,
    dim: int = 2,
    separation: float = 10.0,
    jitter: float = 0.1,
    seed: int = 0,
) -> Dataset:
    """Two families of point clouds whose shapes differ by a factor ``separation``.

    Family 0 jitters a unit-scale template, family 1 a template ``separation``
    times larger. Every cloud gets a random shift, so only shape separates
    the families. Labels are the family; targets are the template scale.
    """
    if n_measures < 2:
        raise InputError(f"n_measures must be >= 2, got {n_measures}")
    rng = derive_rng(seed, STREAM_MEASURE)
    scales = (1.0, float(separation))
    templates = [s * rng.standard_normal((n_points, dim)) for s in scales]
    points, labels, targets = [], [], []
    for i in range(n_measures):
        fam = i % 2
        cloud = templates[fam] + jitter * rng.standard_normal((n_points, dim))
        cloud = cloud + rng.uniform(-50.0, 50.0, size=dim)
        points.append(cloud)
        labels.append(fam)
        targets.append(scales[fam])
    weights = [np.full(n_points, 1.0 / n_points) for _ in points]
    return Dataset(points, weights, labels=labels, targets=targets)


def make_rotated_family_dataset(
    n_families: int = 2,
    n_measures: int = 40,
    n_points: int = 30,
    dim: int = 2,
    jitter: float = 0.05,
    seed: int = 0,
) -> Dataset:
    """Families of clouds, each a randomly rotated and shifted copy of its template.

    Templates are drawn at distinct scales so rotation-invariant discrepancies
    separate the families.
    """
    if n_families < 1 or n_measures < n_families:
        raise InputError("Need n_families >= 1 and at least one measure per family")
    rng = derive_rng(seed, STREAM_MEASURE)
    templates = [
        (1.0 + 2.0 * f) * rng.standard_normal((n_points, dim)) for f in range(n_families)
    ]
    points, labels = [], []
    for i in range(n_measures):
        fam = i % n_families
        if dim > 1:
            rot = special_ortho_group.rvs(dim, random_state=rng)
        else:
            rot = np.eye(1)
        cloud = templates[fam] @ rot.T + jitter * rng.standard_normal((n_points, dim))
        points.append(cloud + rng.uniform(-10.0, 10.0, size=dim))
        labels.append(fam)
    weights = [np.full(n_points, 1.0 / n_points) for _ in points]
    return Dataset(points, weights, labels=labels)


def subset(ds: Dataset, index: Sequence[int]) -> Dataset:
    """Dataset restricted to ``index`` (in the given order)."""
    idx = list(index)
    return Dataset(
        [ds.points[i] for i in idx],
        [ds.weights[i] for i in idx],
        labels=[ds.labels[i] for i in idx] if ds.labels is not None else None,
        targets=[ds.targets[i] for i in idx] if ds.targets is not None else None,
        names=[ds.names[i] for i in idx],
        manifest_path=ds.manifest_path,
    )
