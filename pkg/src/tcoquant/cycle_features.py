"""
Segment mean/slope features for temperature-cycled sensor traces.

Each cycle is cut into ``R`` contiguous index ranges. For every range the
arithmetic mean of the conductance and its least-squares slope against time
are computed, giving ``2R`` features ordered ``[mean_1..mean_R, slope_1..slope_R]``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._io import atomic_write_text, fmt


class CycleError(ValueError):
    """Raised for malformed cycles. Carries the offending ``cycle_id``."""

    def __init__(self, message: str, cycle_id=None):
        super().__init__(message)
        self.cycle_id = cycle_id


@dataclass(frozen=True)
class CycleRecord:
    cycle_id: int
    t: np.ndarray
    g: np.ndarray
    concentration: Optional[float] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        g = np.asarray(self.g, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "g", g)
        if t.ndim != 1 or t.shape != g.shape:
            raise CycleError(
                f"cycle {self.cycle_id}: t and g must be 1-D of equal length "
                f"(got {t.shape} and {g.shape})", self.cycle_id)
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(g)):
            raise CycleError(f"cycle {self.cycle_id}: non-finite sample", self.cycle_id)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise CycleError(f"cycle {self.cycle_id}: timestamps not strictly increasing",
                             self.cycle_id)
        if self.concentration is not None:
            c = float(self.concentration)
            if not math.isfinite(c) or c < 0:
                raise CycleError(f"cycle {self.cycle_id}: concentration must be >= 0, got {c}",
                                 self.cycle_id)
            object.__setattr__(self, "concentration", c)

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class FeatureConfig:
    n_segments: int = 10

    def __post_init__(self):
        if int(self.n_segments) != self.n_segments or self.n_segments < 1:
            raise ValueError(f"n_segments must be a positive integer, got {self.n_segments}")


@dataclass(frozen=True)
class FeatureVector:
    cycle_id: int
    means: np.ndarray
    slopes: np.ndarray
    concentration: Optional[float] = None

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.means, self.slopes])


def column_labels(n_segments: int) -> list[str]:
    return ([f"mean_{i}" for i in range(1, n_segments + 1)]
            + [f"slope_{i}" for i in range(1, n_segments + 1)])


@dataclass
class FeatureMatrix:
    """Feature rows with their concentration labels.

    ``y`` is ``None`` for unlabeled (prediction-mode) matrices.
    """

    X: np.ndarray
    y: Optional[np.ndarray]
    cycle_ids: np.ndarray
    column_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.cycle_ids = np.asarray(self.cycle_ids, dtype=int)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float)
            if self.y.shape != (self.X.shape[0],):
                raise ValueError(f"y has {self.y.shape[0]} entries for {self.X.shape[0]} rows")
            if not np.all(np.isfinite(self.y)):
                raise ValueError("y contains non-finite values")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite values")
        if not self.column_labels:
            self.column_labels = column_labels(self.X.shape[1] // 2)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]


def segment_cycle(cycle: CycleRecord, config: FeatureConfig = FeatureConfig()) -> list[range]:
    """Split sample indices into ``R`` contiguous ranges.

    Sizes differ by at most one; the first ``len(cycle) % R`` ranges take the
    extra sample. Every range must hold at least two samples so that a slope
    is defined.
    """
    n, r = len(cycle), config.n_segments
    if n < 2 * r:
        raise CycleError(
            f"cycle {cycle.cycle_id}: {n} samples is too short for {r} segments "
            f"(need at least {2 * r})", cycle.cycle_id)
    base, extra = divmod(n, r)
    ranges = []
    start = 0
    for i in range(r):
        size = base + (1 if i < extra else 0)
        ranges.append(range(start, start + size))
        start += size
    return ranges


def _ols_slope(t: np.ndarray, g: np.ndarray) -> float:
    tc = t - t.mean()
    denom = tc @ tc
    if denom == 0.0:
        raise ValueError("degenerate segment: all timestamps equal")
    return float(tc @ (g - g.mean()) / denom)


def extract_features(cycle: CycleRecord, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    ranges = segment_cycle(cycle, config)
    means = np.empty(len(ranges))
    slopes = np.empty(len(ranges))
    for i, rng in enumerate(ranges):
        sl = slice(rng.start, rng.stop)
        g = cycle.g[sl]
        means[i] = g.mean()
        try:
            slopes[i] = _ols_slope(cycle.t[sl], g)
        except ValueError as exc:
            raise CycleError(f"cycle {cycle.cycle_id}, segment {i + 1}: {exc}",
                             cycle.cycle_id) from None
    return FeatureVector(cycle.cycle_id, means, slopes, cycle.concentration)


def build_feature_matrix(cycles: Sequence[CycleRecord],
                         config: FeatureConfig = FeatureConfig(),
                         training: bool = True) -> FeatureMatrix:
    """Stack the feature vectors of ``cycles`` in input order.

    In training mode every cycle must carry a concentration. In prediction
    mode labels are kept only if all cycles have one.
    """
    r = config.n_segments
    labeled = [c.concentration is not None for c in cycles]
    if training and not all(labeled):
        missing = [c.cycle_id for c in cycles if c.concentration is None]
        raise ValueError(f"training mode requires labeled cycles; unlabeled: {missing[:10]}")
    rows = [extract_features(c, config).as_array() for c in cycles]
    X = np.vstack(rows) if rows else np.empty((0, 2 * r))
    y = None
    if cycles and all(labeled):
        y = np.array([c.concentration for c in cycles], dtype=float)
    elif not cycles:
        y = np.empty(0)
    ids = np.array([c.cycle_id for c in cycles], dtype=int)
    return FeatureMatrix(X, y, ids, column_labels(r))


# --- CSV formats -----------------------------------------------------------

RAW_HEADER = ["cycle_id", "t_seconds", "conductance_siemens", "concentration_ppb"]


def cycles_to_csv(cycles: Sequence[CycleRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_HEADER)
    for c in cycles:
        conc = "" if c.concentration is None else fmt(c.concentration)
        for t, g in zip(c.t, c.g):
            w.writerow([c.cycle_id, fmt(t), fmt(g), conc])
    return buf.getvalue()


def write_cycles_csv(path, cycles: Sequence[CycleRecord]) -> None:
    atomic_write_text(path, cycles_to_csv(cycles))


def read_cycles_csv(path) -> list[CycleRecord]:
    """Read the one-row-per-sample raw format; cycles keep first-seen order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file (header required)") from None
        if header[:3] != RAW_HEADER[:3] or len(header) > 4 or (
                len(header) == 4 and header[3] != RAW_HEADER[3]):
            raise ValueError(f"{path}: unexpected header {header}")
        order: list[int] = []
        data: dict[int, tuple[list, list, list]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cid = int(row[0])
                t, g = float(row[1]), float(row[2])
                conc = row[3].strip() if len(row) > 3 else ""
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed row {row}") from None
            if cid not in data:
                order.append(cid)
                data[cid] = ([], [], [])
            ts, gs, cs = data[cid]
            ts.append(t)
            gs.append(g)
            cs.append(conc)
    if not order:
        raise ValueError(f"{path}: no samples")
    cycles = []
    for cid in order:
        ts, gs, cs = data[cid]
        if len(set(cs)) != 1:
            raise CycleError(f"cycle {cid}: concentration not constant within cycle", cid)
        conc = float(cs[0]) if cs[0] else None
        cycles.append(CycleRecord(cid, np.array(ts), np.array(gs), conc))
    return cycles


def features_to_csv(fm: FeatureMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle_id", "concentration_ppb", *fm.column_labels])
    for i in range(fm.n_samples):
        conc = "" if fm.y is None else fmt(fm.y[i])
        w.writerow([int(fm.cycle_ids[i]), conc, *(fmt(v) for v in fm.X[i])])
    return buf.getvalue()


def write_features_csv(path, fm: FeatureMatrix) -> None:
    atomic_write_text(path, features_to_csv(fm))


def read_features_csv(path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file (header required)") from None
        if header[:2] != ["cycle_id", "concentration_ppb"] or len(header) < 4 or len(header) % 2:
            raise ValueError(f"{path}: unexpected header {header[:4]}...")
        labels = header[2:]
        ids, concs, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                ids.append(int(row[0]))
                concs.append(row[1].strip())
                rows.append([float(v) for v in row[2:]])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed row") from None
    X = np.array(rows, dtype=float).reshape(len(rows), len(labels))
    if concs and all(concs):
        y = np.array([float(c) for c in concs])
    elif not concs:
        y = np.empty(0)
    else:
        y = None
    return FeatureMatrix(X, y, np.array(ids, dtype=int), labels)
