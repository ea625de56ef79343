"""
Leave-one-out cross-validation, component selection and model metrics.

Metrics are in ppb:

* ``rmse``: fit error of the model trained on all rows.
* ``rmsecv``: error of the leave-one-out predictions.
* ``rmsem``: RMS deviation of per-concentration mean predictions from the
  true concentrations, each concentration weighted equally (linearity).
* ``uncertainty``: ``4 * max(sd)`` over concentration groups, i.e. the full
  span of the widest +-2 sd error bar (resolution).
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._io import atomic_write_text, dump_json, fmt
from .pipeline import ModelSpec, feasible_max_components, fit_model, predict_model

REPORT_SCHEMA_VERSION = 1
DEFAULT_TOLERANCE = 0.05


class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"LOOCV fold {fold} (sample left out: row {fold}) failed: {cause}")
        self.fold = fold
        self.cause = cause


# --- metrics ------------------------------------------------------------------

def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size == 0 or pred.shape != truth.shape:
        raise ValueError(f"need equal, non-zero lengths (got {pred.size} and {truth.size})")
    return pred, truth


def rmse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    d = pred - truth
    # scale first so tiny residuals do not underflow to an exact zero
    m = float(np.max(np.abs(d)))
    if m == 0.0 or not math.isfinite(m):
        return m
    return m * math.sqrt(np.mean((d / m) ** 2))


@dataclass(frozen=True)
class GroupStats:
    concentration: float
    n: int
    mean_pred: float
    sd_pred: float

    def to_dict(self):
        return {"concentration": self.concentration, "n": self.n,
                "mean_pred": self.mean_pred, "sd_pred": self.sd_pred}


def group_stats(pred, truth) -> list[GroupStats]:
    """Per-concentration mean and sample (n-1) standard deviation, sorted by concentration."""
    pred, truth = _pair(pred, truth)
    out = []
    for c in np.unique(truth):
        g = pred[truth == c]
        sd = float(g.std(ddof=1)) if g.size > 1 else 0.0
        out.append(GroupStats(float(c), int(g.size), float(g.mean()), sd))
    return out


def rmsem(pred, truth) -> float:
    groups = group_stats(pred, truth)
    if len(groups) < 2:
        raise ValueError("RMSEM needs at least two distinct concentrations")
    dev = np.array([g.mean_pred - g.concentration for g in groups])
    return math.sqrt(np.mean(dev ** 2))


def _uncertainty(groups: Sequence[GroupStats]) -> float:
    singles = [g.concentration for g in groups if g.n < 2]
    usable = [g for g in groups if g.n >= 2]
    if singles:
        warnings.warn(f"groups with a single sample ignored for uncertainty: {singles}",
                      stacklevel=3)
    if not usable:
        raise ValueError("uncertainty needs a concentration group with at least two samples")
    return 4.0 * max(g.sd_pred for g in usable)


def uncertainty(pred, truth) -> float:
    return _uncertainty(group_stats(pred, truth))


def uncertainty_in_range(pred, truth, c_max: float) -> float:
    groups = [g for g in group_stats(pred, truth) if g.concentration <= c_max]
    if not groups:
        raise ValueError(f"no concentration group at or below {c_max} ppb")
    return _uncertainty(groups)


# --- cross-validation -----------------------------------------------------------

def _fold(X, y, spec, i):
    keep = np.ones(len(y), dtype=bool)
    keep[i] = False
    try:
        model = fit_model(X[keep], y[keep], spec)
        return float(predict_model(model, X[i:i + 1])[0])
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FoldError(i, exc) from exc


def loocv(X, y, spec: ModelSpec, threads: int = 1):
    """Leave-one-out predictions and RMSECV.

    Every fold refits the complete variant, including scaling and log mask,
    on the remaining rows. Returns ``(cv_predictions, rmsecv)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 3:
        raise ValueError("LOOCV needs at least three samples")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cv = list(pool.map(lambda i: _fold(X, y, spec, i), range(n)))
    else:
        cv = [_fold(X, y, spec, i) for i in range(n)]
    cv = np.array(cv)
    return cv, rmse(cv, y)


def pick_components(curve, tolerance: float = DEFAULT_TOLERANCE) -> int:
    """Fewest components whose RMSECV is within ``(1 + tolerance)`` of the minimum.

    ``curve[j]`` is the RMSECV with ``j + 1`` components; NaN marks a count
    that could not be evaluated.
    """
    curve = np.asarray(curve, dtype=float)
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    ok = np.isfinite(curve)
    if not ok.any():
        raise ValueError("no component count could be evaluated")
    limit = (1 + tolerance) * curve[ok].min()
    return int(np.flatnonzero(ok & (curve <= limit))[0]) + 1


def select_components(X, y, template: ModelSpec, max_components: int,
                      tolerance: float = DEFAULT_TOLERANCE, threads: int = 1):
    """RMSECV for ``A = 1..max_components`` and the selected ``A``.

    Returns ``(best_A, curve)`` with ``curve`` a list of length
    ``max_components``; entries are NaN where every fold count failed.
    """
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    feasible = feasible_max_components(len(y), X.shape[1], template)
    curve = []
    errors = []
    for a in range(1, max_components + 1):
        if a > feasible:
            curve.append(float("nan"))
            continue
        try:
            curve.append(loocv(X, y, template.with_components(a), threads)[1])
        except FoldError as exc:
            errors.append(exc)
            curve.append(float("nan"))
    if not np.isfinite(curve).any():
        detail = f": {errors[0]}" if errors else f" (feasible maximum is {feasible})"
        raise ValueError(f"no component count survived cross-validation{detail}")
    return pick_components(curve, tolerance), curve


# --- reports --------------------------------------------------------------------

@dataclass
class ModelReport:
    variant: str
    n_components: int
    rmse: float
    rmsecv: float
    rmsem: float
    uncertainty: float
    groups: list[GroupStats]
    truth: np.ndarray
    fitted: np.ndarray
    cross_validated: np.ndarray
    model_spec: dict = field(default_factory=dict)
    rmsecv_curve: Optional[list] = None
    tolerance: Optional[float] = None
    uncertainty_in_range: dict = field(default_factory=dict)
    cycle_ids: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        ids = self.cycle_ids if self.cycle_ids is not None else np.arange(len(self.truth))
        curve = None if self.rmsecv_curve is None else [
            v if math.isfinite(v) else None for v in self.rmsecv_curve]
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "tcoquant.report",
            "variant": self.variant,
            "model_spec": self.model_spec,
            "n_components": self.n_components,
            "tolerance": self.tolerance,
            "metrics": {"rmse": self.rmse, "rmsecv": self.rmsecv, "rmsem": self.rmsem,
                        "uncertainty": self.uncertainty,
                        "uncertainty_in_range": self.uncertainty_in_range},
            "rmsecv_curve": curve,
            "groups": [g.to_dict() for g in self.groups],
            "predictions": [
                {"cycle_id": int(c), "true": float(t), "fitted": float(f), "cv": float(v)}
                for c, t, f, v in zip(ids, self.truth, self.fitted, self.cross_validated)],
        }

    @classmethod
    def from_dict(cls, d) -> "ModelReport":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        m = d["metrics"]
        preds = d["predictions"]
        curve = d.get("rmsecv_curve")
        return cls(
            variant=d["variant"], n_components=int(d["n_components"]),
            rmse=m["rmse"], rmsecv=m["rmsecv"], rmsem=m["rmsem"], uncertainty=m["uncertainty"],
            groups=[GroupStats(**g) for g in d["groups"]],
            truth=np.array([p["true"] for p in preds], dtype=float),
            fitted=np.array([p["fitted"] for p in preds], dtype=float),
            cross_validated=np.array([p["cv"] for p in preds], dtype=float),
            model_spec=d.get("model_spec", {}),
            rmsecv_curve=None if curve is None else [
                float("nan") if v is None else v for v in curve],
            tolerance=d.get("tolerance"),
            uncertainty_in_range=dict(m.get("uncertainty_in_range", {})),
            cycle_ids=np.array([p["cycle_id"] for p in preds], dtype=int),
        )

    def to_json(self) -> str:
        return dump_json(self.to_dict())

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "ModelReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def plot_csv(self) -> str:
        """Per-group rows for a predicted-vs-true chart (error bar = +-2 sd)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["concentration_ppb", "mean_pred", "sd_pred", "n"])
        for g in self.groups:
            w.writerow([fmt(g.concentration), fmt(g.mean_pred), fmt(g.sd_pred), g.n])
        return buf.getvalue()


def build_report(X, y, spec: ModelSpec, rmsecv_curve=None, tolerance=None,
                 range_limits: Sequence[float] = (20.0,), cycle_ids=None,
                 threads: int = 1) -> ModelReport:
    """Fit on all rows, cross-validate, and collect the metrics.

    Group statistics, RMSEM and uncertainty use the fitted (not the
    cross-validated) predictions.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    model = fit_model(X, y, spec)
    fitted = predict_model(model, X, threads=threads)
    cv, rmsecv = loocv(X, y, spec, threads)
    groups = group_stats(fitted, y)
    in_range = {}
    for c_max in range_limits:
        try:
            in_range[fmt(c_max)] = uncertainty_in_range(fitted, y, c_max)
        except ValueError:
            pass
    return ModelReport(
        variant=spec.variant, n_components=model.n_components,
        rmse=rmse(fitted, y), rmsecv=rmsecv, rmsem=rmsem(fitted, y),
        uncertainty=_uncertainty(groups), groups=groups, truth=y.copy(), fitted=fitted,
        cross_validated=cv, model_spec=spec.to_dict(),
        rmsecv_curve=None if rmsecv_curve is None else list(rmsecv_curve),
        tolerance=tolerance, uncertainty_in_range=in_range,
        cycle_ids=None if cycle_ids is None else np.asarray(cycle_ids, dtype=int))
