"""Double-logarithmic pre-treatment of features and concentrations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LogTransformSpec:
    """Which feature columns get a natural log, and the concentration shift.

    Concentrations map to ``ln(c + shift)``; features are never shifted, so a
    column is logged only if every training value is strictly positive.
    """

    feature_log_mask: np.ndarray
    shift: float = 1.0

    def __post_init__(self):
        mask = np.asarray(self.feature_log_mask, dtype=bool)
        object.__setattr__(self, "feature_log_mask", mask)
        if not self.shift > 0:
            raise ValueError(f"shift must be > 0, got {self.shift}")

    def to_dict(self):
        return {"shift": float(self.shift), "feature_log_mask": self.feature_log_mask.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature_log_mask"], dtype=bool), float(d["shift"]))


def fit_log_spec(X, shift: float = 1.0) -> LogTransformSpec:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("cannot fit a log spec on an empty matrix")
    return LogTransformSpec(np.all(X > 0, axis=0), shift)


def log_features(X, spec: LogTransformSpec) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    mask = spec.feature_log_mask
    if X2.shape[1] != mask.size:
        raise ValueError(f"expected {mask.size} feature columns, got {X2.shape[1]}")
    bad = (X2 <= 0) & mask
    if np.any(bad):
        row, col = np.argwhere(bad)[0]
        raise ValueError(f"non-positive value {X2[row, col]!r} at row {row}, column {col} "
                         "which is log-transformed")
    out = X2.copy()
    out[:, mask] = np.log(X2[:, mask])
    return out[0] if single else out


def log_concentration(y, spec: LogTransformSpec) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y + spec.shift <= 0):
        raise ValueError(f"concentration below -shift ({-spec.shift}) cannot be logged")
    return np.log(y + spec.shift)


def apply_log(X, y, spec: LogTransformSpec):
    """Return ``(X_log, y_log)``; ``y`` may be None at prediction time."""
    X_log = log_features(X, spec)
    y_log = None if y is None else log_concentration(y, spec)
    return X_log, y_log


def delog_predictions(y_log_hat, spec: LogTransformSpec) -> np.ndarray:
    # no clamping: sub-zero outputs are reported as the model produces them
    return np.exp(np.asarray(y_log_hat, dtype=float)) - spec.shift
