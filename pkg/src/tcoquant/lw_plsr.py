"""
Locally weighted PLSR: one local PLS1 model per query, fit on the ``k``
nearest training rows.

Neighbors are found in the autoscaled feature space of the training set.
Training rows whose features equal the query exactly are dropped before the
search, so predicting a training sample behaves like leave-one-out.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import plsr
from .plsr import ScalingSpec

DISTANCES = ("euclidean_scaled", "euclidean")
WEIGHTINGS = ("uniform", "tricube")
# tricube bandwidth relative to the farthest neighbor; keeps every weight > 0
TRICUBE_BANDWIDTH = 1.1


@dataclass(frozen=True)
class LwConfig:
    k: int
    n_components: int = 1
    distance: str = "euclidean_scaled"
    weighting: str = "uniform"
    scaling: ScalingSpec = ScalingSpec()

    def __post_init__(self):
        if self.distance not in DISTANCES:
            raise ValueError(f"unknown distance {self.distance!r}; choose from {DISTANCES}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}; choose from {WEIGHTINGS}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")

    def to_dict(self):
        return {"k": self.k, "n_components": self.n_components, "distance": self.distance,
                "weighting": self.weighting, "scaling": self.scaling.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["k"]), int(d["n_components"]), d["distance"], d["weighting"],
                   ScalingSpec.from_dict(d["scaling"]))


def _metric_scale(train_X, distance):
    p = train_X.shape[1]
    if distance == "euclidean":
        return np.zeros(p), np.ones(p)
    mean = train_X.mean(axis=0)
    scale = train_X.std(axis=0, ddof=1) if train_X.shape[0] > 1 else np.ones(p)
    return mean, np.where(scale > 0, scale, 1.0)


def _ranked_neighbors(Z, z, X, x):
    """Candidate row indices ordered by distance (ties: lower index first),
    with rows identical to ``x`` removed. Returns ``(order, distances)``."""
    d = np.sqrt(((Z - z) ** 2).sum(axis=1))
    keep = ~np.all(X == x, axis=1)
    idx = np.flatnonzero(keep)
    order = idx[np.argsort(d[idx], kind="stable")]
    return order, d


def _check(train_X, train_y, config):
    train_X = np.asarray(train_X, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    if train_X.ndim != 2 or train_y.shape != (train_X.shape[0],):
        raise ValueError("train_X must be (n, p) with one response per row")
    n, p = train_X.shape
    if not 2 <= config.k <= n:
        raise ValueError(f"k={config.k} out of range [2, {n}]")
    a_max = min(config.k - 1, p)
    if config.n_components > a_max:
        raise ValueError(f"n_components={config.n_components} exceeds min(k - 1, p) = {a_max}")
    return train_X, train_y


def neighborhood(train_X, query, config: LwConfig, _metric=None):
    """Indices (ascending) of the rows used for the local model, and their distances."""
    train_X = np.asarray(train_X, dtype=float)
    query = np.asarray(query, dtype=float)
    mean, scale = _metric if _metric is not None else _metric_scale(train_X, config.distance)
    Z = (train_X - mean) / scale
    z = (query - mean) / scale
    order, d = _ranked_neighbors(Z, z, train_X, query)
    if order.size < config.k:
        raise ValueError(f"only {order.size} candidate neighbors after excluding rows "
                         f"identical to the query; k={config.k}")
    chosen = np.sort(order[:config.k])
    return chosen, d[chosen]


def _tricube(d):
    dmax = d.max()
    if dmax == 0:
        return np.ones_like(d)
    u = d / (TRICUBE_BANDWIDTH * dmax)
    return (1 - u ** 3) ** 3


def _predict_one(train_X, train_y, query, config, metric):
    query = np.asarray(query, dtype=float)
    if query.shape != (train_X.shape[1],) or not np.all(np.isfinite(query)):
        raise ValueError(f"query must be a finite vector of {train_X.shape[1]} features")
    idx, d = neighborhood(train_X, query, config, metric)
    y_loc = train_y[idx]
    if np.all(y_loc == y_loc[0]):
        raise ValueError(f"all {config.k} neighbors share concentration {y_loc[0]}; "
                         "increase k (see choose_k)")
    weights = _tricube(d) if config.weighting == "tricube" else None
    local = plsr.fit(train_X[idx], y_loc, config.n_components, config.scaling, weights)
    return float(plsr.predict(local, query))


def predict_lw(train_X, train_y, query, config: LwConfig) -> float:
    """Prediction for a single query vector."""
    train_X, train_y = _check(train_X, train_y, config)
    metric = _metric_scale(train_X, config.distance)
    return _predict_one(train_X, train_y, query, config, metric)


def predict_lw_many(train_X, train_y, queries, config: LwConfig, threads: int = 1) -> np.ndarray:
    train_X, train_y = _check(train_X, train_y, config)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != train_X.shape[1]:
        raise ValueError(f"expected {train_X.shape[1]} feature columns, got {queries.shape[1]}")
    metric = _metric_scale(train_X, config.distance)

    def one(i):
        return _predict_one(train_X, train_y, queries[i], config, metric)

    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, range(len(queries))))
    else:
        out = [one(i) for i in range(len(queries))]
    return np.array(out, dtype=float)


def choose_k(train_X, train_y, config: Optional[LwConfig] = None, k_min: int = 2) -> int:
    """Smallest ``k`` for which every training row's ``k`` nearest other rows
    hold at least two distinct concentrations."""
    X = np.asarray(train_X, dtype=float)
    y = np.asarray(train_y, dtype=float)
    if np.unique(y).size < 2:
        raise ValueError("choose_k needs at least two distinct concentrations")
    distance = config.distance if config is not None else "euclidean_scaled"
    mean, scale = _metric_scale(X, distance)
    Z = (X - mean) / scale
    k = k_min
    for i in range(X.shape[0]):
        order, _ = _ranked_neighbors(Z, Z[i], X, X[i])
        labels = y[order]
        differs = np.flatnonzero(labels != labels[0])
        if differs.size == 0:
            raise ValueError(f"row {i}: no neighbor set spans two concentrations")
        k = max(k, int(differs[0]) + 1)
    return k


@dataclass(frozen=True, eq=False)
class LwModel:
    """The training set itself plus the local-model settings."""

    train_X: np.ndarray
    train_y: np.ndarray
    config: LwConfig

    @property
    def n_components(self):
        return self.config.n_components

    @property
    def n_features(self):
        return self.train_X.shape[1]

    def predict(self, X, threads: int = 1) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return predict_lw(self.train_X, self.train_y, X, self.config)
        return predict_lw_many(self.train_X, self.train_y, X, self.config, threads)

    def with_components(self, n_components):
        return replace(self, config=replace(self.config, n_components=n_components))

    def to_dict(self):
        mean, scale = _metric_scale(self.train_X, self.config.distance)
        return {"config": self.config.to_dict(), "train_X": self.train_X.tolist(),
                "train_y": self.train_y.tolist(),
                "metric_mean": mean.tolist(), "metric_scale": scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        X = np.array(d["train_X"], dtype=float)
        return cls(X.reshape(len(d["train_y"]), -1), np.array(d["train_y"], dtype=float),
                   LwConfig.from_dict(d["config"]))


def fit_lw(train_X, train_y, config: LwConfig) -> LwModel:
    train_X, train_y = _check(train_X, train_y, config)
    return LwModel(train_X.copy(), train_y.copy(), config)
