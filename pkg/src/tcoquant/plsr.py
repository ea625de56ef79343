"""
Univariate partial least squares regression (PLS1) via NIPALS.

The fitted model is stored in coefficient form, ``y_hat = b0 + X @ b``, in the
original feature units, together with the latent-variable quantities
(weights ``W``, loadings ``P``, ``q``) computed on the centered/scaled data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# X'y norms below this fraction of the first one are treated as exhausted
DEFLATION_RTOL = 1e-10


class PlsrWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ScalingSpec:
    center_x: bool = True
    scale_x: bool = True
    center_y: bool = True

    def to_dict(self):
        return {"center_x": self.center_x, "scale_x": self.scale_x, "center_y": self.center_y}

    @classmethod
    def from_dict(cls, d):
        return cls(bool(d["center_x"]), bool(d["scale_x"]), bool(d["center_y"]))


@dataclass(frozen=True, eq=False)
class PlsrModel:
    n_components: int
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    W: np.ndarray
    P: np.ndarray
    q: np.ndarray
    b: np.ndarray
    b0: float
    scaling: ScalingSpec = ScalingSpec()
    requested_components: Optional[int] = None
    x_scores: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def truncated(self) -> bool:
        """True when fitting stopped before ``requested_components``."""
        return (self.requested_components is not None
                and self.n_components < self.requested_components)

    @property
    def n_features(self) -> int:
        return self.b.size

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def to_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "requested_components": self.requested_components,
            "scaling": self.scaling.to_dict(),
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": float(self.y_mean),
            "W": self.W.tolist(),
            "P": self.P.tolist(),
            "q": self.q.tolist(),
            "b": self.b.tolist(),
            "b0": float(self.b0),
        }

    @classmethod
    def from_dict(cls, d) -> "PlsrModel":
        p = len(d["b"])
        a = int(d["n_components"])
        return cls(
            n_components=a,
            x_mean=np.array(d["x_mean"], dtype=float),
            x_scale=np.array(d["x_scale"], dtype=float),
            y_mean=float(d["y_mean"]),
            W=np.array(d["W"], dtype=float).reshape(p, a),
            P=np.array(d["P"], dtype=float).reshape(p, a),
            q=np.array(d["q"], dtype=float),
            b=np.array(d["b"], dtype=float),
            b0=float(d["b0"]),
            scaling=ScalingSpec.from_dict(d["scaling"]),
            requested_components=d.get("requested_components"),
        )


def _column_stats(X, scaling: ScalingSpec, weights):
    n, p = X.shape
    if weights is None:
        mean = X.mean(axis=0) if scaling.center_x else np.zeros(p)
        if scaling.scale_x:
            scale = X.std(axis=0, ddof=1)
        else:
            scale = np.ones(p)
    else:
        sw = weights.sum()
        mean = weights @ X / sw if scaling.center_x else np.zeros(p)
        if scaling.scale_x:
            dof = sw - (weights @ weights) / sw
            scale = np.sqrt(weights @ (X - mean) ** 2 / dof)
        else:
            scale = np.ones(p)
    col_mean = np.abs(X.mean(axis=0))
    zero_var = (scale == 0) | (scale <= 1e-12 * col_mean)
    scale = np.where(zero_var, 1.0, scale)
    return mean, scale


def max_components(n_samples: int, n_features: int) -> int:
    return min(n_samples - 1, n_features)


def fit(X, y, n_components: int, scaling: ScalingSpec = ScalingSpec(),
        sample_weight=None) -> PlsrModel:
    """Fit a PLS1 model with NIPALS.

    Parameters
    ----------
    X : array of shape (n, p)
        Feature matrix.
    y : array of shape (n,)
        Response (concentration).
    n_components : int
        Requested number of latent components, ``1 <= A <= min(n - 1, p)``.
    scaling : ScalingSpec
        Centering and autoscaling switches.
    sample_weight : array of shape (n,), optional
        Non-negative row weights. Rows enter the weighted mean/scale and the
        NIPALS iterations multiplied by ``sqrt(weight)``.

    Returns
    -------
    PlsrModel
        If ``X'y`` vanishes numerically before ``A`` components are extracted,
        the model keeps the components found so far and a ``PlsrWarning`` is
        issued (``model.truncated`` is then True).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    if n < 2:
        raise ValueError("at least two samples are required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    if np.all(y == y[0]):
        raise ValueError("y is constant; PLSR needs at least two distinct responses")
    a_max = max_components(n, p)
    if not 1 <= n_components <= a_max:
        raise ValueError(f"n_components={n_components} outside [1, {a_max}] "
                         f"for {n} samples and {p} features")

    w8 = None
    if sample_weight is not None:
        w8 = np.asarray(sample_weight, dtype=float)
        if w8.shape != (n,) or np.any(w8 < 0) or not np.all(np.isfinite(w8)):
            raise ValueError("sample_weight must be finite, non-negative, one per row")
        if np.count_nonzero(w8) < 2:
            raise ValueError("at least two rows need positive weight")

    x_mean, x_scale = _column_stats(X, scaling, w8)
    if scaling.center_y:
        y_mean = float(y.mean()) if w8 is None else float(w8 @ y / w8.sum())
    else:
        y_mean = 0.0

    Xa = (X - x_mean) / x_scale
    ya = y - y_mean
    if w8 is not None:
        root = np.sqrt(w8)
        Xa = Xa * root[:, None]
        ya = ya * root

    W = np.zeros((p, n_components))
    P = np.zeros((p, n_components))
    q = np.zeros(n_components)
    T = np.zeros((n, n_components))
    first_norm = None
    achieved = 0
    for a in range(n_components):
        w = Xa.T @ ya
        norm = np.linalg.norm(w)
        if first_norm is None:
            first_norm = norm
        if norm == 0.0 or norm <= DEFLATION_RTOL * first_norm:
            break
        w /= norm
        t = Xa @ w
        tt = t @ t
        if tt == 0.0:
            break
        pa = Xa.T @ t / tt
        qa = ya @ t / tt
        Xa = Xa - np.outer(t, pa)
        ya = ya - qa * t
        W[:, a], P[:, a], q[a], T[:, a] = w, pa, qa, t
        achieved = a + 1

    if achieved == 0:
        raise ValueError("X carries no covariance with y; no component can be extracted")
    if achieved < n_components:
        warnings.warn(f"PLSR stopped after {achieved} of {n_components} components "
                      "(deflated X'y is numerically zero)", PlsrWarning, stacklevel=2)
        W, P, q, T = W[:, :achieved], P[:, :achieved], q[:achieved], T[:, :achieved]

    b_scaled = W @ np.linalg.solve(P.T @ W, q)
    b = b_scaled / x_scale
    b0 = y_mean - x_mean @ b
    return PlsrModel(achieved, x_mean, x_scale, y_mean, W, P, q, b, float(b0),
                     scaling, n_components, T)


def predict(model: PlsrModel, X) -> np.ndarray:
    """Predict concentrations; a 1-D input is treated as a single row."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != model.n_features:
        got = X2.shape[-1] if X2.ndim else 0
        raise ValueError(f"expected {model.n_features} feature columns, got {got}")
    if not np.all(np.isfinite(X2)):
        raise ValueError("prediction input must be finite")
    out = model.b0 + X2 @ model.b
    return out[0] if single else out
