"""
The three quantification variants behind one interface.

``raw_plsr``
    PLS1 on the features as extracted.
``log_plsr``
    PLS1 on log features against ``ln(c + shift)``; predictions are mapped
    back with ``exp(.) - shift``.
``lw_plsr``
    Locally weighted PLSR on the raw features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import plsr
from ._io import atomic_write_text, dump_json
from .lw_plsr import LwConfig, LwModel, fit_lw
from .plsr import PlsrModel, ScalingSpec
from .transforms import (LogTransformSpec, apply_log, delog_predictions, fit_log_spec,
                         log_features)

VARIANTS = ("raw_plsr", "log_plsr", "lw_plsr")
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    variant: str = "raw_plsr"
    n_components: int = 1
    scaling: ScalingSpec = ScalingSpec()
    shift: float = 1.0
    lw: Optional[LwConfig] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "lw_plsr":
            if self.lw is None:
                raise ValueError("lw_plsr needs an LwConfig")
            # component count and scaling of the ModelSpec drive the local models
            object.__setattr__(self, "lw", replace(self.lw, n_components=self.n_components,
                                                   scaling=self.scaling))

    def with_components(self, n_components: int) -> "ModelSpec":
        return replace(self, n_components=n_components)

    def to_dict(self):
        return {"variant": self.variant, "n_components": self.n_components,
                "scaling": self.scaling.to_dict(), "shift": self.shift,
                "lw": None if self.lw is None else self.lw.to_dict()}

    @classmethod
    def from_dict(cls, d):
        lw = None if d.get("lw") is None else LwConfig.from_dict(d["lw"])
        return cls(d["variant"], int(d["n_components"]), ScalingSpec.from_dict(d["scaling"]),
                   float(d.get("shift", 1.0)), lw)


@dataclass(frozen=True, eq=False)
class LogPlsrModel:
    log_spec: LogTransformSpec
    plsr: PlsrModel

    @property
    def n_components(self):
        return self.plsr.n_components

    @property
    def n_features(self):
        return self.plsr.n_features

    def predict(self, X) -> np.ndarray:
        return delog_predictions(plsr.predict(self.plsr, log_features(X, self.log_spec)),
                                 self.log_spec)


FittedModel = Union[PlsrModel, LogPlsrModel, LwModel]


def fit_model(X, y, spec: ModelSpec) -> FittedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.variant == "raw_plsr":
        return plsr.fit(X, y, spec.n_components, spec.scaling)
    if spec.variant == "log_plsr":
        log_spec = fit_log_spec(X, spec.shift)
        X_log, y_log = apply_log(X, y, log_spec)
        return LogPlsrModel(log_spec, plsr.fit(X_log, y_log, spec.n_components, spec.scaling))
    return fit_lw(X, y, spec.lw)


def predict_model(model: FittedModel, X, threads: int = 1) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if isinstance(model, LwModel):
        return model.predict(np.atleast_2d(X), threads=threads)
    return np.atleast_1d(model.predict(X))


def feasible_max_components(n_samples: int, n_features: int, spec: ModelSpec) -> int:
    """Largest A usable in every leave-one-out fold."""
    if spec.variant == "lw_plsr":
        return min(spec.lw.k - 1, n_features)
    return plsr.max_components(n_samples - 1, n_features)


# --- model documents ----------------------------------------------------------

@dataclass
class ModelDocument:
    """Serializable fitted model plus the settings that produced it."""

    spec: ModelSpec
    model: FittedModel
    tolerance: Optional[float] = None
    max_components: Optional[int] = None
    rmsecv_curve: Optional[list] = None
    n_segments: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"format_version": MODEL_FORMAT_VERSION, "kind": "tcoquant.model",
             "variant": self.spec.variant, "model_spec": self.spec.to_dict(),
             "tolerance": self.tolerance, "max_components": self.max_components,
             "rmsecv_curve": self.rmsecv_curve, "n_segments": self.n_segments}
        if isinstance(self.model, PlsrModel):
            d["plsr"] = self.model.to_dict()
        elif isinstance(self.model, LogPlsrModel):
            d["plsr"] = self.model.plsr.to_dict()
            d["log_spec"] = self.model.log_spec.to_dict()
        else:
            d["lw"] = self.model.to_dict()
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d) -> "ModelDocument":
        if d.get("kind") != "tcoquant.model":
            raise ValueError("not a model document")
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
        spec = ModelSpec.from_dict(d["model_spec"])
        if spec.variant == "raw_plsr":
            model = PlsrModel.from_dict(d["plsr"])
        elif spec.variant == "log_plsr":
            model = LogPlsrModel(LogTransformSpec.from_dict(d["log_spec"]),
                                 PlsrModel.from_dict(d["plsr"]))
        else:
            model = LwModel.from_dict(d["lw"])
        known = {"format_version", "kind", "variant", "model_spec", "tolerance",
                 "max_components", "rmsecv_curve", "n_segments", "plsr", "log_spec", "lw"}
        extra = {k: v for k, v in d.items() if k not in known}
        return cls(spec, model, d.get("tolerance"), d.get("max_components"),
                   d.get("rmsecv_curve"), d.get("n_segments"), extra)

    def save(self, path) -> None:
        atomic_write_text(path, dump_json(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ModelDocument":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
