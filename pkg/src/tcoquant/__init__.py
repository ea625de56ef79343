"""Gas concentration from temperature-cycled sensor features with PLSR variants."""

from .cycle_features import (CycleRecord, FeatureConfig, FeatureMatrix, FeatureVector,
                             build_feature_matrix, extract_features, segment_cycle)
from .lw_plsr import LwConfig, LwModel, choose_k, predict_lw
from .pipeline import LogPlsrModel, ModelDocument, ModelSpec, fit_model, predict_model
from .plsr import PlsrModel, ScalingSpec
from .plsr import fit as fit_plsr
from .plsr import predict as predict_plsr
from .synth import SynthConfig, generate, paper_schedule
from .transforms import LogTransformSpec, apply_log, delog_predictions, fit_log_spec
from .validation import (GroupStats, ModelReport, build_report, loocv, rmse, rmsem,
                         select_components, uncertainty, uncertainty_in_range)

__version__ = "0.1.0"
