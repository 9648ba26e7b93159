"""Stacked super learners for severity classification and score regression,
model-agnostic explanations, explanation-guided feature reduction and a
portable inference benchmark."""
from .data import (Dataset, FeatureSchema, FoldPlan, Standardizer, SyntheticSpec,
                   apply_standardizer, fit_standardizer, generate_planted, load_csv, make_windows,
                   split_kfold, window_dataset, write_csv)
from .ensemble import (MetaMatrix, SuperLearner, SuperLearnerModel, SuperLearnerSpec, base_specs,
                       build_oof_meta, fit_super, predict_super)
from .exceptions import (ArchiveError, BadMagicError, ChecksumError, ConfigError, DataError,
                         MalformedArchiveError, StackReduceError, TruncatedArchiveError,
                         UnsupportedVersionError)
from .learners import LearnerSpec, predict_scores
from .metrics import EvalReport, classification_metrics, crossval_evaluate, regression_metrics
from .reduce import ReductionPlan, merge_rankings, plan_reduction, retrain_reduced, select_top
from .runtime import BenchReport, bench_inference, load_model, save_model

__version__ = "0.1.0"
