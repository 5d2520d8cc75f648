"""Explanatory interactive learning: an active learner that explains each
query with a sparse local surrogate and learns from label and explanation
corrections via counterexample augmentation."""

from .core import (CorrectionSet, Example, Explanation, Instance, Pool,
                   RelevanceMask, correction_from_gold, explanation_f1)
from .corrections import CounterexampleStrategy, to_counterexamples
from .explainer import LimeConfig, explain, fit_sparse_surrogate, sample_neighborhood
from .learners import (LinearFitConfig, LinearModel, MlpFitConfig, MlpModel,
                       decompose_weights, fit, predict, score, select_query)
from .oracle import Feedback, SimulatedAnnotator
from .session import (MetricRecord, SessionEngine, SessionSpec, cross_validate,
                      evaluate_explanations_on_test, run_session)

__version__ = "0.1.0"

__all__ = [
    "CorrectionSet", "Example", "Explanation", "Instance", "Pool",
    "RelevanceMask", "correction_from_gold", "explanation_f1",
    "CounterexampleStrategy", "to_counterexamples",
    "LimeConfig", "explain", "fit_sparse_surrogate", "sample_neighborhood",
    "LinearFitConfig", "LinearModel", "MlpFitConfig", "MlpModel",
    "decompose_weights", "fit", "predict", "score", "select_query",
    "Feedback", "SimulatedAnnotator",
    "MetricRecord", "SessionEngine", "SessionSpec", "cross_validate",
    "evaluate_explanations_on_test", "run_session",
]
