"""Simulated annotator: answers queries with correct labels and, when the
prediction is right but the explanation lists irrelevant components, with a
complete correction set against the gold relevance mask."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import CorrectionSet, Explanation, Instance
from .seeding import rng_for

RIGHT_FOR_RIGHT_REASONS = 1
WRONG_PREDICTION = 2
RIGHT_FOR_WRONG_REASONS = 3


@dataclass(frozen=True)
class Feedback:
    label: int
    correction: CorrectionSet
    case: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "flagged": sorted(self.correction.indices),
            "case": self.case,
            "source": self.correction.source,
        }


class SimulatedAnnotator:
    """Pure function of the query: labels are always correct; corrections are
    correct and complete unless the mode is disabled (classical active
    learning) or a drop probability simulates an incomplete annotator."""

    def __init__(self, task, correction_mode: str = "complete",
                 drop_prob: float = 0.0, seed: int = 0):
        if correction_mode not in ("complete", "disabled"):
            raise ValueError(f"unknown correction mode: {correction_mode!r}")
        if not 0.0 <= drop_prob < 1.0:
            raise ValueError("drop probability must lie in [0, 1)")
        self.task = task
        self.correction_mode = correction_mode
        self.drop_prob = drop_prob
        self.seed = seed
        self._responses = 0

    def _gold_relevant(self, x: Instance) -> frozenset[int]:
        try:
            return self.task.gold_mask(x).relevant
        except ValueError:
            # no gold-relevant components present: everything listed is wrong
            return frozenset()

    def respond(self, x: Instance, predicted: int, expl: Explanation,
                request_correction: bool = True) -> Feedback:
        self._responses += 1
        true_label = self.task.known_label(x)
        empty = CorrectionSet(indices=frozenset(), source="simulated")
        if predicted != true_label:
            # the explanation is necessarily wrong too, but no action is
            # required on it in this case
            return Feedback(label=true_label, correction=empty, case=WRONG_PREDICTION)
        if self.correction_mode == "disabled" or not request_correction:
            return Feedback(label=true_label, correction=empty,
                            case=RIGHT_FOR_RIGHT_REASONS)
        flagged = frozenset(j for j in expl.component_indices()
                            if j not in self._gold_relevant(x))
        if flagged and self.drop_prob > 0.0:
            rng = rng_for(self.seed, "oracle-drop", self._responses)
            flagged = frozenset(j for j in sorted(flagged)
                                if rng.random() >= self.drop_prob)
        if not flagged:
            return Feedback(label=true_label, correction=empty,
                            case=RIGHT_FOR_RIGHT_REASONS)
        correction = CorrectionSet(indices=flagged, source="simulated")
        return Feedback(label=true_label, correction=correction,
                        case=RIGHT_FOR_WRONG_REASONS)
