"""Task protocol: a task owns the interpretable representation, the model
feature map, gold knowledge, and how components map back onto raw inputs."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..core import Instance, Payload, RelevanceMask


class Task:
    """Shared surface every dataset exposes to the loop, explainer and UI.

    d:          dimension of the interpretable representation.
    n_classes:  number of labels.
    baseline:   value components are overwritten with when made absent.
    """

    name: str = "task"
    d: int
    n_classes: int

    # -- representation -------------------------------------------------

    def interp(self, payload: Payload) -> np.ndarray:
        """Binary presence vector of the interpretable components."""
        raise NotImplementedError

    def make_instance(self, payload: Payload) -> Instance:
        from ..core import make_instance
        return make_instance(payload, self.interp(payload))

    def model_features(self, inst: Instance) -> np.ndarray:
        """Feature vector the learners consume (may differ from interp)."""
        raise NotImplementedError

    def feature_dim(self) -> int:
        raise NotImplementedError

    # -- component geometry ----------------------------------------------

    def without_components(self, inst: Instance, absent: Sequence[int]) -> Instance:
        """Map an interpretable sample back to a raw instance: the footprint
        of every component in ``absent`` is overwritten with the baseline."""
        raise NotImplementedError

    def batch_model_features_without(self, inst: Instance, absent: np.ndarray,
                                     rng: Optional[np.random.Generator] = None
                                     ) -> np.ndarray:
        """Model features of a batch of perturbed samples; ``absent`` is a
        (samples, d) boolean matrix.  Tasks whose absence semantics need
        randomness draw it from ``rng``."""
        rows = []
        for i in range(absent.shape[0]):
            mapped = self.without_components(inst, list(np.flatnonzero(absent[i])))
            rows.append(self.model_features(mapped))
        return np.stack(rows)

    def component_cells(self, j: int) -> tuple[int, ...]:
        """Flat payload positions a component occupies (for rendering)."""
        raise NotImplementedError

    def component_footprint(self, j: int) -> tuple[int, ...]:
        """Flat payload positions mutated when component ``j`` is altered."""
        return self.component_cells(j)

    def component_alternatives(self, inst: Instance, j: int) -> list:
        """Alternative contents for component ``j`` (finite domains only)."""
        raise NotImplementedError

    def replace_component(self, inst: Instance, j: int, value) -> Instance:
        """New instance with component ``j``'s footprint set to ``value``."""
        raise NotImplementedError

    # -- gold knowledge ---------------------------------------------------

    def gold_mask(self, inst: Optional[Instance] = None) -> RelevanceMask:
        """Gold relevant components; per-instance for tasks that need it."""
        raise NotImplementedError

    def known_label(self, inst: Instance) -> int:
        """Gold label of a generated instance (the simulated annotator's)."""
        raise NotImplementedError

    def rule_label(self, inst: Instance) -> Optional[int]:
        """Exact rule oracle for arbitrary instances; None when the task has
        no rule (label-consistency filtering is then disabled)."""
        return None

    def explanation_k(self, inst: Instance) -> int:
        """Sparsity budget used when explaining a prediction for ``inst``."""
        raise NotImplementedError
