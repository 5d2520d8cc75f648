"""Convert explanation corrections into counterexamples.

For every flagged component the query is copied with that component's content
altered (randomized, enumerated over alternatives, or substituted from
same-class examples), labeled with the prediction; document tasks instead get
one copy with all flagged words removed.  Candidates that land in the test
set are always discarded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .core import (COUNTEREXAMPLE_PROVENANCE, CorrectionSet, DocumentPayload,
                   Example, ImagePayload, Instance)
from .seeding import rng_for

log = logging.getLogger(__name__)

RANDOMIZE = "randomize"
ENUMERATE_ALTERNATIVES = "enumerate-alternatives"
SUBSTITUTE_FROM_CLASS = "substitute-from-class"
REMOVE_TOKENS = "remove-tokens"
STRATEGY_KINDS = (RANDOMIZE, ENUMERATE_ALTERNATIVES, SUBSTITUTE_FROM_CLASS, REMOVE_TOKENS)


@dataclass(frozen=True)
class CounterexampleStrategy:
    kind: str = RANDOMIZE
    c: int = 3  # copies per flagged component

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown counterexample strategy: {self.kind!r}")
        if self.c < 1:
            raise ValueError("c must be >= 1")


def label_consistency_filter(task, candidate: Instance, predicted: int) -> bool:
    """Keep only candidates whose gold label still matches the prediction.

    Tasks without an exact rule oracle cannot be checked; the filter is then
    disabled and every candidate passes.
    """
    rule = task.rule_label(candidate)
    if rule is None:
        return True
    return rule == predicted


def remove_tokens_counterexample(task, doc: Instance, predicted: int,
                                 correction: CorrectionSet) -> Optional[Example]:
    """One copy of the document with every occurrence of the flagged words
    deleted; None when the deletion would empty the document."""
    if not isinstance(doc.payload, DocumentPayload):
        raise ValueError("remove-tokens applies to document payloads only")
    present = set(int(t) for t in doc.payload.tokens)
    missing = correction.indices - present
    if missing:
        log.warning("flagged words %s are absent from document %d", sorted(missing), doc.id)
    stripped = task.without_components(doc, sorted(correction.indices))
    if len(stripped.payload.tokens) == 0:
        log.info("dropping counterexample for document %d: deletion empties it", doc.id)
        return None
    return Example(stripped, label=predicted, provenance=COUNTEREXAMPLE_PROVENANCE)


def _image_candidates(task, x: Instance, j: int, predicted: int,
                      strategy: CounterexampleStrategy,
                      labeled: Sequence[Example], rng) -> list[Instance]:
    if strategy.kind == SUBSTITUTE_FROM_CLASS:
        donors = [ex for ex in labeled
                  if ex.label is not None and ex.instance.id != x.id]
        if not donors:
            return []
        values = []
        footprint = task.component_footprint(j)
        for _ in range(strategy.c):
            donor = donors[int(rng.integers(len(donors)))]
            flat = donor.instance.payload.to_array().reshape(-1)
            values.append(int(flat[footprint[0]]))
        return [task.replace_component(x, j, v) for v in values]
    # randomize / enumerate: keep only label-consistent recolorings, then
    # take up to c of them
    valid = [cand for cand in (task.replace_component(x, j, v)
                               for v in task.component_alternatives(x, j))
             if label_consistency_filter(task, cand, predicted)]
    if strategy.kind == ENUMERATE_ALTERNATIVES:
        return valid[: strategy.c]
    take = min(strategy.c, len(valid))
    if take == 0:
        return []
    picks = rng.choice(len(valid), size=take, replace=False)
    return [valid[int(i)] for i in picks]


def to_counterexamples_with_sources(
        task, x: Instance, predicted: int, correction: CorrectionSet,
        strategy: CounterexampleStrategy, labeled: Sequence[Example],
        test_ids: frozenset[int] | set[int], seed: int
) -> list[tuple[Example, tuple[int, ...]]]:
    """(counterexample, flagged components that produced it) pairs."""
    if not correction.indices:
        return []
    if strategy.kind == REMOVE_TOKENS:
        # one copy with every flagged word deleted: per-word copies would
        # re-reinforce the words they keep, canceling the correction
        ex = remove_tokens_counterexample(task, x, predicted, correction)
        out = [] if ex is None else [(ex, tuple(sorted(correction.indices)))]
        return [(e, src) for e, src in out
                if e.instance.id not in test_ids and e.instance.id != x.id]
    if not isinstance(x.payload, ImagePayload):
        raise ValueError(f"strategy {strategy.kind!r} does not apply to this payload kind")
    rng = rng_for(seed, "counterexamples")
    if strategy.kind == SUBSTITUTE_FROM_CLASS:
        donors = [ex for ex in labeled if ex.label == predicted and ex.instance.id != x.id]
        if not donors:
            raise ValueError("substitute-from-class needs labeled examples of the predicted class")
        labeled = donors
    out: list[tuple[Example, tuple[int, ...]]] = []
    seen: set[int] = {x.id}
    for j in sorted(correction.indices):
        candidates = _image_candidates(task, x, j, predicted, strategy, labeled, rng)
        kept = 0
        for cand in candidates:
            if cand.id in test_ids or cand.id in seen:
                continue
            seen.add(cand.id)
            out.append((Example(cand, label=predicted,
                                provenance=COUNTEREXAMPLE_PROVENANCE), (j,)))
            kept += 1
        if kept == 0:
            log.info("component %d contributed no counterexamples for instance %d", j, x.id)
    return out


def to_counterexamples(task, x: Instance, predicted: int, correction: CorrectionSet,
                       strategy: CounterexampleStrategy, labeled: Sequence[Example],
                       test_ids: frozenset[int] | set[int], seed: int) -> list[Example]:
    """Up to c counterexamples per flagged component, all labeled with the
    prediction; the output is deduplicated by id and never touches test ids."""
    return [ex for ex, _ in to_counterexamples_with_sources(
        task, x, predicted, correction, strategy, labeled, test_ids, seed)]


def counterexample_log_record(parent: Instance, example: Example,
                              components: tuple[int, ...],
                              strategy: CounterexampleStrategy) -> dict:
    """JSON-lines record for the counterexample audit log."""
    return {
        "parent_id": parent.id,
        "counterexample_id": example.instance.id,
        "label": example.label,
        "flagged_components": list(components),
        "strategy": strategy.kind,
    }


def decoy_patch_randomize(task, examples: Sequence[Example], c: int, seed: int,
                          test_ids: frozenset[int] | set[int] = frozenset()
                          ) -> list[Example]:
    """Passive-setting augmentation: c copies per image with the whole
    confounder patch set to a shade drawn uniformly from the shade domain.

    Copies are raw draws (duplicates allowed; they act as sample weights) but
    never collide with the test set.
    """
    rng = rng_for(seed, "decoy-augment")
    out: list[Example] = []
    for ex in examples:
        for _ in range(c):
            shade = int(rng.choice(task.shade_domain))
            copy = task.with_patch_shade(ex.instance, shade)
            if copy.id in test_ids:
                continue
            out.append(Example(copy, label=ex.label, provenance=COUNTEREXAMPLE_PROVENANCE))
    return out
