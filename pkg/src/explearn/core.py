"""Shared domain types: instances, examples, pools, explanations, corrections.

All types are immutable value objects; instances are identified by a stable
64-bit hash of their canonical payload serialization, so duplicates (e.g.
repeated counterexamples) are detectable by id.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

SEED_PROVENANCE = "seed"
QUERY_PROVENANCE = "query-label"
COUNTEREXAMPLE_PROVENANCE = "counterexample"
_PROVENANCES = (SEED_PROVENANCE, QUERY_PROVENANCE, COUNTEREXAMPLE_PROVENANCE)


@dataclass(frozen=True)
class ImagePayload:
    """Row-major grid of palette indices."""

    width: int
    height: int
    palette_size: int
    grid: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.grid) != self.height or any(len(r) != self.width for r in self.grid):
            raise ValueError("grid shape does not match width/height")
        if any(not (0 <= v < self.palette_size) for r in self.grid for v in r):
            raise ValueError("palette index out of range")

    def to_array(self) -> np.ndarray:
        return np.asarray(self.grid, dtype=np.int64)

    @staticmethod
    def from_array(arr: np.ndarray, palette_size: int) -> "ImagePayload":
        arr = np.asarray(arr, dtype=np.int64)
        h, w = arr.shape
        grid = tuple(tuple(int(v) for v in row) for row in arr)
        return ImagePayload(width=w, height=h, palette_size=palette_size, grid=grid)


@dataclass(frozen=True)
class DocumentPayload:
    """Ordered token-id list over a fixed vocabulary."""

    tokens: tuple[int, ...]
    vocab_size: int

    def __post_init__(self) -> None:
        if any(not (0 <= t < self.vocab_size) for t in self.tokens):
            raise ValueError("token id out of range")


Payload = Union[ImagePayload, DocumentPayload]


def canonical_payload_dict(payload: Payload) -> dict:
    if isinstance(payload, ImagePayload):
        return {
            "kind": "image",
            "width": payload.width,
            "height": payload.height,
            "palette_size": payload.palette_size,
            "grid": [list(row) for row in payload.grid],
        }
    if isinstance(payload, DocumentPayload):
        return {
            "kind": "document",
            "tokens": list(payload.tokens),
            "vocab_size": payload.vocab_size,
        }
    raise TypeError(f"unknown payload type: {type(payload)!r}")


def payload_from_dict(d: Mapping) -> Payload:
    kind = d.get("kind")
    if kind == "image":
        return ImagePayload(
            width=int(d["width"]),
            height=int(d["height"]),
            palette_size=int(d["palette_size"]),
            grid=tuple(tuple(int(v) for v in row) for row in d["grid"]),
        )
    if kind == "document":
        return DocumentPayload(
            tokens=tuple(int(t) for t in d["tokens"]),
            vocab_size=int(d["vocab_size"]),
        )
    raise ValueError(f"unknown payload kind: {kind!r}")


def instance_id(payload: Payload) -> int:
    """Stable 64-bit id: blake2b over the canonical payload serialization."""
    blob = json.dumps(canonical_payload_dict(payload), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "big")


@dataclass(frozen=True, eq=False)
class Instance:
    """Raw input plus its binary interpretable representation.

    ``interp`` is a deterministic function of the payload (the owning task
    computes it); the array is frozen read-only after construction.
    """

    id: int
    payload: Payload
    interp: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.interp, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("interp must be a nonempty vector")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("interp entries must be 0/1")
        arr.flags.writeable = False
        object.__setattr__(self, "interp", arr)

    @property
    def d(self) -> int:
        return int(self.interp.size)

    def present_components(self) -> np.ndarray:
        return np.flatnonzero(self.interp)

    def __eq__(self, other) -> bool:
        return isinstance(other, Instance) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)


def make_instance(payload: Payload, interp: np.ndarray) -> Instance:
    return Instance(id=instance_id(payload), payload=payload, interp=interp)


@dataclass(frozen=True)
class Example:
    instance: Instance
    label: int
    provenance: str = SEED_PROVENANCE

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ValueError("label must be a nonnegative class id")
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance: {self.provenance!r}")


class Pool:
    """Labeled examples and unlabeled instances with disjoint, unique ids."""

    def __init__(self, labeled: Iterable[Example] = (), unlabeled: Iterable[Instance] = ()):
        self._labeled: dict[int, Example] = {}
        self._unlabeled: dict[int, Instance] = {}
        for ex in labeled:
            if ex.instance.id in self._labeled:
                raise ValueError(f"duplicate labeled id {ex.instance.id}")
            self._labeled[ex.instance.id] = ex
        for inst in unlabeled:
            if inst.id in self._unlabeled:
                raise ValueError(f"duplicate unlabeled id {inst.id}")
            if inst.id in self._labeled:
                raise ValueError(f"id {inst.id} appears in both labeled and unlabeled sets")
            self._unlabeled[inst.id] = inst

    @property
    def labeled(self) -> tuple[Example, ...]:
        return tuple(self._labeled.values())

    @property
    def unlabeled(self) -> tuple[Instance, ...]:
        return tuple(self._unlabeled.values())

    def labeled_ids(self) -> frozenset[int]:
        return frozenset(self._labeled)

    def unlabeled_ids(self) -> frozenset[int]:
        return frozenset(self._unlabeled)

    def with_update(self, add_labeled: Sequence[Example] = (),
                    remove_unlabeled_ids: Iterable[int] = ()) -> "Pool":
        """New pool with examples appended and ids dropped from the unlabeled side.

        An added example whose id is already labeled is skipped (first label
        wins), so repeated counterexamples never grow the set.
        """
        labeled = dict(self._labeled)
        removed = set(remove_unlabeled_ids)
        for ex in add_labeled:
            if ex.instance.id not in labeled:
                labeled[ex.instance.id] = ex
            removed.add(ex.instance.id)
        unlabeled = {i: x for i, x in self._unlabeled.items() if i not in removed}
        out = Pool.__new__(Pool)
        out._labeled = labeled
        out._unlabeled = unlabeled
        return out

    def __repr__(self) -> str:
        return f"Pool(labeled={len(self._labeled)}, unlabeled={len(self._unlabeled)})"


@dataclass(frozen=True)
class Explanation:
    """The selected interpretable components with signed weights.

    ``components`` holds at most ``k`` (index, weight) pairs with distinct
    indices and strictly nonzero weights; this is the sparsity budget of the
    local surrogate.
    """

    components: tuple[tuple[int, float], ...]
    intercept: float
    k: int
    target_label: int
    degenerate_support: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.components) > self.k:
            raise ValueError("more components than the sparsity budget k")
        idxs = [j for j, _ in self.components]
        if len(set(idxs)) != len(idxs):
            raise ValueError("component indices must be distinct")
        if any(w == 0.0 for _, w in self.components):
            raise ValueError("component weights must be nonzero")

    def component_indices(self) -> frozenset[int]:
        return frozenset(j for j, _ in self.components)


@dataclass(frozen=True)
class CorrectionSet:
    """Component indices the annotator marks as wrongly relevant."""

    indices: frozenset[int]
    source: str = "simulated"

    def __post_init__(self) -> None:
        if self.source not in ("simulated", "human"):
            raise ValueError(f"unknown correction source: {self.source!r}")

    @classmethod
    def for_explanation(cls, expl: Explanation, indices: Iterable[int],
                        source: str = "human") -> "CorrectionSet":
        idxs = frozenset(int(j) for j in indices)
        if not idxs <= expl.component_indices():
            raise ValueError("corrections must flag components of the explanation")
        return cls(indices=idxs, source=source)


@dataclass(frozen=True)
class RelevanceMask:
    """Gold-standard relevant component indices for one task rule."""

    relevant: frozenset[int]
    d: int

    def __post_init__(self) -> None:
        if not self.relevant:
            raise ValueError("relevance mask must be nonempty")
        if any(not (0 <= j < self.d) for j in self.relevant):
            raise ValueError("relevant index out of range")


def explanation_f1(explained: Iterable[int], gold: Union[RelevanceMask, Iterable[int]]) -> float:
    """Harmonic mean of precision and recall of the explained component set.

    An empty explained set scores 0 by convention (burn-in iterations may
    produce empty explanations).
    """
    explained = frozenset(explained)
    relevant = gold.relevant if isinstance(gold, RelevanceMask) else frozenset(gold)
    if not relevant:
        raise ValueError("gold set must be nonempty")
    if not explained:
        return 0.0
    hits = len(explained & relevant)
    if hits == 0:
        return 0.0
    precision = hits / len(explained)
    recall = hits / len(relevant)
    return 2.0 * precision * recall / (precision + recall)


def correction_from_gold(expl: Explanation, gold: Union[RelevanceMask, Iterable[int]]) -> CorrectionSet:
    """Components the explanation lists that the gold mask deems irrelevant."""
    relevant = gold.relevant if isinstance(gold, RelevanceMask) else frozenset(gold)
    flagged = frozenset(j for j in expl.component_indices() if j not in relevant)
    return CorrectionSet(indices=flagged, source="simulated")


# -- canonical JSON (instances, examples, explanations) ----------------------

def instance_to_dict(inst: Instance) -> dict:
    return {
        "id": inst.id,
        "payload": canonical_payload_dict(inst.payload),
        "interp": [int(v) for v in inst.interp],
    }


def instance_from_dict(d: Mapping) -> Instance:
    payload = payload_from_dict(d["payload"])
    inst = Instance(id=int(d["id"]), payload=payload,
                    interp=np.asarray(d["interp"], dtype=np.uint8))
    if inst.id != instance_id(payload):
        raise ValueError("instance id does not match payload hash")
    return inst


def example_to_dict(ex: Example) -> dict:
    return {
        "instance": instance_to_dict(ex.instance),
        "label": ex.label,
        "provenance": ex.provenance,
    }


def example_from_dict(d: Mapping) -> Example:
    return Example(instance=instance_from_dict(d["instance"]),
                   label=int(d["label"]), provenance=str(d["provenance"]))


def explanation_to_dict(expl: Explanation) -> dict:
    return {
        "components": [[int(j), float(w)] for j, w in expl.components],
        "intercept": float(expl.intercept),
        "k": expl.k,
        "target_label": expl.target_label,
        "degenerate_support": expl.degenerate_support,
    }


def explanation_from_dict(d: Mapping) -> Explanation:
    return Explanation(
        components=tuple((int(j), float(w)) for j, w in d["components"]),
        intercept=float(d["intercept"]),
        k=int(d["k"]),
        target_label=int(d["target_label"]),
        degenerate_support=bool(d.get("degenerate_support", False)),
    )
