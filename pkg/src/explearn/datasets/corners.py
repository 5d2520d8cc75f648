"""3x3 black-and-white toy images: positive iff both top corners are white."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..core import Example, ImagePayload, Instance, RelevanceMask
from ..seeding import rng_for
from .base import Task

SIZE = 3
N_PIXELS = SIZE * SIZE
TOP_CORNERS = (0, 2)


class ToyCornersTask(Task):
    name = "toy-corners"
    d = N_PIXELS
    n_classes = 2
    baseline = 0  # black

    def interp(self, payload: ImagePayload) -> np.ndarray:
        return (payload.to_array().reshape(-1) == 1).astype(np.uint8)

    def model_features(self, inst: Instance) -> np.ndarray:
        return inst.interp.astype(np.float64)

    def feature_dim(self) -> int:
        return N_PIXELS

    def _from_flat(self, flat: np.ndarray) -> Instance:
        return self.make_instance(ImagePayload.from_array(flat.reshape(SIZE, SIZE), 2))

    def component_cells(self, j: int) -> tuple[int, ...]:
        return (j,)

    def without_components(self, inst: Instance, absent: Sequence[int]) -> Instance:
        flat = inst.payload.to_array().reshape(-1).copy()
        flat[list(absent)] = self.baseline
        return self._from_flat(flat)

    def batch_model_features_without(self, inst: Instance, absent: np.ndarray,
                                     rng=None) -> np.ndarray:
        feats = np.tile(inst.interp.astype(np.float64), (absent.shape[0], 1))
        feats[absent] = 0.0
        return feats

    def component_alternatives(self, inst: Instance, j: int) -> list[int]:
        current = int(inst.payload.to_array().reshape(-1)[j])
        return [1 - current]

    def replace_component(self, inst: Instance, j: int, value: int) -> Instance:
        flat = inst.payload.to_array().reshape(-1).copy()
        flat[j] = value
        return self._from_flat(flat)

    def gold_mask(self, inst: Optional[Instance] = None) -> RelevanceMask:
        return RelevanceMask(relevant=frozenset(TOP_CORNERS), d=self.d)

    def rule_label(self, inst: Instance) -> int:
        flat = inst.payload.to_array().reshape(-1)
        return int(all(flat[c] == 1 for c in TOP_CORNERS))

    def known_label(self, inst: Instance) -> int:
        return self.rule_label(inst)

    def explanation_k(self, inst: Instance) -> int:
        return len(TOP_CORNERS)

    def generate(self, n: int, seed: int, balance: float = 0.5) -> list[Example]:
        if n <= 0:
            raise ValueError("n must be positive")
        rng = rng_for(seed, "corners-generate")
        need = {1: int(round(n * balance))}
        need[0] = n - need[1]
        # only 512 distinct images exist, 128 of them positive
        if need[1] > 128 or need[0] > 384:
            raise ValueError("n too large for distinct 3x3 images at this balance")
        got: dict[int, list[np.ndarray]] = {0: [], 1: []}
        seen: set[tuple[int, ...]] = set()
        for _ in range(2000 * n):
            flat = rng.integers(0, 2, size=N_PIXELS)
            key = tuple(int(v) for v in flat)
            if key in seen:
                continue
            y = int(flat[0] == 1 and flat[2] == 1)
            if len(got[y]) < need[y]:
                seen.add(key)
                got[y].append(flat)
            if len(got[0]) == need[0] and len(got[1]) == need[1]:
                break
        else:
            raise RuntimeError("rejection sampling failed to balance labels")
        examples = [Example(self._from_flat(f), label=y)
                    for y, flats in got.items() for f in flats]
        order = rng.permutation(len(examples))
        return [examples[i] for i in order]


def generate_toy_corners(n: int, seed: int) -> tuple[list[Example], RelevanceMask]:
    task = ToyCornersTask()
    return task.generate(n, seed), task.gold_mask()
