"""Confounded image classification: every image carries a square patch in a
randomly chosen corner whose shade is a deterministic function of the label
on the training split and uniform over the same shade domain at test time.

The built-in base is a 16x16 four-class geometric-shapes generator; external
28x28 grayscale IDX files can be substituted for full-scale runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import Example, ImagePayload, Instance, RelevanceMask
from ..seeding import rng_for
from .base import Task

SHAPE_LEVELS = 6  # shades 0..5 belong to background/noise/shapes


class DecoyTask(Task):
    name = "decoy"

    def __init__(self, size: int = 16, n_classes: int = 4, patch: int = 4,
                 k: int = 5):
        if patch > size:
            raise ValueError("confounder patch larger than the image")
        if n_classes < 2:
            raise ValueError("need at least two classes")
        self.size = size
        self.n_classes = n_classes
        self.patch = patch
        self.k = k
        self.d = size * size
        self.palette_size = SHAPE_LEVELS + n_classes
        self.shade_domain = tuple(range(SHAPE_LEVELS, SHAPE_LEVELS + n_classes))
        self.baseline = 0
        # per generated instance: gold label and patch corner (None = clean)
        self._labels: dict[int, int] = {}
        self._patch_at: dict[int, Optional[tuple[int, int]]] = {}

    def shade_map(self, label: int) -> int:
        return SHAPE_LEVELS + label

    # -- representation ----------------------------------------------------

    def interp(self, payload: ImagePayload) -> np.ndarray:
        return (payload.to_array().reshape(-1) != 0).astype(np.uint8)

    def model_features(self, inst: Instance) -> np.ndarray:
        return inst.payload.to_array().reshape(-1) / (self.palette_size - 1)

    def feature_dim(self) -> int:
        return self.d

    # -- component geometry -------------------------------------------------

    def component_cells(self, j: int) -> tuple[int, ...]:
        return (j,)

    def without_components(self, inst: Instance, absent: Sequence[int]) -> Instance:
        flat = inst.payload.to_array().reshape(-1).copy()
        flat[list(absent)] = self.baseline
        return self.make_instance(ImagePayload.from_array(
            flat.reshape(self.size, self.size), self.palette_size))

    def batch_model_features_without(self, inst: Instance, absent: np.ndarray,
                                     rng=None) -> np.ndarray:
        feats = np.tile(self.model_features(inst), (absent.shape[0], 1))
        feats[absent] = 0.0
        return feats

    def component_alternatives(self, inst: Instance, j: int) -> list[int]:
        flat = inst.payload.to_array().reshape(-1)
        current = int(flat[j])
        box = self.patch_box(inst)
        if box is not None and j in self._box_cells(box):
            return [s for s in self.shade_domain if s != current]
        return [v for v in range(SHAPE_LEVELS) if v != current]

    def replace_component(self, inst: Instance, j: int, value: int) -> Instance:
        flat = inst.payload.to_array().reshape(-1).copy()
        flat[j] = value
        out = self.make_instance(ImagePayload.from_array(
            flat.reshape(self.size, self.size), self.palette_size))
        self._register(out, self._labels.get(inst.id), self._patch_at.get(inst.id))
        return out

    def _box_cells(self, box: tuple[int, int]) -> frozenset[int]:
        r0, c0 = box
        return frozenset((r0 + r) * self.size + (c0 + c)
                         for r in range(self.patch) for c in range(self.patch))

    def patch_box(self, inst: Instance) -> Optional[tuple[int, int]]:
        return self._patch_at.get(inst.id)

    def with_patch_shade(self, inst: Instance, shade: int) -> Instance:
        """Copy of a confounded image with its whole patch set to ``shade``."""
        box = self.patch_box(inst)
        if box is None:
            raise ValueError("instance has no confounder patch")
        flat = inst.payload.to_array().reshape(-1).copy()
        flat[sorted(self._box_cells(box))] = shade
        out = self.make_instance(ImagePayload.from_array(
            flat.reshape(self.size, self.size), self.palette_size))
        self._register(out, self._labels.get(inst.id), box)
        return out

    # -- gold knowledge -------------------------------------------------------

    def gold_mask(self, inst: Optional[Instance] = None) -> RelevanceMask:
        if inst is None:
            raise ValueError("decoy relevance masks are per instance")
        box = self.patch_box(inst)
        cells = self._box_cells(box) if box is not None else frozenset()
        relevant = frozenset(range(self.d)) - cells
        return RelevanceMask(relevant=relevant, d=self.d)

    def known_label(self, inst: Instance) -> int:
        return self._labels[inst.id]

    def explanation_k(self, inst: Instance) -> int:
        return self.k

    def _register(self, inst: Instance, label: Optional[int],
                  box: Optional[tuple[int, int]]) -> None:
        if label is not None:
            self._labels[inst.id] = label
        self._patch_at[inst.id] = box

    # -- generation ------------------------------------------------------------

    def _render_shape(self, label: int, rng: np.random.Generator) -> np.ndarray:
        """Thin strokes at random positions under heavy speckle noise: the
        geometry is learnable but much harder than the constant-shade patch,
        which is what lets the confounder dominate training."""
        img = np.zeros((self.size, self.size), dtype=np.int64)
        shade = int(rng.integers(3, SHAPE_LEVELS))
        if label % 4 == 0:  # hollow rectangle
            h, w = rng.integers(5, 10, size=2)
            r0 = int(rng.integers(0, self.size - h))
            c0 = int(rng.integers(0, self.size - w))
            r1, c1 = r0 + h, c0 + w
            img[r0, c0:c1 + 1] = shade
            img[r1, c0:c1 + 1] = shade
            img[r0:r1 + 1, c0] = shade
            img[r0:r1 + 1, c1] = shade
        elif label % 4 == 1:  # diamond outline
            rad = int(rng.integers(2, 5))
            cr = int(rng.integers(rad, self.size - rad))
            cc = int(rng.integers(rad, self.size - rad))
            rr, cc_grid = np.mgrid[0:self.size, 0:self.size]
            img[np.abs(rr - cr) + np.abs(cc_grid - cc) == rad] = shade
        elif label % 4 == 2:  # three horizontal bars
            w = int(rng.integers(6, 11))
            r0 = int(rng.integers(0, self.size - 7))
            c0 = int(rng.integers(0, self.size - w))
            for k in range(3):
                img[r0 + 3 * k, c0:c0 + w] = shade
        else:  # X cross
            arm = int(rng.integers(3, 6))
            cr = int(rng.integers(arm, self.size - arm))
            cc = int(rng.integers(arm, self.size - arm))
            for t in range(-arm, arm + 1):
                img[cr + t, cc + t] = shade
                img[cr + t, cc - t] = shade
        noise = rng.random((self.size, self.size)) < 0.14
        img[noise] = rng.integers(1, SHAPE_LEVELS, size=int(noise.sum()))
        return img

    def _corner_box(self, which: int) -> tuple[int, int]:
        off = self.size - self.patch
        return [(0, 0), (0, off), (off, 0), (off, off)][which]

    def _apply_patch(self, base: np.ndarray, box: tuple[int, int], shade: int) -> np.ndarray:
        img = base.copy()
        r0, c0 = box
        img[r0:r0 + self.patch, c0:c0 + self.patch] = shade
        return img

    def _example_from(self, img: np.ndarray, label: int,
                      box: Optional[tuple[int, int]], provenance: str = "seed") -> Example:
        inst = self.make_instance(ImagePayload.from_array(img, self.palette_size))
        self._register(inst, label, box)
        return Example(inst, label=label, provenance=provenance)

    def generate(self, n_train: int, n_test: int, seed: int,
                 base_images: Optional[np.ndarray] = None,
                 base_labels: Optional[np.ndarray] = None,
                 ) -> tuple[list[Example], list[Example], list[Example]]:
        """(train, confounded_test, clean_test); patches per the class contract.

        With ``base_images`` (values already in 0..SHAPE_LEVELS-1) the built-in
        shape renderer is bypassed.
        """
        rng = rng_for(seed, "decoy-generate")
        if base_images is not None:
            if base_labels is None or len(base_images) != len(base_labels):
                raise ValueError("base_images requires matching base_labels")
            if base_images.shape[1] != self.size:
                raise ValueError("base image size does not match the task size")
            total = n_train + n_test
            if total > len(base_images):
                raise ValueError("not enough base images")
            order = rng.permutation(len(base_images))[:total]
            bases = [np.asarray(base_images[i], dtype=np.int64) for i in order]
            labels = [int(base_labels[i]) for i in order]
        else:
            labels = [int(c) for c in rng.integers(0, self.n_classes, size=n_train + n_test)]
            bases = [self._render_shape(y, rng) for y in labels]

        train: list[Example] = []
        conf_test: list[Example] = []
        clean_test: list[Example] = []
        seen: set[int] = set()
        for i, (base, y) in enumerate(zip(bases, labels)):
            box = self._corner_box(int(rng.integers(0, 4)))
            if i < n_train:
                shade = self.shade_map(y)
                ex = self._example_from(self._apply_patch(base, box, shade), y, box)
                if ex.instance.id not in seen:
                    seen.add(ex.instance.id)
                    train.append(ex)
            else:
                shade = int(rng.choice(self.shade_domain))
                ex = self._example_from(self._apply_patch(base, box, shade), y, box)
                clean = self._example_from(base, y, None)
                if ex.instance.id not in seen and clean.instance.id not in seen:
                    seen.update((ex.instance.id, clean.instance.id))
                    conf_test.append(ex)
                    clean_test.append(clean)
        return train, conf_test, clean_test


@dataclass
class DecoyData:
    task: DecoyTask
    train: list[Example]
    confounded_test: list[Example]
    clean_test: list[Example]


def generate_decoy(n_train: int, n_test: int, seed: int, *, size: int = 16,
                   n_classes: int = 4, patch: int = 4,
                   base_images: Optional[np.ndarray] = None,
                   base_labels: Optional[np.ndarray] = None) -> DecoyData:
    task = DecoyTask(size=size, n_classes=n_classes, patch=patch)
    train, conf, clean = task.generate(n_train, n_test, seed,
                                       base_images=base_images, base_labels=base_labels)
    return DecoyData(task=task, train=train, confounded_test=conf, clean_test=clean)


# -- IDX files (optional full-scale base images) -------------------------------

def read_idx(path: str) -> np.ndarray:
    """Parse an IDX file of unsigned bytes (images or labels)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if len(magic) != 4 or magic[0] != 0 or magic[1] != 0 or magic[2] != 0x08:
            raise ValueError(f"not an unsigned-byte IDX file: {path}")
        ndim = magic[3]
        dims = [struct.unpack(">I", fh.read(4))[0] for _ in range(ndim)]
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != int(np.prod(dims)):
        raise ValueError(f"IDX payload size mismatch in {path}")
    return data.reshape(dims)


def quantize_grayscale(images: np.ndarray) -> np.ndarray:
    """Bin 0..255 grayscale into the shape shade levels 0..SHAPE_LEVELS-1."""
    return (images.astype(np.int64) * SHAPE_LEVELS) // 256
