"""Two-rule color images: 5x5 grids over four colors.

An image is positive iff the four corner pixels share a color (rule 0) or
the three top-middle pixels are pairwise distinct (rule 1); the generated
dataset keeps only images where both rules hold or neither does, so labels
alone cannot disambiguate the rules.

The learner sees pair-equality features ("pixel i has the same color as
pixel j", one per unordered pair); the rules are sparse hyperplanes in that
space.  Interpretable components are the 25 pixels: explanations highlight
pixels, corrections flag pixels, and counterexamples recolor them.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..core import Example, ImagePayload, Instance, RelevanceMask
from ..seeding import rng_for
from .base import Task

SIZE = 5
N_PIXELS = SIZE * SIZE
N_COLORS = 4
CORNERS = (0, 4, 20, 24)
TOP_MIDDLE = (1, 2, 3)

PAIRS: tuple[tuple[int, int], ...] = tuple(
    (i, j) for i in range(N_PIXELS) for j in range(i + 1, N_PIXELS)
)
PAIR_INDEX = {p: idx for idx, p in enumerate(PAIRS)}
N_PAIRS = len(PAIRS)  # C(25, 2) = 300
_PI = np.array([p[0] for p in PAIRS])
_PJ = np.array([p[1] for p in PAIRS])

RULE0_PAIRS = frozenset(
    PAIR_INDEX[(a, b)] for ai, a in enumerate(CORNERS) for b in CORNERS[ai + 1:]
)
RULE1_PAIRS = frozenset(
    PAIR_INDEX[(a, b)] for ai, a in enumerate(TOP_MIDDLE) for b in TOP_MIDDLE[ai + 1:]
)

# explanation budgets equal the gold pixel-mask sizes
DEFAULT_K = {0: len(CORNERS), 1: len(TOP_MIDDLE)}


def rule0_holds(flat: np.ndarray) -> np.ndarray:
    """Four corners share a color. Accepts (..., 25) int arrays."""
    c = flat[..., CORNERS]
    return (c[..., 0] == c[..., 1]) & (c[..., 0] == c[..., 2]) & (c[..., 0] == c[..., 3])


def rule1_holds(flat: np.ndarray) -> np.ndarray:
    """Three top-middle pixels pairwise distinct."""
    t = flat[..., TOP_MIDDLE]
    return (t[..., 0] != t[..., 1]) & (t[..., 0] != t[..., 2]) & (t[..., 1] != t[..., 2])


def pair_features(flat: np.ndarray) -> np.ndarray:
    """Binary pair-equality features, one per unordered pixel pair."""
    return (flat[..., _PI] == flat[..., _PJ]).astype(np.uint8)


class ColorsTask(Task):
    """rule: which rule the annotator corrects toward (0 or 1)."""

    name = "colors"
    d = N_PIXELS
    n_classes = 2
    class_names = ("negative", "positive")
    baseline = N_COLORS // 2  # palette median color

    def __init__(self, rule: int = 0, k: Optional[int] = None,
                 negative_style: str = "flat-top-middle"):
        if rule not in (0, 1):
            raise ValueError("rule must be 0 or 1")
        if negative_style not in ("flat-top-middle", "uniform"):
            raise ValueError(f"unknown negative style: {negative_style!r}")
        self.rule = rule
        self.k = DEFAULT_K[rule] if k is None else int(k)
        self.negative_style = negative_style

    # -- representation --------------------------------------------------

    def interp(self, payload: ImagePayload) -> np.ndarray:
        # every pixel is a present component; perturbation recolors it
        return np.ones(N_PIXELS, dtype=np.uint8)

    def model_features(self, inst: Instance) -> np.ndarray:
        # +1 when the pair matches, -1 when it differs: the symmetric
        # encoding keeps rule hyperplanes nearly bias-free
        return 2.0 * pair_features(self._flat(inst)) - 1.0

    def feature_dim(self) -> int:
        return N_PAIRS

    def _flat(self, inst: Instance) -> np.ndarray:
        return inst.payload.to_array().reshape(-1)

    def _from_flat(self, flat: np.ndarray) -> Instance:
        payload = ImagePayload.from_array(flat.reshape(SIZE, SIZE), N_COLORS)
        return self.make_instance(payload)

    # -- component geometry ----------------------------------------------

    def component_cells(self, j: int) -> tuple[int, ...]:
        return (j,)

    def without_components(self, inst: Instance, absent: Sequence[int]) -> Instance:
        flat = self._flat(inst).copy()
        flat[list(absent)] = self.baseline
        return self._from_flat(flat)

    def batch_model_features_without(self, inst: Instance, absent: np.ndarray,
                                     rng: Optional[np.random.Generator] = None
                                     ) -> np.ndarray:
        """An absent pixel is recolored uniformly among the other colors.

        There is no neutral color in this domain: a fixed baseline would make
        pixels already carrying it unprobeable (their pair features would not
        move), so absence is encoded as color randomization.
        """
        if rng is None:
            rng = rng_for(0, "colors-perturb")
        imgs = np.tile(self._flat(inst), (absent.shape[0], 1))
        offsets = rng.integers(1, N_COLORS, size=int(absent.sum()))
        imgs[absent] = (imgs[absent] + offsets) % N_COLORS
        return 2.0 * pair_features(imgs) - 1.0

    def component_alternatives(self, inst: Instance, j: int) -> list[int]:
        current = int(self._flat(inst)[j])
        return [c for c in range(N_COLORS) if c != current]

    def replace_component(self, inst: Instance, j: int, value: int) -> Instance:
        flat = self._flat(inst).copy()
        flat[j] = value
        return self._from_flat(flat)

    # -- gold knowledge ---------------------------------------------------

    def mask_for_rule(self, rule: int) -> RelevanceMask:
        pixels = CORNERS if rule == 0 else TOP_MIDDLE
        return RelevanceMask(relevant=frozenset(pixels), d=self.d)

    def gold_mask(self, inst: Optional[Instance] = None) -> RelevanceMask:
        return self.mask_for_rule(self.rule)

    def rule_label(self, inst: Instance) -> int:
        flat = self._flat(inst)
        return int(bool(rule0_holds(flat)) or bool(rule1_holds(flat)))

    def known_label(self, inst: Instance) -> int:
        return self.rule_label(inst)

    def explanation_k(self, inst: Instance) -> int:
        return self.k

    # -- perfect weight vectors (pair-feature space) ------------------------

    def w_star(self, rule: int) -> tuple[np.ndarray, float]:
        """Sparse hyperplane classifying the generated data perfectly.

        In the symmetric encoding rule 0 activates at pair-sum +6 (all corner
        pairs match) against at most 0 for negatives, and rule 1 at -3 (all
        top-middle pairs differ) against at least -1.
        """
        w = np.zeros(N_PAIRS)
        if rule == 0:
            w[sorted(RULE0_PAIRS)] = 1.0
            bias = -3.0
        else:
            w[sorted(RULE1_PAIRS)] = -1.0
            bias = -2.0
        return w, bias

    # -- generation --------------------------------------------------------

    def _draw_positive(self, rng: np.random.Generator) -> np.ndarray:
        # uniform over the both-rules set: the corner and top-middle pixel
        # groups are disjoint, so constructing them directly equals rejection
        flat = rng.integers(0, N_COLORS, size=N_PIXELS)
        flat[list(CORNERS)] = rng.integers(0, N_COLORS)
        flat[list(TOP_MIDDLE)] = rng.permutation(N_COLORS)[:3]
        return flat

    def _draw_negative(self, rng: np.random.Generator) -> np.ndarray:
        """Neither rule holds.

        flat-top-middle: corners rejection-sampled away from rule 0 and the
        three top-middle pixels all equal (the unambiguous complement of
        rule 1), which makes rule 1 the learner's natural attractor.
        uniform: plain rejection on both pixel groups; rule 0's wide margin
        then dominates and rule 1 is the hard direction.
        """
        flat = rng.integers(0, N_COLORS, size=N_PIXELS)
        while bool(rule0_holds(flat)):
            flat[list(CORNERS)] = rng.integers(0, N_COLORS, size=4)
        if self.negative_style == "flat-top-middle":
            flat[list(TOP_MIDDLE)] = int(rng.integers(0, N_COLORS))
        else:
            while bool(rule1_holds(flat)):
                flat[list(TOP_MIDDLE)] = rng.integers(0, N_COLORS, size=3)
        return flat

    def generate(self, n: int, seed: int, balance: float = 0.5,
                 max_draws: Optional[int] = None) -> list[Example]:
        """n distinct images where both rules hold or neither does."""
        if n <= 0:
            raise ValueError("n must be positive")
        if not 0.4 <= balance <= 0.6:
            raise ValueError("label balance must stay within 40-60%")
        rng = rng_for(seed, "colors-generate")
        need = {1: int(round(n * balance))}
        need[0] = n - need[1]
        if max_draws is None:
            max_draws = 50 * n + 10_000
        got: dict[int, list[np.ndarray]] = {0: [], 1: []}
        seen: set[bytes] = set()
        drawn = 0
        while (len(got[0]) < need[0] or len(got[1]) < need[1]) and drawn < max_draws:
            drawn += 1
            label = 1 if len(got[1]) < need[1] else 0
            if label == 1:
                flat = self._draw_positive(rng)
            else:
                flat = self._draw_negative(rng)
            key = flat.astype(np.uint8).tobytes()
            if key in seen:
                continue
            seen.add(key)
            got[label].append(flat)
        if len(got[0]) < need[0] or len(got[1]) < need[1]:
            raise RuntimeError(
                f"sampling exhausted {max_draws} draws "
                f"({len(got[1])}/{need[1]} positive, {len(got[0])}/{need[0]} negative)"
            )
        examples = [Example(self._from_flat(f), label=y)
                    for y, flats in got.items() for f in flats]
        order = rng.permutation(len(examples))
        return [examples[i] for i in order]


def generate_colors(n: int, seed: int) -> tuple[
    list[Example], tuple[np.ndarray, float], tuple[np.ndarray, float],
    dict[int, RelevanceMask]
]:
    """Examples plus the perfect hyperplanes and per-rule gold pixel masks."""
    task = ColorsTask()
    examples = task.generate(n, seed)
    masks = {0: task.mask_for_rule(0), 1: task.mask_for_rule(1)}
    return examples, task.w_star(0), task.w_star(1), masks
