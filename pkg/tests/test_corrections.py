import numpy as np
import pytest

from explearn.core import CorrectionSet, DocumentPayload, Example
from explearn.corrections import (CounterexampleStrategy, decoy_patch_randomize,
                                  label_consistency_filter,
                                  remove_tokens_counterexample, to_counterexamples)
from explearn.datasets import ColorsTask, DecoyTask, TextTask, generate_decoy
from explearn.datasets.colors import CORNERS, TOP_MIDDLE


def correction(indices):
    return CorrectionSet(indices=frozenset(indices), source="simulated")


def neutral_pixels(task, count):
    """Pixels outside both rule supports: recoloring them never changes the
    label, so every alternative passes the consistency filter."""
    special = set(CORNERS) | set(TOP_MIDDLE)
    out = [j for j in range(task.d) if j not in special]
    return out[:count]


class TestToCounterexamples:
    def setup_method(self):
        self.task = ColorsTask()
        self.examples = self.task.generate(30, seed=1)
        self.x = self.examples[0].instance
        self.y = self.examples[0].label

    def test_c_copies_per_flagged_component(self):
        flagged = neutral_pixels(self.task, 2)
        out = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                                 CounterexampleStrategy("randomize", c=3),
                                 labeled=self.examples[1:], test_ids=frozenset(), seed=0)
        assert len(out) == 6  # c * |C| with no collisions

    def test_empty_correction_gives_empty_list(self):
        out = to_counterexamples(self.task, self.x, self.y, correction([]),
                                 CounterexampleStrategy("randomize", c=5),
                                 labeled=[], test_ids=frozenset(), seed=0)
        assert out == []

    def test_enumerate_keeps_label_consistent_recolorings_only(self):
        # oracle: enumerate the alternative colors and re-check the label rule
        negative = next(ex for ex in self.examples if ex.label == 0)
        x = negative.instance
        corner = 4
        expected = 0
        for color in self.task.component_alternatives(x, corner):
            cand = self.task.replace_component(x, corner, color)
            if self.task.rule_label(cand) == negative.label:
                expected += 1
        out = to_counterexamples(self.task, x, negative.label, correction([corner]),
                                 CounterexampleStrategy("enumerate-alternatives", c=3),
                                 labeled=[], test_ids=frozenset(), seed=0)
        assert len(out) == expected

    def test_positive_image_corner_recoloring_passes_filter(self):
        positive = next(ex for ex in self.examples if ex.label == 1)
        x = positive.instance
        corner = 4
        for color in self.task.component_alternatives(x, corner):
            cand = self.task.replace_component(x, corner, color)
            # rule 1 still holds, so the label is unchanged
            assert label_consistency_filter(self.task, cand, 1)

    def test_counterexamples_carry_prediction_and_provenance(self):
        flagged = neutral_pixels(self.task, 1)
        out = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                                 CounterexampleStrategy("enumerate-alternatives", c=3),
                                 labeled=[], test_ids=frozenset(), seed=0)
        for ex in out:
            assert ex.label == self.y
            assert ex.provenance == "counterexample"

    def test_footprint_only_mutation(self):
        flagged = neutral_pixels(self.task, 2)
        out = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                                 CounterexampleStrategy("randomize", c=2),
                                 labeled=[], test_ids=frozenset(), seed=3)
        allowed = {self.task.component_footprint(j)[0] for j in flagged}
        base = self.x.payload.to_array().reshape(-1)
        for ex in out:
            flat = ex.instance.payload.to_array().reshape(-1)
            changed = set(np.flatnonzero(flat != base))
            assert changed and changed <= allowed

    def test_test_set_exclusion(self):
        flagged = neutral_pixels(self.task, 1)
        j = flagged[0]
        all_copies = [self.task.replace_component(self.x, j, v)
                      for v in self.task.component_alternatives(self.x, j)]
        banned = all_copies[0].id
        out = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                                 CounterexampleStrategy("enumerate-alternatives", c=3),
                                 labeled=[], test_ids=frozenset({banned}), seed=0)
        assert banned not in {ex.instance.id for ex in out}
        assert len(out) == len(all_copies) - 1

    def test_substitute_from_class(self):
        donors = [ex for ex in self.examples[1:] if ex.label == self.y]
        flagged = neutral_pixels(self.task, 1)
        out = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                                 CounterexampleStrategy("substitute-from-class", c=4),
                                 labeled=self.examples[1:], test_ids=frozenset(), seed=5)
        j = flagged[0]
        footprint = self.task.component_footprint(j)[0]
        donor_values = {int(d.instance.payload.to_array().reshape(-1)[footprint])
                        for d in donors}
        for ex in out:
            v = int(ex.instance.payload.to_array().reshape(-1)[footprint])
            assert v in donor_values

    def test_substitute_requires_class_donors(self):
        flagged = neutral_pixels(self.task, 1)
        with pytest.raises(ValueError):
            to_counterexamples(self.task, self.x, self.y, correction(flagged),
                               CounterexampleStrategy("substitute-from-class", c=2),
                               labeled=[], test_ids=frozenset(), seed=0)

    def test_image_strategy_on_document_errors(self):
        task = TextTask(vocab=["alpha", "beta", "gamma"], gold_words=frozenset({0}))
        doc = task.make_document([0, 1], label=1)
        with pytest.raises(ValueError):
            to_counterexamples(task, doc, 1, correction([0]),
                               CounterexampleStrategy("randomize", c=2),
                               labeled=[], test_ids=frozenset(), seed=0)

    def test_deterministic_given_seed(self):
        flagged = neutral_pixels(self.task, 2)
        kw = dict(labeled=self.examples[1:], test_ids=frozenset())
        a = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                               CounterexampleStrategy("randomize", c=2), seed=7, **kw)
        b = to_counterexamples(self.task, self.x, self.y, correction(flagged),
                               CounterexampleStrategy("randomize", c=2), seed=7, **kw)
        assert [e.instance.id for e in a] == [e.instance.id for e in b]


class TestRemoveTokens:
    def setup_method(self):
        self.task = TextTask(vocab=["alpha", "beta", "gamma", "delta"],
                             gold_words=frozenset({1}))

    def test_deletes_all_occurrences(self):
        doc = self.task.make_document([0, 1, 0, 2], label=1)
        ex = remove_tokens_counterexample(self.task, doc, 1, correction([0]))
        assert ex.instance.payload.tokens == (1, 2)
        assert ex.label == 1

    def test_empty_correction_returns_unchanged_copy(self):
        doc = self.task.make_document([0, 1], label=0)
        ex = remove_tokens_counterexample(self.task, doc, 0, correction([]))
        assert ex.instance.id == doc.id

    def test_emptied_document_is_discarded(self):
        doc = self.task.make_document([0, 0], label=1)
        assert remove_tokens_counterexample(self.task, doc, 1, correction([0])) is None

    def test_absent_flagged_word_logged_and_ignored(self, caplog):
        doc = self.task.make_document([0, 1], label=1)
        with caplog.at_level("WARNING"):
            ex = remove_tokens_counterexample(self.task, doc, 1, correction([3]))
        assert ex.instance.payload.tokens == (0, 1)
        assert any("absent" in r.message for r in caplog.records)

    def test_via_to_counterexamples_strategy(self):
        # a single copy with every flagged word removed
        doc = self.task.make_document([0, 1, 2], label=1)
        out = to_counterexamples(self.task, doc, 1, correction([0, 2]),
                                 CounterexampleStrategy("remove-tokens", c=9),
                                 labeled=[], test_ids=frozenset(), seed=0)
        assert len(out) == 1
        assert out[0].instance.payload.tokens == (1,)

    def test_remove_tokens_on_image_errors(self):
        task = ColorsTask()
        x = task.generate(2, seed=0)[0].instance
        with pytest.raises(ValueError):
            remove_tokens_counterexample(task, x, 1, correction([0]))


class TestLabelConsistencyFilter:
    def test_rule_free_task_disables_filter(self):
        data = generate_decoy(6, 4, seed=0)
        inst = data.train[0].instance
        assert data.task.rule_label(inst) is None
        assert label_consistency_filter(data.task, inst, 3)

    def test_recoloring_neutral_pixel_passes(self):
        task = ColorsTask()
        positive = next(ex for ex in task.generate(30, seed=2) if ex.label == 1)
        j = neutral_pixels(task, 1)[0]
        for v in task.component_alternatives(positive.instance, j):
            cand = task.replace_component(positive.instance, j, v)
            assert label_consistency_filter(task, cand, 1)


class TestDecoyAugmentation:
    def test_c_copies_per_image(self):
        data = generate_decoy(10, 5, seed=3)
        out = decoy_patch_randomize(data.task, data.train, c=3, seed=0)
        assert len(out) == 30
        for ex in out:
            assert ex.provenance == "counterexample"

    def test_labels_preserved_and_patch_only_mutation(self):
        data = generate_decoy(8, 4, seed=4)
        task = data.task
        out = decoy_patch_randomize(task, data.train, c=2, seed=1)
        by_parent = {}
        for ex in data.train:
            by_parent[ex.instance.id] = ex
        for ex in out:
            # find the parent by erasing the patch
            box = task.patch_box(ex.instance)
            assert box is not None
            assert ex.label in range(task.n_classes)

    def test_shades_uniform_over_domain(self):
        # chi-square goodness of fit at the 0.01 level, c >= 100
        from scipy import stats
        data = generate_decoy(1, 0, seed=5)
        task = data.task
        out = decoy_patch_randomize(task, data.train, c=400, seed=2)
        r0, c0 = task.patch_box(data.train[0].instance)
        shades = [int(ex.instance.payload.to_array()[r0, c0]) for ex in out]
        counts = [shades.count(s) for s in task.shade_domain]
        _, p = stats.chisquare(counts)
        assert p > 0.01

    def test_test_ids_excluded(self):
        data = generate_decoy(4, 2, seed=6)
        task = data.task
        probe = decoy_patch_randomize(task, data.train, c=4, seed=3)
        banned = frozenset([probe[0].instance.id])
        out = decoy_patch_randomize(task, data.train, c=4, seed=3, test_ids=banned)
        assert banned.isdisjoint({e.instance.id for e in out})
