"""Two-class document classification over a bag-of-words representation.

The gold standard for explanations is the top fifth of the vocabulary ranked
by class-conditional mutual information of word presence; each document's
sparsity budget equals the number of gold words it contains.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..core import DocumentPayload, Example, Instance, RelevanceMask
from ..seeding import rng_for
from .base import Task

_TOKEN_RE = re.compile(r"[a-z]+")

STOP_WORDS = frozenset("""
a an and are as at be but by for from has have if in into is it its of on or
that the their this to was were will with not no they he she you i we
""".split())


def tokenize(text: str) -> list[str]:
    """Lowercased alphabetic tokens, stop words removed, no stemming."""
    return [t for t in _TOKEN_RE.findall(text.lower())
            if len(t) > 1 and t not in STOP_WORDS]


def presence_mutual_information(presence: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """I(word presence; class) in nats for each column of ``presence``."""
    n = presence.shape[0]
    classes = np.unique(labels)
    mi = np.zeros(presence.shape[1])
    p_w = presence.mean(axis=0)
    for c in classes:
        in_c = labels == c
        p_c = in_c.mean()
        for w_val, p_w_val in ((1, p_w), (0, 1.0 - p_w)):
            col = presence[in_c] == w_val
            p_joint = col.sum(axis=0) / n
            denom = p_w_val * p_c
            with np.errstate(divide="ignore", invalid="ignore"):
                term = p_joint * np.log(p_joint / denom)
            mi += np.where(p_joint > 0, np.nan_to_num(term), 0.0)
    return mi


class TextTask(Task):
    name = "text"
    n_classes = 2
    baseline = None  # flipped words are dropped, not substituted

    def __init__(self, vocab: Sequence[str], gold_words: frozenset[int],
                 class_names: Sequence[str] = ("0", "1")):
        if not vocab:
            raise ValueError("empty vocabulary")
        self.vocab = tuple(vocab)
        self.d = len(self.vocab)
        self.gold_words = frozenset(gold_words)
        self.class_names = tuple(class_names)
        self._labels: dict[int, int] = {}

    # -- representation ------------------------------------------------------

    def interp(self, payload: DocumentPayload) -> np.ndarray:
        v = np.zeros(self.d, dtype=np.uint8)
        v[list(set(payload.tokens))] = 1
        return v

    def model_features(self, inst: Instance) -> np.ndarray:
        return inst.interp.astype(np.float64)

    def feature_dim(self) -> int:
        return self.d

    def make_document(self, tokens: Sequence[int], label: Optional[int] = None) -> Instance:
        inst = self.make_instance(DocumentPayload(tokens=tuple(tokens), vocab_size=self.d))
        if label is not None:
            self._labels[inst.id] = label
        return inst

    # -- component geometry ----------------------------------------------------

    def without_components(self, inst: Instance, absent: Sequence[int]) -> Instance:
        drop = set(absent)
        tokens = tuple(t for t in inst.payload.tokens if t not in drop)
        out = self.make_instance(DocumentPayload(tokens=tokens, vocab_size=self.d))
        if inst.id in self._labels:
            self._labels.setdefault(out.id, self._labels[inst.id])
        return out

    def batch_model_features_without(self, inst: Instance, absent: np.ndarray,
                                     rng=None) -> np.ndarray:
        feats = np.tile(inst.interp.astype(np.float64), (absent.shape[0], 1))
        feats[absent] = 0.0
        return feats

    def component_alternatives(self, inst: Instance, j: int) -> list:
        raise ValueError("documents have no finite component value domain; "
                         "use the remove-tokens strategy")

    def replace_component(self, inst: Instance, j: int, value) -> Instance:
        raise ValueError("documents support token removal only")

    def component_cells(self, j: int) -> tuple[int, ...]:
        raise ValueError("document components are vocabulary words, not cells")

    # -- gold knowledge -----------------------------------------------------------

    def gold_mask(self, inst: Optional[Instance] = None) -> RelevanceMask:
        """Gold words restricted to the document; explanations can only list
        present components, so recall is measured against what is present."""
        if inst is None:
            return RelevanceMask(relevant=self.gold_words, d=self.d)
        present = self.gold_words & set(int(t) for t in inst.payload.tokens)
        if not present:
            raise ValueError("document contains no gold-relevant words")
        return RelevanceMask(relevant=frozenset(present), d=self.d)

    def has_gold_words(self, inst: Instance) -> bool:
        return bool(self.gold_words & set(int(t) for t in inst.payload.tokens))

    def known_label(self, inst: Instance) -> int:
        return self._labels[inst.id]

    def explanation_k(self, inst: Instance) -> int:
        k = len(self.gold_words & set(int(t) for t in inst.payload.tokens))
        return max(1, k)


@dataclass
class TextData:
    task: TextTask
    examples: list[Example]


def build_text_task(docs_tokens: list[list[str]], labels: list[int],
                    class_names: Sequence[str]) -> TextData:
    """Assemble a task from tokenized documents: vocabulary, gold set, examples."""
    vocab = sorted({t for doc in docs_tokens for t in doc})
    if not vocab:
        raise ValueError("empty vocabulary")
    index = {w: i for i, w in enumerate(vocab)}
    presence = np.zeros((len(docs_tokens), len(vocab)), dtype=np.uint8)
    for r, doc in enumerate(docs_tokens):
        presence[r, [index[t] for t in set(doc)]] = 1
    labels_arr = np.asarray(labels)
    mi = presence_mutual_information(presence, labels_arr)
    n_gold = math.ceil(len(vocab) / 5)
    ranked = sorted(range(len(vocab)), key=lambda j: (-mi[j], vocab[j]))
    gold = frozenset(ranked[:n_gold])
    task = TextTask(vocab=vocab, gold_words=gold, class_names=class_names)
    examples = []
    seen: set[int] = set()
    for doc, y in zip(docs_tokens, labels):
        inst = task.make_document([index[t] for t in doc], label=int(y))
        if inst.id in seen:
            continue  # identical documents would collide in the pool
        seen.add(inst.id)
        examples.append(Example(inst, label=int(y)))
    return TextData(task=task, examples=examples)


def load_text(corpus_path: str | Path, seed: int = 0) -> TextData:
    """Corpus layout: one subdirectory per class, one UTF-8 file per document."""
    root = Path(corpus_path)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise ValueError(f"need at least two class directories under {root}")
    docs: list[list[str]] = []
    labels: list[int] = []
    for y, cdir in enumerate(class_dirs):
        files = sorted(cdir.iterdir())
        class_docs = []
        for f in files:
            toks = tokenize(f.read_text(encoding="utf-8"))
            if toks:
                class_docs.append(toks)
        if not class_docs:
            raise ValueError(f"class directory {cdir} has no nonempty documents")
        docs.extend(class_docs)
        labels.extend([y] * len(class_docs))
    return build_text_task(docs, labels, class_names=tuple(d.name for d in class_dirs))


# -- bundled synthetic corpus ---------------------------------------------------

# 75 words per topic with geometrically decaying class-presence: the strong
# head lands in the gold fifth of the vocabulary, the correlated tail stays
# below the cutoff and keeps tempting the learner ("falsely relevant")
N_TOPIC = 75
TOPIC_WORDS = {
    0: [f"space{i:02d}" for i in range(N_TOPIC)],
    1: [f"farm{i:02d}" for i in range(N_TOPIC)],
}
COMMON_WORDS = [f"common{i:02d}" for i in range(50)]


def _topic_presence(rank: int) -> float:
    return 0.05 + 0.5 * float(np.exp(-rank / 80.0))


def synthetic_corpus(n_docs: int = 400, seed: int = 0) -> tuple[list[list[str]], list[int]]:
    """Two-topic corpus with a long tail of weakly class-indicative words.

    Every document keeps at least one high-rank own-topic word so
    per-document gold sets are nonempty.
    """
    rng = rng_for(seed, "text-synthetic")
    docs: list[list[str]] = []
    labels: list[int] = []
    for i in range(n_docs):
        y = i % 2
        words: list[str] = []
        for r, w in enumerate(TOPIC_WORDS[y]):
            if rng.random() < _topic_presence(r):
                words.append(w)
        for w in TOPIC_WORDS[1 - y]:
            if rng.random() < 0.05:
                words.append(w)
        head = TOPIC_WORDS[y][:5]
        if not any(w in head for w in words):
            words.append(head[int(rng.integers(len(head)))])
        for w in COMMON_WORDS:
            if rng.random() < 0.30:
                words.append(w)
        tokens = [w for w in words for _ in range(int(rng.integers(1, 4)))]
        rng.shuffle(tokens)
        docs.append(tokens)
        labels.append(y)
    return docs, labels


def synthetic_text_task(n_docs: int = 400, seed: int = 0) -> TextData:
    docs, labels = synthetic_corpus(n_docs=n_docs, seed=seed)
    return build_text_task(docs, labels, class_names=("space", "farm"))


def write_corpus(docs: list[list[str]], labels: list[int], path: str | Path,
                 class_names: Sequence[str] = ("class0", "class1")) -> None:
    """Materialize documents as per-class directories of text files."""
    root = Path(path)
    for y, name in enumerate(class_names):
        (root / name).mkdir(parents=True, exist_ok=True)
    counters = {y: 0 for y in set(labels)}
    for doc, y in zip(docs, labels):
        counters[y] += 1
        out = root / class_names[y] / f"doc{counters[y]:04d}.txt"
        out.write_text(" ".join(doc), encoding="utf-8")
