"""
Syntactic sequence extraction.

For every word p we build a sequence S(p) of tree nodes and hand it to a
syntactic encoder:

  SECT: phrase categories from p's leaf toward the root, nearest first,
        cut to the window.
  SEDT: p's dependents in sentence order, each as (relation label, word);
        only the `window` nearest survive when there are more.
  POS:  the single POS tag of p.

Ablations (random order / random nodes) are applied after extraction.
Node identity vectors are fixed draws from a standard normal keyed by
(seed, label id); they are never trained.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from autodiff import derive_seed
from sest_config import ExtractionConfig, OrderMode
from sest_errors import ArgumentError
from treebank import ConstituencyTree, DependencyTree, Token, dependents_of, path_to_root

UNK_LABEL = "<unk>"
UNK_ID = 0


# ============================================================================
# VOCABULARIES
# ============================================================================

class LabelVocab:
    """Label string <-> dense id. Id 0 is UNK; lookups after freeze() never grow."""

    def __init__(self, labels: Iterable[str] = ()):
        self._ids: Dict[str, int] = {UNK_LABEL: UNK_ID}
        self._labels: List[str] = [UNK_LABEL]
        self.frozen = False
        for label in labels:
            self.lookup(label)

    def lookup(self, label: str) -> int:
        found = self._ids.get(label)
        if found is not None:
            return found
        if self.frozen:
            return UNK_ID
        self._ids[label] = len(self._labels)
        self._labels.append(label)
        return self._ids[label]

    def get(self, label: str) -> int:
        """Read-only lookup: unknown labels map to UNK even before freezing."""
        return self._ids.get(label, UNK_ID)

    def label_of(self, label_id: int) -> str:
        if not 0 <= label_id < len(self._labels):
            raise ArgumentError(f"label id {label_id} out of range for vocabulary of {len(self._labels)}")
        return self._labels[label_id]

    def freeze(self) -> "LabelVocab":
        self.frozen = True
        return self

    def to_list(self) -> List[str]:
        return list(self._labels)

    @classmethod
    def from_list(cls, labels: Sequence[str]) -> "LabelVocab":
        if not labels or labels[0] != UNK_LABEL:
            raise ArgumentError("serialized vocabulary must start with the UNK label")
        vocab = cls(labels[1:])
        return vocab.freeze()

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids


def build_vocab(labels: Iterable[str]) -> LabelVocab:
    return LabelVocab(sorted(set(labels))).freeze()


# ============================================================================
# SEQUENCES
# ============================================================================

class SequenceKind(str, Enum):
    SECT = "SECT"
    SEDT = "SEDT"
    POS = "POS"


@dataclass(frozen=True)
class SyntacticSequence:
    kind: SequenceKind
    # (label_id, word_id); word_id only for SEDT
    elements: Tuple[Tuple[int, Optional[int]], ...] = ()

    @property
    def label_ids(self) -> List[int]:
        return [label_id for label_id, _ in self.elements]

    @property
    def word_ids(self) -> List[Optional[int]]:
        return [word_id for _, word_id in self.elements]

    def __len__(self) -> int:
        return len(self.elements)


def normalize_dep_label(label: str) -> str:
    """Drops the subcategory: 'nmod:poss' -> 'nmod'."""
    return label.split(":", 1)[0]


def apply_ablation(seq: SyntacticSequence, mode: OrderMode, seed: int, vocab_size: int) -> SyntacticSequence:
    mode = OrderMode(mode)
    if mode == OrderMode.ORIGINAL or not seq.elements:
        return seq
    rng = np.random.default_rng(seed)
    if mode == OrderMode.RANDOM_ORDER:
        order = rng.permutation(len(seq.elements))
        return SyntacticSequence(seq.kind, tuple(seq.elements[i] for i in order))
    if vocab_size < 1:
        raise ArgumentError("random-nodes ablation needs a non-empty vocabulary")
    drawn = rng.integers(0, vocab_size, size=len(seq.elements))
    return SyntacticSequence(
        seq.kind,
        tuple((int(label_id), word_id) for label_id, (_, word_id) in zip(drawn, seq.elements)),
    )


def _token_seed(cfg: ExtractionConfig, tokens: Sequence[Token], token_index: int, kind: SequenceKind) -> int:
    sentence = " ".join(token.text for token in tokens)
    return derive_seed(cfg.seed, kind.value, sentence, token_index)


def extract_sect(tree: ConstituencyTree, token_index: int, cfg: ExtractionConfig, vocab: LabelVocab) -> SyntacticSequence:
    path = path_to_root(tree, token_index)
    preterminal = tree.tokens[token_index].pos
    # punctuation word, or punctuation at the head of the path
    if preterminal in cfg.punctuation_set or (path and path[0] in cfg.punctuation_set):
        return SyntacticSequence(SequenceKind.SECT)
    elements = tuple((vocab.lookup(label), None) for label in path[: cfg.window])
    seq = SyntacticSequence(SequenceKind.SECT, elements)
    return apply_ablation(seq, cfg.order_mode, _token_seed(cfg, tree.tokens, token_index, SequenceKind.SECT), len(vocab))


def extract_sedt(
    tree: DependencyTree,
    token_index: int,
    cfg: ExtractionConfig,
    label_vocab: LabelVocab,
    word_vocab: LabelVocab,
) -> SyntacticSequence:
    dependents = dependents_of(tree, token_index)
    if len(dependents) > cfg.window:
        # l-nearest; distance ties go to the earlier position
        nearest = sorted(dependents, key=lambda item: (abs(item[0] - token_index), item[0]))[: cfg.window]
        dependents = sorted(nearest)
    elements = []
    for dependent, label in dependents:
        if cfg.strip_dep_subcategories:
            label = normalize_dep_label(label)
        elements.append((label_vocab.lookup(label), word_vocab.lookup(tree.tokens[dependent].text)))
    seq = SyntacticSequence(SequenceKind.SEDT, tuple(elements))
    return apply_ablation(seq, cfg.order_mode, _token_seed(cfg, tree.tokens, token_index, SequenceKind.SEDT), len(label_vocab))


def extract_pos(token: Token, vocab: LabelVocab, punctuation_set: Optional[Iterable[str]] = None) -> SyntacticSequence:
    if not token.pos:
        raise ArgumentError(f"token {token.index} ({token.text!r}) has no POS tag")
    if punctuation_set is not None and token.pos in punctuation_set:
        return SyntacticSequence(SequenceKind.POS)
    return SyntacticSequence(SequenceKind.POS, ((vocab.lookup(token.pos), None),))


def node_vector(label_id: int, dim: int, master_seed: int) -> np.ndarray:
    """Fixed standard-normal identity vector for a tree node label."""
    if dim < 1:
        raise ArgumentError(f"node vector dim must be >= 1, got {dim}")
    rng = np.random.default_rng([int(master_seed), int(label_id)])
    return rng.standard_normal(dim)


def describe(seq: SyntacticSequence, label_vocab: LabelVocab, word_vocab: Optional[LabelVocab] = None) -> Dict[str, list]:
    """Label/word strings of a sequence, for the extract command output."""
    labels = [label_vocab.label_of(label_id) for label_id in seq.label_ids]
    words = []
    if word_vocab is not None:
        words = [word_vocab.label_of(word_id) for word_id in seq.word_ids if word_id is not None]
    return {"labels": labels, "words": words}
