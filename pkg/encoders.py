"""
Sequence encoders and the word-level input representation.

- LstmCell / BiLstmEncoder: recurrent encoders. `bilstm_encode` returns the
  final states [u_0; v_T]; `bilstm_sequence` returns one vector per position.
- CnnEncoder: filters over windows of rows, max-pooled per filter.
- EmbeddingTable / CharCnnEmbedder: word and character embeddings.
- NodeVectors: fixed identity vectors for tree node labels.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from autodiff import (
    ParamStore,
    Tensor,
    add,
    concat,
    constant,
    lstm_cell,
    matmul,
    max_over_cols,
    relu,
    slice_vec,
    stack,
    take_row,
    take_rows,
    tanh,
    unfold,
    zeros,
)
from extraction import LabelVocab, SequenceKind, SyntacticSequence, node_vector
from sest_config import SynEncoder
from sest_errors import ArgumentError, DataError, ShapeError
from treebank import Token


# ============================================================================
# RECURRENT
# ============================================================================

@dataclass
class LstmCell:
    input_dim: int
    hidden_dim: int
    w_i: Tensor
    w_f: Tensor
    w_o: Tensor
    w_g: Tensor
    b_i: Tensor
    b_f: Tensor
    b_o: Tensor
    b_g: Tensor

    @classmethod
    def create(cls, store: ParamStore, prefix: str, input_dim: int, hidden_dim: int) -> "LstmCell":
        shape = (hidden_dim, input_dim + hidden_dim)
        weights = {gate: store.add(f"{prefix}.W_{gate}", shape) for gate in "ifog"}
        biases = {gate: store.add(f"{prefix}.b_{gate}", (hidden_dim,), init="zeros") for gate in "iog"}
        biases["f"] = store.add(f"{prefix}.b_f", (hidden_dim,), init="const", value=1.0)
        return cls(input_dim, hidden_dim,
                   weights["i"], weights["f"], weights["o"], weights["g"],
                   biases["i"], biases["f"], biases["o"], biases["g"])

    def step(self, x: Tensor, state: Tensor) -> Tensor:
        if x.shape != (self.input_dim,):
            raise ShapeError("lstm input", x.shape, (self.input_dim,))
        return lstm_cell(x, state, self.w_i, self.w_f, self.w_o, self.w_g,
                         self.b_i, self.b_f, self.b_o, self.b_g)

    def run(self, xs: Sequence[Tensor], reverse: bool = False) -> List[Tensor]:
        """Hidden state per position, returned in input order."""
        state = zeros(2 * self.hidden_dim)
        outputs: List[Optional[Tensor]] = [None] * len(xs)
        positions = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
        for t in positions:
            state = self.step(xs[t], state)
            outputs[t] = slice_vec(state, 0, self.hidden_dim)
        return outputs


@dataclass
class BiLstmEncoder:
    input_dim: int
    hidden_dim: int
    forward: LstmCell
    backward: LstmCell

    @classmethod
    def create(cls, store: ParamStore, prefix: str, input_dim: int, hidden_dim: int) -> "BiLstmEncoder":
        return cls(input_dim, hidden_dim,
                   LstmCell.create(store, f"{prefix}.fw", input_dim, hidden_dim),
                   LstmCell.create(store, f"{prefix}.bw", input_dim, hidden_dim))

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim


def bilstm_sequence(enc: BiLstmEncoder, xs: Sequence[Tensor]) -> List[Tensor]:
    """[forward h_t; backward h_t] for every position t."""
    forward = enc.forward.run(xs)
    backward = enc.backward.run(xs, reverse=True)
    return [concat([fw, bw]) for fw, bw in zip(forward, backward)]


def bilstm_encode(enc: BiLstmEncoder, xs: Sequence[Tensor]) -> Tensor:
    """[backward final (u_0); forward final (v_T)]; zeros for an empty sequence."""
    if not xs:
        return zeros(enc.output_dim)
    forward = enc.forward.run(xs)
    backward = enc.backward.run(xs, reverse=True)
    return concat([backward[0], forward[-1]])


# ============================================================================
# CONVOLUTIONAL
# ============================================================================

ACTIVATIONS = {
    "relu": relu,
    "tanh": tanh,
    "identity": lambda t: t,
}


@dataclass
class CnnEncoder:
    input_dim: int
    filter_len: int
    num_filters: int
    weight: Tensor   # (filter_len * input_dim, num_filters); column j is w_j
    bias: Tensor     # (num_filters,)
    activation: str = "relu"

    @classmethod
    def create(cls, store: ParamStore, prefix: str, input_dim: int, num_filters: int, filter_len: int,
               activation: str = "relu") -> "CnnEncoder":
        if num_filters < 1 or filter_len < 1:
            raise ArgumentError("CNN needs at least one filter of length >= 1")
        weight = store.add(f"{prefix}.W", (filter_len * input_dim, num_filters))
        bias = store.add(f"{prefix}.b", (num_filters,), init="zeros")
        return cls(input_dim, filter_len, num_filters, weight, bias, activation)

    @property
    def output_dim(self) -> int:
        return self.num_filters


def cnn_encode(enc: CnnEncoder, xs: Sequence[Tensor]) -> Tensor:
    """Per filter j: max over windows i of f(w_j . x_{i:i+l-1} + b_j)."""
    if not xs:
        raise ArgumentError("cnn_encode needs at least one input row")
    for x in xs:
        if x.shape != (enc.input_dim,):
            raise ShapeError("cnn input", x.shape, (enc.input_dim,))
    return cnn_encode_rows(enc, stack(xs, axis=0))


def cnn_encode_rows(enc: CnnEncoder, rows: Tensor) -> Tensor:
    """cnn_encode over a (n, input_dim) matrix; zero rows pad n up to the filter length."""
    if rows.data.ndim != 2 or rows.shape[1] != enc.input_dim:
        raise ShapeError("cnn input", rows.shape, (enc.input_dim,))
    if rows.shape[0] < enc.filter_len:
        rows = concat([rows, zeros(enc.filter_len - rows.shape[0], enc.input_dim)])
    windows = unfold(rows, enc.filter_len)
    features = ACTIVATIONS[enc.activation](add(matmul(windows, enc.weight), enc.bias))
    return max_over_cols(features)


# ============================================================================
# EMBEDDINGS
# ============================================================================

@dataclass
class EmbeddingTable:
    vocab: LabelVocab
    dim: int
    matrix: Tensor
    trainable: bool = True

    @classmethod
    def create(cls, store: ParamStore, name: str, vocab: LabelVocab, dim: int, trainable: bool = True) -> "EmbeddingTable":
        matrix = store.add(name, (len(vocab), dim), requires_grad=trainable)
        return cls(vocab, dim, matrix, trainable)

    def row(self, row_id: int) -> Tensor:
        return take_row(self.matrix, row_id)

    def lookup(self, text: str) -> Tensor:
        return self.row(self.vocab.get(text))


@dataclass
class CharCnnEmbedder:
    table: EmbeddingTable
    cnn: CnnEncoder
    max_word_chars: int = 16

    @classmethod
    def create(cls, store: ParamStore, vocab: LabelVocab, char_dim: int, filters: int, width: int,
               max_word_chars: int) -> "CharCnnEmbedder":
        table = EmbeddingTable.create(store, "char.table", vocab, char_dim)
        cnn = CnnEncoder.create(store, "char.cnn", char_dim, filters, width)
        return cls(table, cnn, max_word_chars)

    @property
    def output_dim(self) -> int:
        return self.cnn.output_dim

    def embed(self, word: str) -> Tensor:
        chars = list(word)[: self.max_word_chars]
        padding = zeros(self.max_word_chars - len(chars), self.table.dim)
        if not chars:
            return cnn_encode_rows(self.cnn, padding)
        rows = take_rows(self.table.matrix, [self.table.vocab.get(ch) for ch in chars])
        if len(chars) < self.max_word_chars:
            rows = concat([rows, padding])
        return cnn_encode_rows(self.cnn, rows)


class NodeVectors:
    """Fixed (never trained) identity vectors for the labels of one vocabulary."""

    def __init__(self, vocab_size: int, dim: int, master_seed: int):
        self.dim = dim
        self.master_seed = master_seed
        self._vectors: List[Tensor] = [constant(node_vector(i, dim, master_seed)) for i in range(vocab_size)]

    def __len__(self) -> int:
        return len(self._vectors)

    def vector(self, label_id: int) -> Tensor:
        if not 0 <= label_id < len(self._vectors):
            raise ArgumentError(f"label id {label_id} outside node table of {len(self._vectors)}")
        return self._vectors[label_id]


def syntactic_output_dim(mode: SynEncoder, syn_hidden: int) -> int:
    return 2 * syn_hidden if SynEncoder(mode) == SynEncoder.LSTM else syn_hidden


def encode_syntactic(seq: SyntacticSequence, mode: SynEncoder, enc, node_vectors: NodeVectors,
                     word_table: Optional[EmbeddingTable] = None) -> Tensor:
    """Structural embedding of one syntactic sequence; zeros when it is empty."""
    mode = SynEncoder(mode)
    if not seq.elements:
        return zeros(enc.output_dim)
    inputs = []
    for label_id, word_id in seq.elements:
        label_vec = node_vectors.vector(label_id)
        if seq.kind == SequenceKind.SEDT:
            if word_table is None or word_id is None:
                raise ArgumentError("SEDT elements need a word table and word ids")
            inputs.append(concat([word_table.row(word_id), label_vec]))
        else:
            inputs.append(label_vec)
    if inputs[0].shape != (enc.input_dim,):
        raise ShapeError("syntactic encoder input", inputs[0].shape, (enc.input_dim,))
    if mode == SynEncoder.LSTM:
        return bilstm_encode(enc, inputs)
    return cnn_encode(enc, inputs)


def embed_word(token: Token, word_table: Optional[EmbeddingTable], char_embedder: Optional[CharCnnEmbedder],
               syn_embedding: Optional[Tensor]) -> Tensor:
    """[word; char-CNN; structural], skipping the parts a model does not use."""
    parts = []
    if word_table is not None:
        parts.append(word_table.lookup(token.text))
    if char_embedder is not None:
        parts.append(char_embedder.embed(token.text))
    if syn_embedding is not None and syn_embedding.shape[0] > 0:
        parts.append(syn_embedding)
    if not parts:
        raise ArgumentError("token representation has no parts")
    return concat(parts)


# ============================================================================
# GLOVE
# ============================================================================

def load_glove(path: str, table: EmbeddingTable) -> int:
    """Fills rows of `table` for words found in a GloVe text file. Returns rows filled."""
    filled = 0
    data = table.matrix.data.copy()
    with Path(path).open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            word, values = parts[0], parts[1:]
            if word not in table.vocab:
                continue
            if len(values) != table.dim:
                raise DataError(f"GloVe line {line_no}: {len(values)} values, expected {table.dim}")
            data[table.vocab.get(word)] = np.asarray(values, dtype=np.float64)
            filled += 1
    table.matrix.data = data
    logging.info(f"[GLOVE] {filled} of {len(table.vocab)} words initialised from {path}")
    return filled
