"""
SEST span-extraction model.

  embedding layer:  [word; char-CNN; structural embedding] per token
  contextual layer: BiLSTM (d/2 per direction), shared by context and question
  attention layer:  similarity -> C2Q / Q2C -> G -> modeling BiLSTMs -> M
  output layer:     p1 = softmax(W_p1 [G; M]),  p2 = softmax(W_p2 [G; M2])

Training runs one example per Adam step. Checkpoints are JSON documents
with the config, vocabularies and every parameter value.
"""

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Deque, Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from tqdm import tqdm

from attention import (
    AttentionParams,
    context_to_question,
    fuse,
    model_encode,
    question_to_context,
    rows_of,
    run_stack,
    similarity,
)
from autodiff import (
    LOG_CLAMP,
    ParamStore,
    Tensor,
    add,
    adam_step,
    backward,
    derive_seed,
    grad_check,
    matmul,
    neg_log,
    pick,
    slice_vec,
    softmax_vec,
    stack,
)
from corpus_data import Annotation, Corpus, ExampleRecord, QaExample, Vocabs, annotate, build_vocabularies
from encoders import (
    BiLstmEncoder,
    CharCnnEmbedder,
    CnnEncoder,
    EmbeddingTable,
    NodeVectors,
    bilstm_sequence,
    embed_word,
    encode_syntactic,
    load_glove,
    syntactic_output_dim,
)
from extraction import SyntacticSequence
from sest_config import Metric, ModelConfig, SynEncoder, SynMode
from sest_errors import ArgumentError, DataError, LoadError, SestError, TrainingError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Prediction:
    begin: int
    end: int
    confidence: float
    answer_text: str = ""


# ============================================================================
# MODEL
# ============================================================================

class SestModel:
    """Parameters and layers of one configured model; forward passes never mutate it."""

    def __init__(self, config: ModelConfig, vocabs: Vocabs, init_glove: bool = True):
        self.config = config
        self.vocabs = vocabs
        self.store = ParamStore(config.seed)
        d = config.contextual_dim
        mode = config.syn_mode

        self.word_table: Optional[EmbeddingTable] = None
        if config.use_word_char or mode == SynMode.SEDT:
            self.word_table = EmbeddingTable.create(self.store, "word.table", vocabs.word, config.word_dim,
                                                    trainable=not config.freeze_word_vectors)
            if config.glove_path and init_glove:
                load_glove(config.glove_path, self.word_table)

        self.char_embedder: Optional[CharCnnEmbedder] = None
        if config.use_word_char:
            self.char_embedder = CharCnnEmbedder.create(self.store, vocabs.char, config.char_dim, config.char_filters,
                                                        config.char_width, config.max_word_chars)

        self.syn_encoder = None
        self.node_vectors: Optional[NodeVectors] = None
        syn_dim = 0
        if mode != SynMode.NONE:
            label_vocab = vocabs.for_mode(mode)
            self.node_vectors = NodeVectors(len(label_vocab), config.node_dim, derive_seed(config.seed, "nodes", mode.value))
            input_dim = config.node_dim + (config.word_dim if mode == SynMode.SEDT else 0)
            if config.syn_encoder == SynEncoder.LSTM:
                self.syn_encoder = BiLstmEncoder.create(self.store, "syn", input_dim, config.syn_hidden)
            else:
                self.syn_encoder = CnnEncoder.create(self.store, "syn", input_dim, config.syn_hidden, config.syn_filter_len)
            syn_dim = syntactic_output_dim(config.syn_encoder, config.syn_hidden)

        word_char_dim = config.word_dim + config.char_filters if config.use_word_char else 0
        self.embed_dim = word_char_dim + syn_dim
        self.contextual: List[BiLstmEncoder] = []
        for layer in range(config.contextual_layers):
            input_dim = self.embed_dim if layer == 0 else d
            self.contextual.append(BiLstmEncoder.create(self.store, f"contextual.{layer}", input_dim, d // 2))
        self.attention = AttentionParams.create(self.store, d)
        self.m2 = BiLstmEncoder.create(self.store, "output.m2", d, d // 2)
        self.w_p1 = self.store.add("output.W_p1", (5 * d,))
        self.w_p2 = self.store.add("output.W_p2", (5 * d,))
        logging.debug(f"[MODEL] {mode.value}/{config.syn_encoder.value}: embed {self.embed_dim}, "
                      f"{self.store.size()} parameters")

    def annotate(self, example: QaExample) -> Annotation:
        return annotate(example, self.config.extraction_config(), self.config.syn_mode, self.vocabs)


# ============================================================================
# FORWARD / LOSS / DECODING
# ============================================================================

def _embed_sentence(model: SestModel, example_id: str, tokens, sequences: Iterable[Optional[SyntacticSequence]],
                    cache: Dict[tuple, Tensor], where: str) -> List[Tensor]:
    rows = []
    for token, seq in zip(tokens, sequences):
        syn = None
        if model.syn_encoder is not None:
            if seq is None:
                raise DataError(f"{example_id}: {where} token {token.index} ({token.text!r}) has no "
                                f"{model.config.syn_mode.value} annotation")
            key = (seq.kind, seq.elements)
            syn = cache.get(key)
            if syn is None:
                syn = encode_syntactic(seq, model.config.syn_encoder, model.syn_encoder, model.node_vectors, model.word_table)
                cache[key] = syn
        rows.append(embed_word(token, model.word_table if model.config.use_word_char else None,
                               model.char_embedder, syn))
    return rows


def forward(model: SestModel, example: QaExample, annotation: Optional[Annotation] = None) -> Tuple[Tensor, Tensor]:
    """(p1, p2): begin and end distributions over the context positions."""
    if annotation is None:
        annotation = model.annotate(example)
    context_tokens = example.context_tokens
    if annotation.mode != model.config.syn_mode or len(annotation.context) != len(context_tokens) \
            or len(annotation.question) != len(example.question.tokens):
        raise DataError(f"{example.id}: annotation does not match the model's {model.config.syn_mode.value} mode")

    # structural embeddings repeat across tokens; encode each distinct sequence once
    cache: Dict[tuple, Tensor] = {}
    context_x = _embed_sentence(model, example.id, context_tokens, annotation.context, cache, "context")
    question_x = _embed_sentence(model, example.id, example.question.tokens, annotation.question, cache, "question")

    H = stack(run_stack(model.contextual, context_x))
    U = stack(run_stack(model.contextual, question_x))
    S = similarity(H, U, model.attention.w_s)
    G = fuse(H, context_to_question(S, U), question_to_context(S, H))
    M = model_encode(G, model.attention)
    M2 = stack(bilstm_sequence(model.m2, rows_of(M)))

    d4 = G.shape[1]
    p1 = softmax_vec(add(matmul(G, slice_vec(model.w_p1, 0, d4)), matmul(M, slice_vec(model.w_p1, d4, model.w_p1.shape[0]))))
    p2 = softmax_vec(add(matmul(G, slice_vec(model.w_p2, 0, d4)), matmul(M2, slice_vec(model.w_p2, d4, model.w_p2.shape[0]))))
    return p1, p2


def span_loss(p1: Tensor, p2: Tensor, gold_begin: int, gold_end: int) -> Tensor:
    """-log p1[begin] - log p2[end]; probabilities below LOG_CLAMP are clamped."""
    return add(neg_log(pick(p1, gold_begin)), neg_log(pick(p2, gold_end)))


def clamped_count(p1: Tensor, p2: Tensor, gold_begin: int, gold_end: int) -> int:
    return int(p1.data[gold_begin] <= LOG_CLAMP) + int(p2.data[gold_end] <= LOG_CLAMP)


def decode_span(p1, p2, max_span_len: int) -> Prediction:
    """
    Span (begin, end) with confidence p1[begin] * p2[end], maximized over begin <= end < begin + max_span_len.
    Ties go to the smaller begin, then the smaller end.
    """
    p1 = np.asarray(getattr(p1, "data", p1), dtype=np.float64)
    p2 = np.asarray(getattr(p2, "data", p2), dtype=np.float64)
    if p1.shape != p2.shape or p1.ndim != 1 or p1.size == 0:
        raise DataError(f"cannot decode distributions of shapes {p1.shape} and {p2.shape}")
    # una pasada: para cada end, el mejor begin es el mayor p1 de la ventana
    best = (0, 0, -1.0)
    window: Deque[int] = deque()  # indices with strictly decreasing p1, earliest first among equals
    for end in range(p1.size):
        while window and p1[window[-1]] < p1[end]:
            window.pop()
        window.append(end)
        if window[0] <= end - max_span_len:
            window.popleft()
        begin = window[0]
        score = float(p1[begin] * p2[end])
        if score > best[2] or (score == best[2] and begin < best[0]):
            best = (begin, end, score)
    return Prediction(*best)


def predict(model: SestModel, example: QaExample) -> Prediction:
    p1, p2 = forward(model, example)
    span = decode_span(p1, p2, model.config.max_span_len)
    return replace(span, answer_text=example.span_text(span.begin, span.end))


# ============================================================================
# ENTRENAMIENTO
# ============================================================================

def train(model: SestModel, corpus: Iterable[QaExample], eval_corpus: Optional[Iterable[QaExample]] = None,
          log_path: Optional[str] = None, progress: bool = False, metric: Metric = Metric.CHAR,
          threads: int = 1, stop_at_em: Optional[float] = None) -> List[dict]:
    """
    Per-example Adam updates, shuffled per epoch. Returns one record per epoch.
    With stop_at_em, training ends after the first epoch whose eval EM reaches it.
    """
    from evaluation import evaluate

    examples = list(corpus)
    if not examples:
        raise DataError("training corpus is empty")
    eval_examples = list(eval_corpus) if eval_corpus is not None else []
    if stop_at_em is not None and not eval_examples:
        raise ArgumentError("stop_at_em needs an evaluation corpus")
    cfg = model.config
    annotations = [model.annotate(example) for example in examples]

    log_handle = Path(log_path).open("w", encoding="utf-8") if log_path else None
    records: List[dict] = []
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = np.random.default_rng(derive_seed(cfg.seed, "shuffle", epoch)).permutation(len(examples))
            total, clamped = 0.0, 0
            for k in tqdm(order, desc=f"epoch {epoch}", disable=not progress, leave=False):
                example = examples[k]
                model.store.zero_grad()
                p1, p2 = forward(model, example, annotations[k])
                loss = span_loss(p1, p2, *example.answer)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingError("loss is not finite", epoch, example.id)
                clamped += clamped_count(p1, p2, *example.answer)
                backward(loss)
                adam_step(model.store, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
                total += value

            record = {"epoch": epoch, "mean_loss": total / len(examples), "clamped": clamped,
                      "eval_em": None, "eval_f1": None}
            if eval_examples:
                result = evaluate(model, eval_examples, metric=metric, threads=threads)
                record["eval_em"], record["eval_f1"] = result.em, result.f1
            records.append(record)
            if clamped:
                logging.warning(f"[TRAIN] epoch {epoch}: {clamped} gold probabilities clamped at {LOG_CLAMP}")
            logging.info(f"[TRAIN] epoch {epoch} mean_loss={record['mean_loss']:.6f}"
                         + (f" em={record['eval_em']:.4f} f1={record['eval_f1']:.4f}" if eval_examples else ""))
            if log_handle:
                log_handle.write(json.dumps(record, sort_keys=True) + "\n")
                log_handle.flush()
            if stop_at_em is not None and record["eval_em"] >= stop_at_em:
                logging.info(f"[TRAIN] eval em {record['eval_em']:.4f} reached {stop_at_em:g}; stopping after epoch {epoch}")
                break
    finally:
        if log_handle:
            log_handle.close()
    return records


# ============================================================================
# CHECKPOINTS (JSON VERSIONADO)
# ============================================================================

def save(model: SestModel, path: str) -> None:
    document = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.model_dump(mode="json"),
        "vocabs": model.vocabs.to_dict(),
        "params": model.store.to_dict(),
    }
    Path(path).write_text(json.dumps(document, sort_keys=True), encoding="utf-8")
    logging.info(f"[CKPT] saved {len(model.store)} parameters to {path}")


def load(path: str) -> SestModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise LoadError(f"cannot load checkpoint {path}: {e.strerror or e}")
    if not text.strip():
        raise LoadError(f"cannot load checkpoint {path}: empty file")
    try:
        document = json.loads(text)
    except json.JSONDecodeError:
        raise LoadError(f"cannot load checkpoint {path}: truncated or corrupt JSON")
    if not isinstance(document, dict):
        raise LoadError(f"cannot load checkpoint {path}: not a checkpoint document")
    version = document.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise LoadError(f"cannot load checkpoint {path}: format version {version}, expected {CHECKPOINT_VERSION}")
    try:
        config = ModelConfig(**document["config"])
        vocabs = Vocabs.from_dict(document["vocabs"])
        model = SestModel(config, vocabs, init_glove=False)
        model.store.load_dict(document["params"])
    except KeyError as e:
        raise LoadError(f"cannot load checkpoint {path}: missing section {e}")
    except ValidationError as e:
        raise LoadError(f"cannot load checkpoint {path}: invalid config: {e.errors()[0]['msg']}")
    except SestError as e:
        raise LoadError(f"cannot load checkpoint {path}: {e}")
    logging.info(f"[CKPT] loaded {len(model.store)} parameters from {path}")
    return model


# ============================================================================
# GRADIENT CHECK HARNESS
# ============================================================================

GRADCHECK_RECORD = {
    "id": "gradcheck",
    "context": [{
        "tokens": [{"text": "the", "pos": "DT"}, {"text": "cat", "pos": "NN"}, {"text": "sleeps", "pos": "VBZ"}],
        "ctree": "(S (NP (DT the) (NN cat)) (VP (VBZ sleeps)))",
        "dtree": [{"head": 1, "dep": 0, "label": "det"}, {"head": 2, "dep": 1, "label": "nsubj"},
                  {"head": -1, "dep": 2, "label": "root"}],
    }],
    "question": {
        "tokens": [{"text": "who", "pos": "WP"}, {"text": "sleeps", "pos": "VBZ"}],
        "ctree": "(SBARQ (WHNP (WP who)) (SQ (VP (VBZ sleeps))))",
        "dtree": [{"head": 1, "dep": 0, "label": "nsubj"}, {"head": -1, "dep": 1, "label": "root"}],
    },
    "answer": {"begin": 0, "end": 1},
}

GRADCHECK_DIMS = dict(word_dim=4, char_dim=3, char_filters=3, char_width=2, max_word_chars=4,
                      node_dim=3, syn_hidden=2, syn_filter_len=2, contextual_dim=4)

# configuraciones que recorre el comando gradcheck
GRADCHECK_MODES = [
    (SynMode.NONE, SynEncoder.LSTM),
    (SynMode.POS, SynEncoder.LSTM),
    (SynMode.SECT, SynEncoder.LSTM),
    (SynMode.SECT, SynEncoder.CNN),
    (SynMode.SEDT, SynEncoder.LSTM),
    (SynMode.SEDT, SynEncoder.CNN),
]

# rel-error floor: components whose gradients are tiny compare on absolute error
GRADCHECK_FLOOR = 1e-6


def gradcheck_config(syn_mode: SynMode = SynMode.SECT, syn_encoder: SynEncoder = SynEncoder.LSTM,
                     seed: int = 0, **overrides) -> ModelConfig:
    settings = dict(GRADCHECK_DIMS, syn_mode=syn_mode, syn_encoder=syn_encoder, seed=seed)
    settings.update(overrides)
    return ModelConfig(**settings)


def gradcheck_model(config: ModelConfig, eps: float = 1e-5, jitter: float = 0.1) -> float:
    """Max relative gradient error of the full model on a 3-token context / 2-token question."""
    example = QaExample.from_record(ExampleRecord.model_validate(GRADCHECK_RECORD))
    vocabs = build_vocabularies(Corpus([example]), config.strip_dep_subcategories)
    model = SestModel(config, vocabs, init_glove=False)
    rng = np.random.default_rng(derive_seed(config.seed, "jitter"))
    # off exact zeros so no relu or max sits on a kink
    for _, tensor in model.store.items():
        tensor.data = tensor.data + rng.normal(0.0, jitter, size=tensor.shape)
    annotation = model.annotate(example)

    def objective(_store: ParamStore) -> Tensor:
        p1, p2 = forward(model, example, annotation)
        return span_loss(p1, p2, *example.answer)

    error = grad_check(objective, model.store, eps=eps, floor=GRADCHECK_FLOOR)
    logging.info(f"[GRADCHECK] {config.syn_mode.value}/{config.syn_encoder.value}: "
                 f"{model.store.size()} parameters, max relative error {error:.3e}")
    return error
