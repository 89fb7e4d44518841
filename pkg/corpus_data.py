"""
QA corpus: record schema, loading with validation, saving, vocabularies and
per-token syntactic annotation.

One JSON record per line:

  {"id": str,
   "context": [{"tokens": [{"text", "pos"}], "ctree": "<bracketed>",
                "dtree": [{"head": int|-1, "dep": int, "label": str}]}],
   "question": {same as one context sentence},
   "answer": {"begin": int, "end": int}}

Answer indices are inclusive and global over the concatenated context tokens.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from extraction import LabelVocab, SyntacticSequence, build_vocab, extract_pos, extract_sect, extract_sedt, normalize_dep_label
from sest_config import ExtractionConfig, SynMode
from sest_errors import DataError, SestError
from treebank import Arc, ConstituencyTree, DependencyTree, Token, parse_constituency, serialize_constituency


# ============================================================================
# ESQUEMA DE LOS REGISTROS JSONL
# ============================================================================

class TokenRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    text: str = Field(..., min_length=1, description="Surface form")
    pos: str = Field(..., min_length=1, description="PTB POS tag")


class ArcRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    head: int = Field(..., ge=-1, description="0-based head index, -1 for ROOT")
    dep: int = Field(..., ge=0, description="0-based dependent index")
    label: str = Field(..., min_length=1, description="Dependency relation")


class SentenceRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tokens: List[TokenRecord] = Field(..., min_length=1)
    ctree: str = Field(..., description="Bracketed constituency parse")
    dtree: List[ArcRecord] = Field(..., description="One arc per token")


class AnswerRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    begin: int = Field(..., ge=0)
    end: int = Field(..., ge=0)


class ExampleRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., min_length=1)
    context: List[SentenceRecord] = Field(..., min_length=1)
    question: SentenceRecord
    answer: AnswerRecord


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[Token, ...]
    ctree: ConstituencyTree
    dtree: DependencyTree

    @classmethod
    def from_record(cls, record: SentenceRecord) -> "Sentence":
        tokens = tuple(Token(index=i, text=t.text, pos=t.pos) for i, t in enumerate(record.tokens))
        ctree = parse_constituency(record.ctree)
        if [leaf.text for leaf in ctree.tokens] != [token.text for token in tokens]:
            raise DataError("parse/token mismatch")
        dtree = DependencyTree.from_arcs(tokens, [Arc(arc.head, arc.dep, arc.label) for arc in record.dtree])
        return cls(tokens, ctree, dtree)

    def to_record(self) -> dict:
        return {
            "tokens": [{"text": t.text, "pos": t.pos} for t in self.tokens],
            "ctree": serialize_constituency(self.ctree),
            "dtree": [{"head": a.head, "dep": a.dependent, "label": a.label} for a in self.dtree.arcs],
        }

    @property
    def text(self) -> str:
        return " ".join(token.text for token in self.tokens)


@dataclass
class Annotation:
    mode: SynMode
    context: Tuple[Optional[SyntacticSequence], ...]
    question: Tuple[Optional[SyntacticSequence], ...]
    vocabs: "Vocabs" = field(repr=False, compare=False, default=None)


@dataclass
class QaExample:
    id: str
    context: Tuple[Sentence, ...]
    question: Sentence
    answer: Tuple[int, int]
    _annotations: Dict[tuple, Annotation] = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_record(cls, record: ExampleRecord) -> "QaExample":
        context = tuple(Sentence.from_record(sentence) for sentence in record.context)
        example = cls(record.id, context, Sentence.from_record(record.question),
                      (record.answer.begin, record.answer.end))
        total = len(example.context_tokens)
        begin, end = example.answer
        if begin > end:
            raise DataError(f"answer begin {begin} > end {end}")
        if end >= total:
            raise DataError(f"answer end {end} outside context of {total} tokens")
        return example

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "context": [sentence.to_record() for sentence in self.context],
            "question": self.question.to_record(),
            "answer": {"begin": self.answer[0], "end": self.answer[1]},
        }

    @property
    def context_tokens(self) -> List[Token]:
        return [token for sentence in self.context for token in sentence.tokens]

    @property
    def sentence_offsets(self) -> List[int]:
        offsets, total = [], 0
        for sentence in self.context:
            offsets.append(total)
            total += len(sentence.tokens)
        return offsets

    def locate(self, global_index: int) -> Tuple[int, int]:
        """(sentence number, index within the sentence) of a global context index."""
        for number, offset in reversed(list(enumerate(self.sentence_offsets))):
            if global_index >= offset:
                return number, global_index - offset
        raise DataError(f"{self.id}: context index {global_index} out of range")

    def span_text(self, begin: int, end: int) -> str:
        return " ".join(token.text for token in self.context_tokens[begin:end + 1])

    @property
    def answer_text(self) -> str:
        return self.span_text(*self.answer)


@dataclass(frozen=True)
class Rejection:
    example_id: str
    reason: str


@dataclass
class ValidationReport:
    accepted: int = 0
    rejections: List[Rejection] = field(default_factory=list)

    def reject(self, example_id: str, reason: str) -> None:
        self.rejections.append(Rejection(example_id, reason))
        logging.warning(f"[CORPUS] rejected {example_id}: {reason}")

    def to_records(self) -> List[dict]:
        return [{"example_id": r.example_id, "reason": r.reason} for r in self.rejections]


@dataclass
class Corpus:
    examples: List[QaExample]
    report: ValidationReport = field(default_factory=ValidationReport)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[QaExample]:
        return iter(self.examples)

    def statistics(self) -> Dict[str, int]:
        return {
            "examples": len(self.examples),
            "context_tokens": sum(len(e.context_tokens) for e in self.examples),
            "question_tokens": sum(len(e.question.tokens) for e in self.examples),
            "rejected": len(self.report.rejections),
        }


# ============================================================================
# CARGA Y GUARDADO
# ============================================================================

def _reason(error: Exception) -> str:
    if isinstance(error, ValidationError):
        first = error.errors()[0]
        return "schema: " + ".".join(str(part) for part in first["loc"]) + f" {first['msg']}"
    return str(error)


def parse_corpus_lines(lines: Sequence[str], source: str = "<memory>") -> Corpus:
    report = ValidationReport()
    examples: List[QaExample] = []
    seen = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            report.reject(f"line {line_no}", f"invalid JSON: {e.msg}")
            continue
        example_id = raw.get("id") if isinstance(raw, dict) and isinstance(raw.get("id"), str) else f"line {line_no}"
        try:
            example = QaExample.from_record(ExampleRecord.model_validate(raw))
        except (ValidationError, SestError) as e:
            report.reject(example_id, _reason(e))
            continue
        if example.id in seen:
            report.reject(example.id, "duplicate id")
            continue
        seen.add(example.id)
        examples.append(example)
    report.accepted = len(examples)
    logging.info(f"[CORPUS] {source}: {len(examples)} accepted, {len(report.rejections)} rejected")
    if not examples:
        raise DataError(f"no valid examples in {source}")
    return Corpus(examples, report)


def load_corpus(path: str) -> Corpus:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read corpus {path}: {e.strerror or e}")
    return parse_corpus_lines(text.splitlines(), source=path)


def save_corpus(corpus: Corpus, path: str) -> None:
    lines = [json.dumps(example.to_record(), sort_keys=True, ensure_ascii=False) for example in corpus]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    logging.info(f"[CORPUS] wrote {len(lines)} examples to {path}")


# ============================================================================
# VOCABULARIES
# ============================================================================

@dataclass
class Vocabs:
    word: LabelVocab
    char: LabelVocab
    const: LabelVocab
    dep: LabelVocab
    pos: LabelVocab

    def to_dict(self) -> Dict[str, List[str]]:
        return {name: getattr(self, name).to_list() for name in ("word", "char", "const", "dep", "pos")}

    @classmethod
    def from_dict(cls, document: Dict[str, List[str]]) -> "Vocabs":
        return cls(**{name: LabelVocab.from_list(document[name]) for name in ("word", "char", "const", "dep", "pos")})

    def for_mode(self, mode: SynMode) -> Optional[LabelVocab]:
        return {SynMode.SECT: self.const, SynMode.SEDT: self.dep, SynMode.POS: self.pos}.get(SynMode(mode))


def _sentences(corpus: Corpus) -> Iterator[Sentence]:
    for example in corpus:
        yield from example.context
        yield example.question


def build_vocabularies(corpus: Corpus, strip_dep_subcategories: bool = True) -> Vocabs:
    """Frozen vocabularies over every sentence of the corpus."""
    words, chars, const, dep, pos = set(), set(), set(), set(), set()
    for sentence in _sentences(corpus):
        for token in sentence.tokens:
            words.add(token.text)
            chars.update(token.text)
            pos.add(token.pos)
        for above in sentence.ctree.ancestors:
            const.update(above[1:])
        for arc in sentence.dtree.arcs:
            dep.add(normalize_dep_label(arc.label) if strip_dep_subcategories else arc.label)
    return Vocabs(build_vocab(words), build_vocab(chars), build_vocab(const), build_vocab(dep), build_vocab(pos))


# ============================================================================
# ANOTACIÓN SINTÁCTICA
# ============================================================================

def _annotate_sentence(sentence: Sentence, cfg: ExtractionConfig, mode: SynMode, vocabs: Vocabs) -> List[Optional[SyntacticSequence]]:
    if mode == SynMode.NONE:
        return [None] * len(sentence.tokens)
    sequences = []
    for token in sentence.tokens:
        try:
            if mode == SynMode.SECT:
                sequences.append(extract_sect(sentence.ctree, token.index, cfg, vocabs.const))
            elif mode == SynMode.SEDT:
                sequences.append(extract_sedt(sentence.dtree, token.index, cfg, vocabs.dep, vocabs.word))
            else:
                sequences.append(extract_pos(token, vocabs.pos))
        except SestError as e:
            raise DataError(f"token {token.index} ({token.text!r}): {e}")
    return sequences


def annotate(example: QaExample, cfg: ExtractionConfig, mode: SynMode, vocabs: Vocabs) -> Annotation:
    """Secuencias sintácticas de cada token del contexto y de la pregunta; se cachean en el ejemplo."""
    mode = SynMode(mode)
    key = (mode, cfg.model_dump_json(), id(vocabs))
    cached = example._annotations.get(key)
    if cached is not None and cached.vocabs is vocabs:
        return cached
    context: List[Optional[SyntacticSequence]] = []
    for number, sentence in enumerate(example.context):
        try:
            context.extend(_annotate_sentence(sentence, cfg, mode, vocabs))
        except SestError as e:
            raise DataError(f"{example.id}: context sentence {number}: {e}")
    try:
        question = _annotate_sentence(example.question, cfg, mode, vocabs)
    except SestError as e:
        raise DataError(f"{example.id}: question: {e}")
    annotation = Annotation(mode, tuple(context), tuple(question), vocabs)
    example._annotations[key] = annotation
    return annotation
