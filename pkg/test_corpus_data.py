import copy
import json

import pytest

from corpus_data import (
    Corpus,
    ExampleRecord,
    QaExample,
    Vocabs,
    annotate,
    build_vocabularies,
    load_corpus,
    parse_corpus_lines,
    save_corpus,
)
from extraction import SequenceKind
from sest_config import ExtractionConfig, SynMode
from sest_errors import DataError
from sest_model import GRADCHECK_RECORD


def record(**changes):
    document = copy.deepcopy(GRADCHECK_RECORD)
    document.update(changes)
    return document


def lines(*documents):
    return [json.dumps(d) for d in documents]


def test_load_three_valid_records(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(lines(record(id="a"), record(id="b"), record(id="c"))) + "\n", encoding="utf-8")
    corpus = load_corpus(str(path))
    assert len(corpus) == 3
    assert [e.id for e in corpus] == ["a", "b", "c"]
    assert corpus.report.accepted == 3
    assert corpus.report.rejections == []


def test_answer_outside_context_is_rejected():
    corpus = parse_corpus_lines(lines(record(id="ok"), record(id="far", answer={"begin": 1, "end": 3})))
    assert [e.id for e in corpus] == ["ok"]
    assert [r.example_id for r in corpus.report.rejections] == ["far"]


def test_parse_token_mismatch_is_rejected():
    bad = record(id="short")
    bad["context"][0]["ctree"] = "(S (NP (DT the) (NN cat)))"
    corpus = parse_corpus_lines(lines(record(id="ok"), bad))
    assert corpus.report.to_records() == [{"example_id": "short", "reason": "parse/token mismatch"}]


def test_other_rejections():
    backwards = record(id="backwards", answer={"begin": 2, "end": 1})
    two_roots = record(id="two-roots")
    two_roots["context"][0]["dtree"][0] = {"head": -1, "dep": 0, "label": "root"}
    extra = record(id="extra", note="x")
    corpus = parse_corpus_lines(lines(record(id="ok"), backwards, two_roots, extra, record(id="ok")) + ["{nope"])
    reasons = {r.example_id: r.reason for r in corpus.report.rejections}
    assert len(corpus) == 1
    assert set(reasons) == {"backwards", "two-roots", "extra", "ok", "line 6"}
    assert reasons["ok"] == "duplicate id"
    assert reasons["extra"].startswith("schema:")


def test_no_valid_examples():
    with pytest.raises(DataError):
        parse_corpus_lines(lines(record(answer={"begin": 0, "end": 9})))


def test_unreadable_corpus(tmp_path):
    with pytest.raises(DataError, match="cannot read corpus"):
        load_corpus(str(tmp_path / "missing.jsonl"))


def test_save_load_round_trip(tmp_path, toy_corpus):
    path = tmp_path / "toy.jsonl"
    save_corpus(toy_corpus, str(path))
    again = load_corpus(str(path))
    assert [e.to_record() for e in again] == [e.to_record() for e in toy_corpus]
    second = tmp_path / "again.jsonl"
    save_corpus(again, str(second))
    assert second.read_bytes() == path.read_bytes()


def test_example_helpers(tiny_example):
    assert tiny_example.answer_text == "the cat"
    assert tiny_example.sentence_offsets == [0]
    assert tiny_example.locate(2) == (0, 2)
    assert tiny_example.context[0].text == "the cat sleeps"


def test_multi_sentence_offsets():
    document = record()
    document["context"] = document["context"] * 2
    document["answer"] = {"begin": 3, "end": 4}
    example = QaExample.from_record(ExampleRecord.model_validate(document))
    assert example.sentence_offsets == [0, 3]
    assert example.locate(4) == (1, 1)
    assert example.answer_text == "the cat"


def test_vocabularies(tiny_example):
    vocabs = build_vocabularies(Corpus([tiny_example]))
    assert "sleeps" in vocabs.word and "who" in vocabs.word
    assert "c" in vocabs.char
    assert "NP" in vocabs.const and "SQ" in vocabs.const and "DT" not in vocabs.const
    assert "nsubj" in vocabs.dep
    assert "WP" in vocabs.pos
    again = Vocabs.from_dict(json.loads(json.dumps(vocabs.to_dict())))
    assert again.to_dict() == vocabs.to_dict()


# ============================================================================
# ANNOTATION
# ============================================================================

def test_annotate_pos(toy_corpus):
    vocabs = build_vocabularies(toy_corpus)
    for example in toy_corpus:
        annotation = annotate(example, ExtractionConfig(window=1), SynMode.POS, vocabs)
        assert all(len(seq) == 1 and seq.kind == SequenceKind.POS for seq in annotation.context)
        assert len(annotation.question) == len(example.question.tokens)


def test_annotate_sect_window(toy_corpus):
    vocabs = build_vocabularies(toy_corpus)
    for example in toy_corpus:
        annotation = annotate(example, ExtractionConfig(window=10), SynMode.SECT, vocabs)
        assert len(annotation.context) == len(example.context_tokens)
        assert all(len(seq) <= 10 for seq in annotation.context + annotation.question)


def test_annotate_sedt_seven_dependents():
    tokens = [{"text": w, "pos": "NN"} for w in ["a", "b", "c", "h", "d", "e", "f", "g"]]
    ctree = "(S " + " ".join(f"(NN {t['text']})" for t in tokens) + ")"
    dtree = [{"head": 3, "dep": i, "label": "dep"} for i in range(8) if i != 3] + [{"head": -1, "dep": 3, "label": "root"}]
    sentence = {"tokens": tokens, "ctree": ctree, "dtree": dtree}
    example = QaExample.from_record(ExampleRecord.model_validate(
        {"id": "seven", "context": [sentence], "question": sentence, "answer": {"begin": 0, "end": 0}}))

    vocabs = build_vocabularies(Corpus([example]))
    annotation = annotate(example, ExtractionConfig(window=2), SynMode.SEDT, vocabs)
    hub = annotation.context[3]
    assert [vocabs.word.label_of(w) for w in hub.word_ids] == ["c", "d"]


def test_annotate_none_and_cache(tiny_example):
    vocabs = build_vocabularies(Corpus([tiny_example]))
    none = annotate(tiny_example, ExtractionConfig(), SynMode.NONE, vocabs)
    assert none.context == (None, None, None)
    first = annotate(tiny_example, ExtractionConfig(), SynMode.SECT, vocabs)
    assert annotate(tiny_example, ExtractionConfig(), SynMode.SECT, vocabs) is first
    assert annotate(tiny_example, ExtractionConfig(window=1), SynMode.SECT, vocabs) is not first
