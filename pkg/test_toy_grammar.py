import pytest
from pydantic import ValidationError

from corpus_data import save_corpus
from sest_config import ToyGrammarConfig
from toy_grammar.generator import NounPhrase, gen_toy_corpus, syntax_oracle
from toy_grammar.lexicon_data import lexicon
from treebank import constituent_spans


def test_same_seed_same_corpus(tmp_path):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_corpus(gen_toy_corpus(ToyGrammarConfig(n_examples=1, seed=7)), str(first))
    save_corpus(gen_toy_corpus(ToyGrammarConfig(n_examples=1, seed=7)), str(second))
    assert first.read_bytes() == second.read_bytes()


def test_different_seeds_differ():
    a = gen_toy_corpus(ToyGrammarConfig(n_examples=5, seed=1))
    b = gen_toy_corpus(ToyGrammarConfig(n_examples=5, seed=2))
    assert [e.to_record() for e in a] != [e.to_record() for e in b]


@pytest.mark.parametrize("distractors, extra", [(0, 0), (1, 0), (2, 0), (1, 2), (2, 3)])
def test_answers_are_np_constituents(distractors, extra):
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=25, seed=5, distractors=distractors, extra_sentences=extra))
    assert len(corpus) == 25
    for example in corpus:
        first, begin = example.locate(example.answer[0])
        last, end = example.locate(example.answer[1])
        assert first == last
        assert ("NP", begin, end) in constituent_spans(example.context[first].ctree)
        assert example.answer_text.startswith("the ")


@pytest.mark.parametrize("distractors, extra", [(0, 0), (1, 1), (2, 2)])
def test_syntax_oracle_finds_every_answer(distractors, extra):
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=40, seed=11, distractors=distractors, extra_sentences=extra))
    for example in corpus:
        assert syntax_oracle(example) == example.answer


def test_dependency_trees_are_valid(toy_corpus):
    for example in toy_corpus:
        for sentence in list(example.context) + [example.question]:
            assert sentence.dtree.root_index is not None
            assert len(sentence.dtree.arcs) == len(sentence.tokens)


def test_question_shapes(toy_corpus):
    for example in toy_corpus:
        words = [t.text for t in example.question.tokens]
        assert words[0] in ("who", "what")
        assert words[-1] == "?"
        if words[0] == "what":
            assert words[1] == "does"


def test_prepositions_per_sentence():
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=20, seed=4, distractors=2, modifiers=3))
    for example in corpus:
        sentence = example.context[0]
        assert sum(1 for t in sentence.tokens if t.pos == "IN") == 5
        words = [t.text for t in sentence.tokens]
        assert words.count("the") >= 7


def test_attachment_sites_vary():
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=80, seed=6, distractors=1, modifiers=2))
    fronted = answer_with_pp = pp_after_answer = 0
    for example in corpus:
        tags = [t.pos for t in example.context[0].tokens]
        begin, end = example.answer
        fronted += tags[0] == "IN"
        answer_with_pp += "IN" in tags[begin:end + 1]
        pp_after_answer += tags[end + 1] == "IN"
    assert fronted > 0
    assert answer_with_pp > 0
    assert pp_after_answer > 0


def positional_guess(example):
    """Subject before the verb from the start, object after it up to the first preposition."""
    tags = [t.pos for t in example.context[0].tokens]
    verb = tags.index("VBZ")
    if example.question.tokens[0].text == "who":
        return 0, verb - 1
    end = verb + 1
    while tags[end + 1] not in ("IN", "."):
        end += 1
    return verb + 1, end


def test_positions_do_not_locate_answer():
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=100, seed=13))
    hits = sum(positional_guess(example) == example.answer for example in corpus)
    assert hits < 70
    assert all(syntax_oracle(example) == example.answer for example in corpus)


def test_intensified_adjectives_form_adjp():
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=40, seed=8, n_adjectives=12))
    seen = 0
    for example in corpus:
        for sentence in list(example.context) + [example.question]:
            spans = constituent_spans(sentence.ctree)
            for token in sentence.tokens:
                if token.pos == "RB":
                    seen += 1
                    assert ("ADJP", token.index, token.index + 1) in spans
    assert seen > 0


def test_extra_sentences_use_distinct_verbs():
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=10, seed=9, n_verbs=4, extra_sentences=3))
    for example in corpus:
        verbs = [t.text for s in example.context for t in s.tokens if t.pos == "VBZ"]
        assert len(verbs) == 4 == len(set(verbs))


def test_ids_are_sequential():
    corpus = gen_toy_corpus(ToyGrammarConfig(n_examples=3, seed=2))
    assert [e.id for e in corpus] == ["toy-2-00000", "toy-2-00001", "toy-2-00002"]


def test_config_bounds():
    with pytest.raises(ValidationError):
        ToyGrammarConfig(n_verbs=2, extra_sentences=2)
    with pytest.raises(ValidationError):
        ToyGrammarConfig(distractors=3)
    with pytest.raises(ValidationError):
        ToyGrammarConfig(modifiers=5)
    with pytest.raises(ValidationError):
        ToyGrammarConfig(n_nouns=len(lexicon["nouns"]) + 1)


def test_noun_phrase_text():
    assert NounPhrase("bridge").text == "the bridge"
    assert NounPhrase("bridge", "old", "and", "tower").text == "the old bridge and tower"
    assert NounPhrase("bridge", "old", intensifier="very").text == "the very old bridge"
