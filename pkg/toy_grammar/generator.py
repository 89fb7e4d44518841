"""
Corpus sintético de QA cuyas respuestas solo se ubican con la sintaxis.

Each example has one answer-bearing sentence

  (S PP* NP_subj (VP (VBZ v) NP_obj PP*) (. .))

where every prepositional phrase lands on a random site: fronted before the
subject, attached inside the subject NP, attached inside the object NP, or
attached to the verb. An argument with attached PPs is bracketed as
(NP (NP the ...) (PP ...)+), so the answer extends over them. Base NPs are
"the [[RB] JJ] NN [CC NN]", with the intensified adjective under an ADJP.

The question asks about the verb:

  who  VBZ <object base NP> ?      -> answer: the whole subject NP
  what does <subject base NP> VB ? -> answer: the whole object NP

"V NP IN NP" reads the same whether the PP belongs to the object or to the
verb, and fronted PPs move the subject, so neither token positions nor
part-of-speech patterns locate the answer; only the constituency tree does.
Distractor PPs reuse the argument nouns, so word overlap with the question
never identifies the answer either. The generator writes both parses itself;
nothing here calls a parser.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from corpus_data import Corpus, ExampleRecord, QaExample, ValidationReport
from sest_config import ToyGrammarConfig
from toy_grammar.lexicon_data import lexicon
from treebank import ROOT, constituent_spans

# sitios de adjunción de un PP
FRONTED, SUBJECT, OBJECT, VERB = "fronted", "subject", "object", "verb"
SITES = (FRONTED, SUBJECT, OBJECT, VERB)

ADJECTIVE_RATE = 0.5
INTENSIFIER_RATE = 0.3
COORDINATION_RATE = 0.25


@dataclass(frozen=True)
class NounPhrase:
    noun: str
    adjective: Optional[str] = None
    conjunction: Optional[str] = None
    second_noun: Optional[str] = None
    intensifier: Optional[str] = None

    @property
    def text(self) -> str:
        words = ["the"]
        if self.adjective:
            words += ([self.intensifier] if self.intensifier else []) + [self.adjective]
        words.append(self.noun)
        if self.second_noun:
            words += [self.conjunction, self.second_noun]
        return " ".join(words)


@dataclass(frozen=True)
class PrepPhrase:
    preposition: str
    phrase: NounPhrase


@dataclass
class _Draft:
    tokens: List[dict] = field(default_factory=list)
    arcs: Dict[int, Tuple[int, str]] = field(default_factory=dict)

    def add(self, text: str, pos: str) -> int:
        self.tokens.append({"text": text, "pos": pos})
        return len(self.tokens) - 1

    def record(self, ctree: str) -> dict:
        return {
            "tokens": self.tokens,
            "ctree": ctree,
            "dtree": [{"head": head, "dep": dep, "label": label} for dep, (head, label) in sorted(self.arcs.items())],
        }


def _write_np(draft: _Draft, phrase: NounPhrase) -> Tuple[str, int]:
    """Bracketing and head index of a base noun phrase appended to draft."""
    det = draft.add("the", "DT")
    parts = ["(DT the)"]
    modifiers: List[Tuple[int, str]] = []
    if phrase.adjective:
        if phrase.intensifier:
            adverb = draft.add(phrase.intensifier, "RB")
            adjective = draft.add(phrase.adjective, "JJ")
            parts.append(f"(ADJP (RB {phrase.intensifier}) (JJ {phrase.adjective}))")
            draft.arcs[adverb] = (adjective, "advmod")
        else:
            adjective = draft.add(phrase.adjective, "JJ")
            parts.append(f"(JJ {phrase.adjective})")
        modifiers.append((adjective, "amod"))
    head = draft.add(phrase.noun, "NN")
    parts.append(f"(NN {phrase.noun})")
    draft.arcs[det] = (head, "det")
    for index, label in modifiers:
        draft.arcs[index] = (head, label)
    if phrase.second_noun:
        cc = draft.add(phrase.conjunction, "CC")
        other = draft.add(phrase.second_noun, "NN")
        parts += [f"(CC {phrase.conjunction})", f"(NN {phrase.second_noun})"]
        draft.arcs[cc] = (other, "cc")
        draft.arcs[other] = (head, "conj")
    return "(NP " + " ".join(parts) + ")", head


def _write_pp(draft: _Draft, pp: PrepPhrase) -> Tuple[str, int]:
    """Bracketing of a PP and the head of its NP, which the caller attaches."""
    p = draft.add(pp.preposition, "IN")
    np_tree, np_head = _write_np(draft, pp.phrase)
    draft.arcs[p] = (np_head, "case")
    return f"(PP (IN {pp.preposition}) {np_tree})", np_head


def _write_argument(draft: _Draft, phrase: NounPhrase, pps: Sequence[PrepPhrase]) -> Tuple[str, int, int, int]:
    """Bracketing, head and inclusive span of an argument NP with its attached PPs."""
    begin = len(draft.tokens)
    base, head = _write_np(draft, phrase)
    if not pps:
        return base, head, begin, len(draft.tokens) - 1
    children = [base]
    for pp in pps:
        pp_tree, np_head = _write_pp(draft, pp)
        draft.arcs[np_head] = (head, "nmod")
        children.append(pp_tree)
    return "(NP " + " ".join(children) + ")", head, begin, len(draft.tokens) - 1


def _context_sentence(verb: dict, subject: NounPhrase, obj: NounPhrase,
                      sites: Dict[str, List[PrepPhrase]]) -> Tuple[dict, Tuple[int, int], Tuple[int, int]]:
    draft = _Draft()
    fronted = [_write_pp(draft, pp) for pp in sites[FRONTED]]
    subject_tree, subject_head, subject_begin, subject_end = _write_argument(draft, subject, sites[SUBJECT])
    v = draft.add(verb["present"], "VBZ")
    object_tree, object_head, object_begin, object_end = _write_argument(draft, obj, sites[OBJECT])
    vp_children = [f"(VBZ {verb['present']})", object_tree]
    obliques = [np_head for _, np_head in fronted]
    for pp in sites[VERB]:
        pp_tree, np_head = _write_pp(draft, pp)
        vp_children.append(pp_tree)
        obliques.append(np_head)
    dot = draft.add(".", ".")
    for np_head in obliques:
        draft.arcs[np_head] = (v, "obl")
    draft.arcs[subject_head] = (v, "nsubj")
    draft.arcs[object_head] = (v, "obj")
    draft.arcs[v] = (ROOT, "root")
    draft.arcs[dot] = (v, "punct")
    children = [tree for tree, _ in fronted] + [subject_tree, f"(VP {' '.join(vp_children)})", "(. .)"]
    return draft.record("(S " + " ".join(children) + ")"), (subject_begin, subject_end), (object_begin, object_end)


def _subject_question(verb: dict, phrase: NounPhrase) -> dict:
    draft = _Draft()
    who = draft.add("who", "WP")
    v = draft.add(verb["present"], "VBZ")
    np_tree, np_head = _write_np(draft, phrase)
    mark = draft.add("?", ".")
    draft.arcs.update({who: (v, "nsubj"), v: (ROOT, "root"), np_head: (v, "obj"), mark: (v, "punct")})
    return draft.record(f"(SBARQ (WHNP (WP who)) (SQ (VP (VBZ {verb['present']}) {np_tree})) (. ?))")


def _object_question(verb: dict, phrase: NounPhrase) -> dict:
    draft = _Draft()
    what = draft.add("what", "WP")
    does = draft.add("does", "VBZ")
    np_tree, np_head = _write_np(draft, phrase)
    v = draft.add(verb["base"], "VB")
    mark = draft.add("?", ".")
    draft.arcs.update({what: (v, "obj"), does: (v, "aux"), np_head: (v, "nsubj"), v: (ROOT, "root"),
                       mark: (v, "punct")})
    return draft.record(f"(SBARQ (WHNP (WP what)) (SQ (VBZ does) {np_tree} (VP (VB {verb['base']}))) (. ?))")


class ToyGrammar:
    """Lexicon subset and sampling rules for one generator configuration."""

    def __init__(self, cfg: ToyGrammarConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.nouns = self._subset(lexicon["nouns"], cfg.n_nouns)
        self.verbs = self._subset(lexicon["verbs"], cfg.n_verbs)
        self.adjectives = self._subset(lexicon["adjectives"], cfg.n_adjectives)

    def _subset(self, items: list, n: int) -> list:
        if n == 0:
            return []
        chosen = sorted(self.rng.choice(len(items), size=n, replace=False))
        return [items[i] for i in chosen]

    def _pick(self, items: Sequence, exclude: Sequence = ()):
        pool = [item for item in items if item not in exclude]
        return pool[int(self.rng.integers(len(pool)))]

    def _adjective(self) -> Tuple[Optional[str], Optional[str]]:
        if not self.adjectives or self.rng.random() >= ADJECTIVE_RATE:
            return None, None
        intensifier = self._pick(lexicon["intensifiers"]) if self.rng.random() < INTENSIFIER_RATE else None
        return self._pick(self.adjectives), intensifier

    def noun_phrase(self, exclude: Sequence[str]) -> NounPhrase:
        noun = self._pick(self.nouns, exclude)
        adjective, intensifier = self._adjective()
        conjunction = second = None
        if self.rng.random() < COORDINATION_RATE:
            conjunction = self._pick(lexicon["conjunctions"])
            second = self._pick(self.nouns, list(exclude) + [noun])
        return NounPhrase(noun, adjective, conjunction, second, intensifier)

    def unlike(self, phrase: NounPhrase, exclude: Sequence[str]) -> NounPhrase:
        """phrase, made textually different from the bare 'the NN' distractor."""
        if phrase.adjective or phrase.second_noun:
            return phrase
        if self.adjectives:
            return NounPhrase(phrase.noun, self._pick(self.adjectives))
        return NounPhrase(phrase.noun, None, self._pick(lexicon["conjunctions"]),
                          self._pick(self.nouns, list(exclude) + [phrase.noun]))

    def modifier(self, taken: Sequence[str]) -> NounPhrase:
        """Noun phrase with a noun outside taken whenever the lexicon subset allows it."""
        exclude = taken if len(set(self.nouns) - set(taken)) > 0 else ()
        adjective, intensifier = self._adjective()
        return NounPhrase(self._pick(self.nouns, exclude), adjective, intensifier=intensifier)

    def sentence(self, verb: dict) -> Tuple[dict, Tuple[int, int], Tuple[int, int], NounPhrase, NounPhrase]:
        subject = self.noun_phrase(())
        obj = self.noun_phrase([subject.noun, subject.second_noun])
        pps: List[PrepPhrase] = []
        if self.cfg.distractors >= 1:
            subject = self.unlike(subject, [obj.noun, obj.second_noun])
            pps.append(PrepPhrase(self._pick(lexicon["prepositions"]), NounPhrase(subject.noun)))
        if self.cfg.distractors >= 2:
            obj = self.unlike(obj, [subject.noun, subject.second_noun])
            pps.append(PrepPhrase(self._pick(lexicon["prepositions"]), NounPhrase(obj.noun)))
        taken = [n for n in (subject.noun, subject.second_noun, obj.noun, obj.second_noun) if n]
        for _ in range(self.cfg.modifiers):
            pps.append(PrepPhrase(self._pick(lexicon["prepositions"]), self.modifier(taken)))

        sites: Dict[str, List[PrepPhrase]] = {site: [] for site in SITES}
        for pp in pps:
            sites[SITES[int(self.rng.integers(len(SITES)))]].append(pp)
        record, subject_span, object_span = _context_sentence(verb, subject, obj, sites)
        return record, subject_span, object_span, subject, obj

    def example(self, index: int) -> dict:
        order = self.rng.permutation(len(self.verbs))[: 1 + self.cfg.extra_sentences]
        verbs = [self.verbs[i] for i in order]
        answer_slot = int(self.rng.integers(len(verbs)))
        ask_subject = bool(self.rng.random() < 0.5)

        context, offset, answer, question = [], 0, None, None
        for slot, verb in enumerate(verbs):
            record, subject_span, object_span, subject, obj = self.sentence(verb)
            if slot == answer_slot:
                span = subject_span if ask_subject else object_span
                answer = {"begin": offset + span[0], "end": offset + span[1]}
                question = _subject_question(verb, obj) if ask_subject else _object_question(verb, subject)
            context.append(record)
            offset += len(record["tokens"])
        return {"id": f"toy-{self.cfg.seed}-{index:05d}", "context": context, "question": question, "answer": answer}


def gen_toy_corpus(cfg: ToyGrammarConfig) -> Corpus:
    grammar = ToyGrammar(cfg)
    examples = [QaExample.from_record(ExampleRecord.model_validate(grammar.example(i))) for i in range(cfg.n_examples)]
    logging.info(f"[TOY] generated {len(examples)} examples (seed {cfg.seed}, distractors {cfg.distractors}, "
                 f"modifiers {cfg.modifiers})")
    return Corpus(examples, ValidationReport(accepted=len(examples)))


def syntax_oracle(example: QaExample) -> Tuple[int, int]:
    """
    Answers from the parses alone: the role the wh-word fills in the question
    picks the largest NP around the filler of that role for the same verb in
    the context.
    """
    question = example.question
    root = question.dtree.root_index
    wh = next(t.index for t in question.tokens if t.pos == "WP")
    role = next(a.label for a in question.dtree.arcs if a.dependent == wh)
    verb = question.tokens[root].text
    verb_forms = {v["base"]: v["present"] for v in lexicon["verbs"]}
    present = verb_forms.get(verb, verb)

    for offset, sentence in zip(example.sentence_offsets, example.context):
        head = sentence.dtree.root_index
        if sentence.tokens[head].text != present:
            continue
        filler = next(a.dependent for a in sentence.dtree.arcs if a.head == head and a.label == role)
        covering = [(end - begin, begin, end) for label, begin, end in constituent_spans(sentence.ctree)
                    if label == "NP" and begin <= filler <= end]
        _, begin, end = max(covering)
        return offset + begin, offset + end
    raise LookupError(f"{example.id}: no context sentence for verb {verb!r}")
