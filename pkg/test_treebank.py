import pytest

from conftest import UMC_CONLLU, UNIT
from sest_errors import ArgumentError, ParseError, StructuralError
from treebank import (
    ROOT,
    constituent_spans,
    dependents_of,
    parse_conllu,
    parse_constituency,
    parse_constituency_many,
    path_to_root,
    serialize_constituency,
    span_label,
)

DOG = "(S (NP (DT the) (NN dog)) (VP (VBZ runs)))"


def conllu(*rows):
    return "\n".join("\t".join(row) for row in rows) + "\n"


# ============================================================================
# CONSTITUENCY
# ============================================================================

def test_parse_constituency_leaves_and_root():
    tree = parse_constituency(DOG)
    assert [t.text for t in tree.leaves] == ["the", "dog", "runs"]
    assert [t.pos for t in tree.leaves] == ["DT", "NN", "VBZ"]
    assert tree.root.label == "S"


def test_single_leaf_tree():
    tree = parse_constituency("(X (Y a))")
    assert len(tree) == 1
    assert tree.leaves[0].text == "a"
    assert tree.leaves[0].pos == "Y"
    assert tree.root.label == "X"


def test_unbalanced_bracketing_reports_offset():
    with pytest.raises(ParseError) as info:
        parse_constituency("(S (NP (DT the)")
    assert info.value.offset is not None
    assert "byte offset" in str(info.value)


def test_extra_closing_paren():
    with pytest.raises(ParseError):
        parse_constituency("(X (Y a)))")


def test_empty_input():
    with pytest.raises(ParseError):
        parse_constituency("   ")


def test_leaf_without_preterminal():
    with pytest.raises(ParseError):
        parse_constituency("(NP the (NN dog))")


def test_ptb_wrapper_bracket():
    tree = parse_constituency("( (S (NP (NN it)) (VP (VBZ works))))")
    assert tree.root.label == "S"
    assert [t.text for t in tree.leaves] == ["it", "works"]


def test_serialize_round_trip(coordinator_tree):
    text = serialize_constituency(coordinator_tree)
    again = parse_constituency(text)
    assert again == coordinator_tree
    assert serialize_constituency(again) == text


def test_parse_many():
    trees = parse_constituency_many(DOG + "\n(X (Y a))\n")
    assert [len(t) for t in trees] == [3, 1]
    assert parse_constituency_many("") == []


def test_path_to_root_coordinator(coordinator_tree):
    coordinator = [t.text for t in coordinator_tree.leaves].index("coordinator")
    assert path_to_root(coordinator_tree, coordinator) == ["NP", "PP", "VP", "S"]


def test_path_to_root_small_trees():
    assert path_to_root(parse_constituency("(X (Y a))"), 0) == ["X"]
    assert path_to_root(parse_constituency(DOG), 1) == ["NP", "S"]


def test_path_to_root_out_of_range():
    with pytest.raises(ArgumentError):
        path_to_root(parse_constituency(DOG), 3)
    with pytest.raises(ArgumentError):
        path_to_root(parse_constituency(DOG), -1)


def test_path_length_is_ancestors_minus_preterminal(coordinator_tree):
    for token in coordinator_tree.leaves:
        assert len(path_to_root(coordinator_tree, token.index)) == len(coordinator_tree.ancestors[token.index]) - 1


def test_constituent_spans_and_labels(coordinator_tree):
    spans = constituent_spans(coordinator_tree)
    assert spans[0] == ("S", 0, 8)
    assert ("NP", 0, 3) in spans
    assert ("PP", 5, 8) in spans
    assert span_label(coordinator_tree, 0, 3) == "NP"
    assert span_label(coordinator_tree, 6, 8) == "NP"
    assert span_label(coordinator_tree, 4, 8) == "VP"
    assert span_label(coordinator_tree, 1, 2) is None
    # preterminals are constituents too
    assert span_label(coordinator_tree, 8, 8) == "NN"


# ============================================================================
# DEPENDENCY
# ============================================================================

def test_parse_conllu_column_mapping():
    trees = parse_conllu(conllu(
        ["1", "dog", "dog", "NOUN", "NN", "_", "2", "nsubj", "_", "_"],
        ["2", "runs", "run", "VERB", "VBZ", "_", "0", "root", "_", "_"],
    ))
    assert len(trees) == 1
    tree = trees[0]
    assert tree.root_index == 1
    assert tree.arcs[0].head == 1 and tree.arcs[0].dependent == 0 and tree.arcs[0].label == "nsubj"
    assert tree.arcs[1].head == ROOT
    assert [t.pos for t in tree.tokens] == ["NN", "VBZ"]


def test_parse_conllu_empty_document():
    assert parse_conllu("") == []


def test_parse_conllu_cycle():
    with pytest.raises(StructuralError):
        parse_conllu(conllu(
            ["1", "a", "a", "X", "X", "_", "2", "dep", "_", "_"],
            ["2", "b", "b", "X", "X", "_", "1", "dep", "_", "_"],
        ))


def test_parse_conllu_missing_deprel_has_line():
    with pytest.raises(ParseError) as info:
        parse_conllu("# sent_id = 1\n" + conllu(["1", "a", "a", "X", "X", "_", "0", "_", "_", "_"]))
    assert info.value.line == 2


def test_parse_conllu_skips_ranges_and_empty_nodes():
    trees = parse_conllu(conllu(
        ["1-2", "don't", "_", "_", "_", "_", "_", "_", "_", "_"],
        ["1", "do", "do", "AUX", "VBP", "_", "3", "aux", "_", "_"],
        ["2", "n't", "not", "PART", "RB", "_", "3", "advmod", "_", "_"],
        ["2.1", "x", "x", "X", "X", "_", "_", "_", "_", "_"],
        ["3", "go", "go", "VERB", "VB", "_", "0", "root", "_", "_"],
    ))
    assert [t.text for t in trees[0].tokens] == ["do", "n't", "go"]


def test_parse_conllu_sentence_count_and_sizes():
    text = UMC_CONLLU + "\n" + conllu(["1", "Hi", "hi", "INTJ", "UH", "_", "0", "root", "_", "_"])
    trees = parse_conllu(text)
    assert [len(t) for t in trees] == [12, 1]


def test_dependents_of_unit(umc_tree):
    texts = [umc_tree.tokens[i].text for i, _ in dependents_of(umc_tree, UNIT)]
    assert texts == ["Conference", "is", "the", "basic", "organization"]


def test_dependents_of_leaf_and_chain(umc_tree):
    assert dependents_of(umc_tree, 0) == []
    chain = parse_conllu(conllu(
        ["1", "a", "a", "X", "X", "_", "0", "root", "_", "_"],
        ["2", "b", "b", "X", "X", "_", "1", "dep", "_", "_"],
        ["3", "c", "c", "X", "X", "_", "2", "obj", "_", "_"],
    ))[0]
    assert dependents_of(chain, 1) == [(2, "obj")]


def test_dependents_strictly_increasing(umc_tree):
    for token in umc_tree.tokens:
        indices = [i for i, _ in dependents_of(umc_tree, token.index)]
        assert indices == sorted(set(indices))


def test_dependents_of_out_of_range(umc_tree):
    with pytest.raises(ArgumentError):
        dependents_of(umc_tree, 12)
