import pytest

from corpus_data import ExampleRecord, QaExample
from sest_config import ToyGrammarConfig
from sest_model import GRADCHECK_RECORD
from toy_grammar.generator import gen_toy_corpus
from treebank import parse_conllu, parse_constituency

COORDINATOR_TREE = (
    "(S (NP (DT the) (NN architect) (CC or) (NN engineer)) "
    "(VP (VBZ acts) (PP (IN as) (NP (DT the) (NN project) (NN coordinator)))))"
)

# The Annual Conference is the basic unit of organization within the UMC
UMC_CONLLU = "\n".join("\t".join(row) for row in [
    ["1", "The", "the", "DET", "DT", "_", "3", "det", "_", "_"],
    ["2", "Annual", "annual", "ADJ", "JJ", "_", "3", "amod", "_", "_"],
    ["3", "Conference", "conference", "PROPN", "NNP", "_", "7", "nsubj", "_", "_"],
    ["4", "is", "be", "AUX", "VBZ", "_", "7", "cop", "_", "_"],
    ["5", "the", "the", "DET", "DT", "_", "7", "det", "_", "_"],
    ["6", "basic", "basic", "ADJ", "JJ", "_", "7", "amod", "_", "_"],
    ["7", "unit", "unit", "NOUN", "NN", "_", "0", "root", "_", "_"],
    ["8", "of", "of", "ADP", "IN", "_", "9", "case", "_", "_"],
    ["9", "organization", "organization", "NOUN", "NN", "_", "7", "nmod:of", "_", "_"],
    ["10", "within", "within", "ADP", "IN", "_", "12", "case", "_", "_"],
    ["11", "the", "the", "DET", "DT", "_", "12", "det", "_", "_"],
    ["12", "UMC", "UMC", "PROPN", "NNP", "_", "9", "nmod:within", "_", "_"],
]) + "\n"

UNIT = 6


@pytest.fixture
def coordinator_tree():
    return parse_constituency(COORDINATOR_TREE)


@pytest.fixture
def umc_tree():
    return parse_conllu(UMC_CONLLU)[0]


@pytest.fixture
def toy_corpus():
    return gen_toy_corpus(ToyGrammarConfig(n_examples=6, seed=3, n_verbs=4, distractors=1))


@pytest.fixture
def tiny_example():
    return QaExample.from_record(ExampleRecord.model_validate(GRADCHECK_RECORD))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains full-size models for minutes; skip with -m 'not slow'")
