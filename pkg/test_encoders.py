import numpy as np
import pytest

from autodiff import ParamStore, Tensor, constant, grad_check, mul, sum_all
from conftest import UNIT
from encoders import (
    BiLstmEncoder,
    CharCnnEmbedder,
    CnnEncoder,
    EmbeddingTable,
    NodeVectors,
    bilstm_encode,
    bilstm_sequence,
    cnn_encode,
    embed_word,
    encode_syntactic,
    load_glove,
    syntactic_output_dim,
)
from extraction import LabelVocab, SequenceKind, SyntacticSequence, build_vocab, extract_sedt
from sest_config import ExtractionConfig, SynEncoder
from sest_errors import DataError, ShapeError
from treebank import Token


def zero_all(store):
    for _, tensor in store.items():
        tensor.data = np.zeros_like(tensor.data)


def vectors(rows):
    return [constant(row) for row in rows]


# ============================================================================
# LSTM
# ============================================================================

def test_bilstm_zero_params_give_zero_output():
    store = ParamStore(0)
    enc = BiLstmEncoder.create(store, "enc", 3, 4)
    zero_all(store)
    out = bilstm_encode(enc, vectors(np.random.default_rng(0).normal(size=(5, 3))))
    np.testing.assert_array_equal(out.data, np.zeros(8))


def test_bilstm_empty_sequence():
    enc = BiLstmEncoder.create(ParamStore(0), "enc", 3, 4)
    np.testing.assert_array_equal(bilstm_encode(enc, []).data, np.zeros(8))


def test_bilstm_single_step_by_hand():
    store = ParamStore(0)
    enc = BiLstmEncoder.create(store, "enc", 1, 1)
    zero_all(store)
    for cell in (enc.forward, enc.backward):
        cell.w_g.data = np.array([[2.0, 0.0]])
    x = 0.5
    c = 0.5 * np.tanh(2.0 * x)
    h = 0.5 * np.tanh(c)
    np.testing.assert_allclose(bilstm_encode(enc, vectors([[x]])).data, [h, h])


def test_forget_bias_starts_at_one():
    store = ParamStore(0)
    enc = BiLstmEncoder.create(store, "enc", 2, 3)
    np.testing.assert_array_equal(enc.forward.b_f.data, np.ones(3))
    np.testing.assert_array_equal(enc.backward.b_i.data, np.zeros(3))


def test_bilstm_wrong_input_dim():
    enc = BiLstmEncoder.create(ParamStore(0), "enc", 3, 2)
    with pytest.raises(ShapeError):
        bilstm_encode(enc, vectors([[1.0, 2.0]]))


def test_bilstm_final_states_match_sequence_ends():
    enc = BiLstmEncoder.create(ParamStore(1), "enc", 2, 3)
    xs = vectors(np.random.default_rng(1).normal(size=(4, 2)))
    per_position = bilstm_sequence(enc, xs)
    final = bilstm_encode(enc, xs).data
    # [backward at position 0; forward at the last position]
    np.testing.assert_allclose(final[:3], per_position[0].data[3:])
    np.testing.assert_allclose(final[3:], per_position[-1].data[:3])


def test_bilstm_gradients():
    store = ParamStore(2)
    enc = BiLstmEncoder.create(store, "enc", 2, 2)
    xs = vectors(np.random.default_rng(2).normal(size=(3, 2)))

    def objective(_):
        out = bilstm_encode(enc, xs)
        return sum_all(mul(out, out))

    assert grad_check(objective, store, floor=1e-6) < 1e-4


# ============================================================================
# CNN
# ============================================================================

def test_cnn_identity_filter_is_max():
    store = ParamStore(0)
    enc = CnnEncoder.create(store, "cnn", 1, num_filters=1, filter_len=1, activation="identity")
    enc.weight.data = np.array([[1.0]])
    np.testing.assert_array_equal(cnn_encode(enc, vectors([[2.0], [5.0], [3.0]])).data, [5.0])


def test_cnn_relu_zero_inputs():
    store = ParamStore(0)
    enc = CnnEncoder.create(store, "cnn", 4, num_filters=6, filter_len=3)
    out = cnn_encode(enc, vectors(np.zeros((5, 4))))
    np.testing.assert_array_equal(out.data, np.zeros(6))


def test_cnn_short_sequence_is_padded():
    store = ParamStore(3)
    enc = CnnEncoder.create(store, "cnn", 2, num_filters=4, filter_len=3, activation="tanh")
    out = cnn_encode(enc, vectors([[0.3, -0.2]]))
    assert out.shape == (4,)
    assert np.isfinite(out.data).all()


def test_cnn_wrong_input_dim():
    enc = CnnEncoder.create(ParamStore(0), "cnn", 2, 3, 2)
    with pytest.raises(ShapeError):
        cnn_encode(enc, vectors([[1.0, 2.0, 3.0]]))


def test_cnn_gradients():
    store = ParamStore(4)
    enc = CnnEncoder.create(store, "cnn", 2, num_filters=3, filter_len=2, activation="tanh")
    xs = vectors(np.random.default_rng(4).normal(size=(4, 2)))
    assert grad_check(lambda _: sum_all(cnn_encode(enc, xs)), store, floor=1e-6) < 1e-4


# ============================================================================
# STRUCTURAL EMBEDDINGS
# ============================================================================

def sect(*label_ids):
    return SyntacticSequence(SequenceKind.SECT, tuple((i, None) for i in label_ids))


def test_sect_lstm_output_dim():
    store = ParamStore(0)
    enc = BiLstmEncoder.create(store, "syn", 8, 30)
    nodes = NodeVectors(5, 8, master_seed=1)
    out = encode_syntactic(sect(1, 2, 3), SynEncoder.LSTM, enc, nodes)
    assert out.shape == (60,)
    assert syntactic_output_dim(SynEncoder.LSTM, 30) == 60
    assert syntactic_output_dim(SynEncoder.CNN, 30) == 30


def test_empty_sequence_embeds_to_zeros():
    enc = CnnEncoder.create(ParamStore(0), "syn", 8, 30, 3)
    out = encode_syntactic(sect(), SynEncoder.CNN, enc, NodeVectors(5, 8, 1))
    np.testing.assert_array_equal(out.data, np.zeros(30))


def test_sedt_input_rows_concatenate_word_and_label(umc_tree):
    words = build_vocab(t.text for t in umc_tree.tokens)
    deps = LabelVocab()
    seq = extract_sedt(umc_tree, UNIT, ExtractionConfig(window=20), deps, words)
    store = ParamStore(0)
    table = EmbeddingTable.create(store, "word.table", words, 100)
    enc = BiLstmEncoder.create(store, "syn", 108, 30)
    out = encode_syntactic(seq, SynEncoder.LSTM, enc, NodeVectors(len(deps), 8, 1), table)
    assert enc.input_dim == 108
    assert out.shape == (60,)


def test_encoder_dim_mismatch():
    enc = BiLstmEncoder.create(ParamStore(0), "syn", 9, 2)
    with pytest.raises(ShapeError):
        encode_syntactic(sect(1), SynEncoder.LSTM, enc, NodeVectors(3, 8, 1))


def test_node_vectors_are_constants():
    nodes = NodeVectors(4, 8, 7)
    assert len(nodes) == 4
    assert not nodes.vector(2).requires_grad
    np.testing.assert_array_equal(nodes.vector(2).data, NodeVectors(4, 8, 7).vector(2).data)


# ============================================================================
# WORD REPRESENTATION
# ============================================================================

@pytest.fixture
def embedders():
    store = ParamStore(0)
    words = build_vocab(["architect", "engineer"])
    chars = build_vocab("architectengineer")
    table = EmbeddingTable.create(store, "word.table", words, 100)
    char_cnn = CharCnnEmbedder.create(store, chars, char_dim=8, filters=100, width=5, max_word_chars=16)
    return table, char_cnn


def test_embed_word_dims(embedders):
    table, char_cnn = embedders
    token = Token(0, "architect", "NN")
    assert embed_word(token, table, char_cnn, None).shape == (200,)
    assert embed_word(token, table, char_cnn, constant(np.ones(60))).shape == (260,)
    assert embed_word(token, None, None, constant(np.ones(60))).shape == (60,)


def test_unknown_word_uses_unk_row(embedders):
    table, char_cnn = embedders
    unknown = embed_word(Token(0, "zzqq", "NN"), table, char_cnn, None)
    assert np.isfinite(unknown.data).all()
    np.testing.assert_array_equal(unknown.data[:100], table.matrix.data[0])


def test_long_words_are_truncated(embedders):
    _, char_cnn = embedders
    long_word = "architect" * 3
    np.testing.assert_array_equal(char_cnn.embed(long_word).data, char_cnn.embed(long_word[:16]).data)


def test_load_glove(tmp_path, embedders):
    table, _ = embedders
    path = tmp_path / "glove.txt"
    path.write_text("architect " + " ".join(["0.5"] * 100) + "\nunrelated " + " ".join(["1"] * 100) + "\n",
                    encoding="utf-8")
    assert load_glove(str(path), table) == 1
    np.testing.assert_array_equal(table.lookup("architect").data, np.full(100, 0.5))


def test_load_glove_dimension_mismatch(tmp_path, embedders):
    table, _ = embedders
    path = tmp_path / "glove.txt"
    path.write_text("engineer 0.1 0.2\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_glove(str(path), table)


def test_frozen_table_has_no_gradient():
    store = ParamStore(0)
    table = EmbeddingTable.create(store, "word.table", build_vocab(["a"]), 4, trainable=False)
    assert not table.matrix.requires_grad
    assert [name for name, _ in store.trainable()] == []
    assert isinstance(table.row(1), Tensor)
