import numpy as np
import pytest

from attention import AttentionParams, context_to_question, fuse, model_encode, question_to_context, similarity
from autodiff import ParamStore, constant, grad_check, mul, sum_all
from sest_errors import ArgumentError, ShapeError

RNG = np.random.default_rng(12)


def matrix(rows, cols):
    return constant(RNG.normal(size=(rows, cols)))


# ============================================================================
# SIMILARITY
# ============================================================================

def test_similarity_zero_weights():
    S = similarity(matrix(4, 3), matrix(2, 3), constant(np.zeros(9)))
    np.testing.assert_array_equal(S.data, np.zeros((4, 2)))


def test_similarity_scalar_case():
    S = similarity(constant([[2.0]]), constant([[3.0]]), constant([1.0, 1.0, 1.0]))
    np.testing.assert_allclose(S.data, [[11.0]])


def test_similarity_matches_definition():
    H, U, w = matrix(5, 3), matrix(4, 3), constant(RNG.normal(size=9))
    S = similarity(H, U, w).data
    for t in range(5):
        for j in range(4):
            h, u = H.data[t], U.data[j]
            assert S[t, j] == pytest.approx(w.data @ np.concatenate([h, u, h * u]))


def test_similarity_question_permutation():
    H, U, w = matrix(3, 2), matrix(3, 2), constant(RNG.normal(size=6))
    swapped = constant(U.data[[2, 1, 0]])
    np.testing.assert_allclose(similarity(H, swapped, w).data, similarity(H, U, w).data[:, [2, 1, 0]])


def test_similarity_dim_mismatch():
    with pytest.raises(ShapeError):
        similarity(matrix(3, 2), matrix(3, 4), constant(np.zeros(6)))


# ============================================================================
# C2Q / Q2C
# ============================================================================

def test_c2q_uniform_row_is_mean():
    U = matrix(3, 4)
    H_tilde = context_to_question(constant(np.zeros((2, 3))), U)
    np.testing.assert_allclose(H_tilde.data, np.tile(U.data.mean(axis=0), (2, 1)))


def test_c2q_saturated_row():
    U = matrix(3, 2)
    S = np.zeros((1, 3))
    S[0, 1] = 1e6
    np.testing.assert_allclose(context_to_question(constant(S), U).data[0], U.data[1], atol=1e-6)


def test_c2q_single_question_word():
    U = matrix(1, 3)
    np.testing.assert_allclose(context_to_question(matrix(4, 1), U).data, np.tile(U.data[0], (4, 1)))


def test_c2q_empty_question():
    with pytest.raises(ArgumentError):
        context_to_question(constant(np.zeros((3, 0))), constant(np.zeros((0, 2))))


def test_q2c_equal_scores_is_mean():
    H = matrix(4, 3)
    np.testing.assert_allclose(question_to_context(constant(np.ones((4, 2))), H).data, H.data.mean(axis=0))


def test_q2c_ignores_question_order():
    S, H = matrix(4, 3), matrix(4, 2)
    permuted = constant(S.data[:, [1, 2, 0]])
    np.testing.assert_allclose(question_to_context(permuted, H).data, question_to_context(S, H).data)


def test_q2c_single_context_word():
    H = matrix(1, 3)
    np.testing.assert_allclose(question_to_context(matrix(1, 5), H).data, H.data[0])


def test_q2c_empty_context():
    with pytest.raises(ArgumentError):
        question_to_context(constant(np.zeros((0, 2))), constant(np.zeros((0, 3))))


# ============================================================================
# FUSION / MODELING
# ============================================================================

def test_fuse_scalar_case():
    G = fuse(constant([[2.0]]), constant([[3.0]]), constant([5.0]))
    np.testing.assert_allclose(G.data, [[2.0, 3.0, 6.0, 10.0]])


def test_fuse_zero_context():
    H_tilde = matrix(3, 2)
    G = fuse(constant(np.zeros((3, 2))), H_tilde, constant([1.0, 1.0]))
    np.testing.assert_array_equal(G.data[:, :2], 0.0)
    np.testing.assert_array_equal(G.data[:, 2:4], H_tilde.data)
    np.testing.assert_array_equal(G.data[:, 4:], 0.0)


@pytest.mark.parametrize("d", [1, 2, 5])
def test_fuse_width(d):
    assert fuse(matrix(3, d), matrix(3, d), constant(np.ones(d))).shape == (3, 4 * d)


def test_fuse_shape_mismatch():
    with pytest.raises(ShapeError):
        fuse(matrix(3, 2), matrix(2, 2), constant(np.ones(2)))


def test_model_encode_zero_params():
    store = ParamStore(0)
    params = AttentionParams.create(store, 4)
    for _, tensor in store.items():
        tensor.data = np.zeros_like(tensor.data)
    M = model_encode(matrix(7, 16), params)
    np.testing.assert_array_equal(M.data, np.zeros((7, 4)))


def test_model_encode_keeps_positions():
    params = AttentionParams.create(ParamStore(1), 6)
    assert model_encode(matrix(7, 24), params).shape == (7, 6)


def test_attention_odd_dim():
    with pytest.raises(ArgumentError):
        AttentionParams.create(ParamStore(0), 3)


def test_attention_flow_gradients():
    store = ParamStore(8)
    params = AttentionParams.create(store, 2)
    H = store.add("H", (3, 2))
    U = store.add("U", (2, 2))

    def objective(_):
        S = similarity(H, U, params.w_s)
        G = fuse(H, context_to_question(S, U), question_to_context(S, H))
        M = model_encode(G, params)
        return sum_all(mul(M, M))

    assert grad_check(objective, store, floor=1e-6) < 1e-4


def test_attention_ignores_question_order_on_random_inputs():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        T, J, d = (int(n) for n in (rng.integers(1, 12), rng.integers(1, 9), rng.integers(1, 6)))
        H, U = constant(rng.normal(size=(T, d))), constant(rng.normal(size=(J, d)))
        w = constant(rng.normal(size=3 * d))
        shuffled = constant(U.data[rng.permutation(J)])
        S, S_shuffled = similarity(H, U, w), similarity(H, shuffled, w)

        np.testing.assert_allclose(context_to_question(S_shuffled, shuffled).data,
                                   context_to_question(S, U).data, rtol=0, atol=1e-12)
        np.testing.assert_allclose(question_to_context(S_shuffled, H).data,
                                   question_to_context(S, H).data, rtol=0, atol=1e-12)
        # attending over ones returns each softmax row's total
        np.testing.assert_allclose(context_to_question(S, constant(np.ones((J, 1)))).data, 1.0, rtol=0, atol=1e-9)
        np.testing.assert_allclose(question_to_context(S, constant(np.ones((T, 1)))).data, 1.0, rtol=0, atol=1e-9)
