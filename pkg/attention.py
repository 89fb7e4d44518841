"""
Bi-directional attention flow between context and question.

Matrices here are row-major by position: H is (T, d), U is (J, d),
S is (T, J), G is (T, 4d) and M is (T, d).
"""

from dataclasses import dataclass
from typing import List, Sequence

from autodiff import (
    ParamStore,
    Tensor,
    add,
    concat,
    matmul,
    max_over_rows,
    mul,
    slice_vec,
    softmax_vec,
    stack,
    take_row,
    transpose,
)
from encoders import BiLstmEncoder, bilstm_sequence
from sest_errors import ArgumentError, ShapeError


@dataclass
class AttentionParams:
    d: int
    w_s: Tensor                     # (3d,)
    modeling: List[BiLstmEncoder]   # 4d -> d, then d -> d

    @classmethod
    def create(cls, store: ParamStore, d: int, modeling_layers: int = 2) -> "AttentionParams":
        if d % 2:
            raise ArgumentError(f"contextual dim must be even, got {d}")
        w_s = store.add("attention.W_S", (3 * d,))
        modeling = []
        for layer in range(modeling_layers):
            input_dim = 4 * d if layer == 0 else d
            modeling.append(BiLstmEncoder.create(store, f"modeling.{layer}", input_dim, d // 2))
        return cls(d, w_s, modeling)


def rows_of(matrix: Tensor) -> List[Tensor]:
    return [take_row(matrix, i) for i in range(matrix.shape[0])]


def _broadcast_cols(matrix: Tensor, column: Tensor) -> Tensor:
    """matrix[t, j] + column[t]."""
    return transpose(add(transpose(matrix), column))


def similarity(H: Tensor, U: Tensor, w_s: Tensor) -> Tensor:
    """S[t, j] = w_s . [h_t; u_j; h_t * u_j]."""
    if H.data.ndim != 2 or U.data.ndim != 2 or H.shape[1] != U.shape[1]:
        raise ShapeError("similarity", H.shape, U.shape)
    d = H.shape[1]
    if w_s.shape != (3 * d,):
        raise ShapeError("similarity weight", w_s.shape, (3 * d,))
    w_h, w_u, w_hu = slice_vec(w_s, 0, d), slice_vec(w_s, d, 2 * d), slice_vec(w_s, 2 * d, 3 * d)
    weighted_h = stack([mul(h, w_hu) for h in rows_of(H)])
    cross = matmul(weighted_h, transpose(U))
    return add(_broadcast_cols(cross, matmul(H, w_h)), matmul(U, w_u))


def context_to_question(S: Tensor, U: Tensor) -> Tensor:
    """Row t is sum_j softmax(S[t])_j u_j."""
    if S.data.ndim != 2 or S.shape[1] == 0 or U.shape[0] == 0:
        raise ArgumentError("context-to-question attention needs at least one question word")
    if S.shape[1] != U.shape[0]:
        raise ShapeError("context_to_question", S.shape, U.shape)
    return stack([matmul(softmax_vec(row), U) for row in rows_of(S)])


def question_to_context(S: Tensor, H: Tensor) -> Tensor:
    """softmax over t of max_j S[t, j], applied to the rows of H."""
    if S.data.ndim != 2 or S.shape[0] == 0 or H.shape[0] == 0:
        raise ArgumentError("question-to-context attention needs at least one context word")
    if S.shape[0] != H.shape[0]:
        raise ShapeError("question_to_context", S.shape, H.shape)
    return matmul(softmax_vec(max_over_rows(S)), H)


def fuse(H: Tensor, H_tilde: Tensor, h_hat: Tensor) -> Tensor:
    """g_t = [h_t; h~_t; h_t * h~_t; h_t * h^]."""
    if H.shape != H_tilde.shape or h_hat.shape != (H.shape[1],):
        raise ShapeError("fuse", H.shape, H_tilde.shape, h_hat.shape)
    tiled = stack([h_hat] * H.shape[0])
    blocks = [H, H_tilde, mul(H, H_tilde), mul(H, tiled)]
    return transpose(concat([transpose(block) for block in blocks]))


def run_stack(layers: Sequence[BiLstmEncoder], xs: List[Tensor]) -> List[Tensor]:
    for layer in layers:
        xs = bilstm_sequence(layer, xs)
    return xs


def model_encode(G: Tensor, params: AttentionParams) -> Tensor:
    """Stacked BiLSTM over the rows of G; one output row per context position."""
    if G.data.ndim != 2 or G.shape[1] != 4 * params.d:
        raise ShapeError("model_encode", G.shape, (4 * params.d,))
    return stack(run_stack(params.modeling, rows_of(G)))
