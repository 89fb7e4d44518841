"""
Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Every op builds its output Tensor together with a closure that pushes the
incoming gradient back to its inputs. `backward` walks the recorded graph
in reverse topological order. The graph is rebuilt on every forward pass.

Shapes: scalars are (), vectors (n,), matrices (rows, cols).
"""

import logging
import math
import zlib
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from sest_errors import ArgumentError, NumericError, ShapeError, StateError

LOG_CLAMP = 1e-12


def derive_seed(seed: int, *names) -> int:
    """Stable sub-seed for a named purpose (token, vocabulary, parameter)."""
    keys = [int(seed)] + [zlib.crc32(str(name).encode("utf-8")) for name in names]
    return int(np.random.SeedSequence(keys).generate_state(1, dtype=np.uint64)[0])


# ============================================================================
# TENSOR
# ============================================================================

class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, parents: Tuple["Tensor", ...] = (),
                 backward: Optional[Callable[[np.ndarray], None]] = None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=False)


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.array(grad, dtype=np.float64, copy=True)
    else:
        tensor.grad = tensor.grad + grad


def _result(data: np.ndarray, parents: Tuple[Tensor, ...], backward: Callable[[np.ndarray], None], op: str) -> Tensor:
    requires_grad = any(parent.requires_grad for parent in parents)
    return Tensor(data, requires_grad=requires_grad, parents=parents if requires_grad else (),
                  backward=backward if requires_grad else None, op=op)


# ============================================================================
# OPS
# ============================================================================

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may also be a row vector added to every row of matrix a."""
    if a.shape == b.shape:
        def backward(g):
            _accumulate(a, g)
            _accumulate(b, g)
    elif a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        def backward(g):
            _accumulate(a, g)
            _accumulate(b, g.sum(axis=0))
    else:
        raise ShapeError("add", a.shape, b.shape)
    return _result(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("sub", a.shape, b.shape)

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)
    return _result(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product."""
    if a.shape != b.shape:
        raise ShapeError("mul_elementwise", a.shape, b.shape)

    def backward(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)
    return _result(a.data * b.data, (a, b), backward, "mul_elementwise")


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g):
        _accumulate(a, g * factor)
    return _result(a.data * factor, (a,), backward, "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector products over 1-D and 2-D operands (numpy matmul rules)."""
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError("matmul", a.shape, b.shape)
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise ShapeError("matmul", a.shape, b.shape)
    out = a.data @ b.data

    def backward(g):
        if a.data.ndim == 2 and b.data.ndim == 2:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)
        elif a.data.ndim == 2:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        elif b.data.ndim == 2:
            _accumulate(a, b.data @ g)
            _accumulate(b, np.outer(a.data, g))
        else:
            _accumulate(a, g * b.data)
            _accumulate(b, g * a.data)
    return _result(out, (a, b), backward, "matmul")


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenation along rows: vectors end to end, or matrices stacked by rows."""
    if not parts:
        raise ArgumentError("concat needs at least one input")
    ndim = parts[0].data.ndim
    if ndim not in (1, 2) or any(p.data.ndim != ndim for p in parts):
        raise ShapeError("concat_rows", *(p.shape for p in parts))
    if ndim == 2 and any(p.shape[1] != parts[0].shape[1] for p in parts):
        raise ShapeError("concat_rows", *(p.shape for p in parts))
    sizes = [p.shape[0] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for part, start, stop in zip(parts, bounds[:-1], bounds[1:]):
            _accumulate(part, g[start:stop])
    return _result(np.concatenate([p.data for p in parts], axis=0), tuple(parts), backward, "concat_rows")


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Scalars -> vector, or equal-length vectors -> matrix (axis=1 makes them columns)."""
    if not parts:
        raise ArgumentError("stack needs at least one input")
    if any(p.shape != parts[0].shape for p in parts):
        raise ShapeError("stack", *(p.shape for p in parts))
    out = np.stack([p.data for p in parts], axis=axis)

    def backward(g):
        for i, part in enumerate(parts):
            _accumulate(part, np.take(g, i, axis=axis))
    return _result(out, tuple(parts), backward, "stack")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose", a.shape)

    def backward(g):
        _accumulate(a, g.T)
    return _result(a.data.T, (a,), backward, "transpose")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - out * out))
    return _result(out, (a,), backward, "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)

    def backward(g):
        _accumulate(a, g * out * (1.0 - out))
    return _result(out, (a,), backward, "sigmoid")


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def backward(g):
        _accumulate(a, g * (a.data > 0.0))
    return _result(out, (a,), backward, "relu")


def softmax_vec(a: Tensor) -> Tensor:
    if a.data.ndim != 1:
        raise ShapeError("softmax_vec", a.shape)
    if a.shape[0] == 0:
        raise ArgumentError("softmax over an empty vector")
    shifted = np.exp(a.data - a.data.max())
    out = shifted / shifted.sum()

    def backward(g):
        _accumulate(a, out * (g - np.dot(g, out)))
    return _result(out, (a,), backward, "softmax_vec")


def max_over_rows(a: Tensor) -> Tensor:
    """Maximum of each row: [[1,3],[2,0]] -> [3, 2]."""
    if a.data.ndim != 2 or a.shape[1] == 0:
        raise ShapeError("max_over_rows", a.shape)
    winners = a.data.argmax(axis=1)
    rows = np.arange(a.shape[0])

    def backward(g):
        full = np.zeros_like(a.data)
        full[rows, winners] = g
        _accumulate(a, full)
    return _result(a.data[rows, winners], (a,), backward, "max_over_rows")


def max_over_cols(a: Tensor) -> Tensor:
    """Maximum of each column: [[1,3],[2,0]] -> [2, 3]."""
    if a.data.ndim != 2 or a.shape[0] == 0:
        raise ShapeError("max_over_cols", a.shape)
    winners = a.data.argmax(axis=0)
    cols = np.arange(a.shape[1])

    def backward(g):
        full = np.zeros_like(a.data)
        full[winners, cols] = g
        _accumulate(a, full)
    return _result(a.data[winners, cols], (a,), backward, "max_over_cols")


def pick(a: Tensor, index: int) -> Tensor:
    if a.data.ndim != 1 or not 0 <= index < a.shape[0]:
        raise ArgumentError(f"pick index {index} invalid for shape {a.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        _accumulate(a, full)
    return _result(a.data[index], (a,), backward, "pick")


def neg_log(a: Tensor) -> Tensor:
    """-log(x), with x clamped at LOG_CLAMP (no gradient through the clamp)."""
    clamped = np.maximum(a.data, LOG_CLAMP)

    def backward(g):
        _accumulate(a, np.where(a.data > LOG_CLAMP, -g / clamped, 0.0))
    return _result(-np.log(clamped), (a,), backward, "neg_log")


def sum_all(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, np.full_like(a.data, g))
    return _result(np.asarray(a.data.sum()), (a,), backward, "sum")


def slice_vec(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 1 or not 0 <= start <= stop <= a.shape[0]:
        raise ArgumentError(f"slice [{start}:{stop}] invalid for shape {a.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        _accumulate(a, full)
    return _result(a.data[start:stop], (a,), backward, "slice")


def take_row(a: Tensor, index: int) -> Tensor:
    if a.data.ndim != 2 or not 0 <= index < a.shape[0]:
        raise ArgumentError(f"row {index} invalid for shape {a.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        _accumulate(a, full)
    return _result(a.data[index], (a,), backward, "take_row")


def take_rows(a: Tensor, indices: Sequence[int]) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if a.data.ndim != 2 or idx.size == 0 or idx.min() < 0 or idx.max() >= a.shape[0]:
        raise ArgumentError(f"rows {list(indices)} invalid for shape {a.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accumulate(a, full)
    return _result(a.data[idx], (a,), backward, "take_rows")


def unfold(a: Tensor, width: int) -> Tensor:
    """Sliding windows of `width` rows, each flattened: (n, k) -> (n - width + 1, width * k)."""
    if a.data.ndim != 2 or width < 1 or a.shape[0] < width:
        raise ShapeError("unfold", a.shape, (width,))
    n, k = a.shape
    windows = n - width + 1
    out = np.stack([a.data[i:i + width].reshape(-1) for i in range(windows)])

    def backward(g):
        full = np.zeros_like(a.data)
        for i in range(windows):
            full[i:i + width] += g[i].reshape(width, k)
        _accumulate(a, full)
    return _result(out, (a,), backward, "unfold")


def lstm_cell(x: Tensor, state: Tensor, w_i: Tensor, w_f: Tensor, w_o: Tensor, w_g: Tensor,
              b_i: Tensor, b_f: Tensor, b_o: Tensor, b_g: Tensor) -> Tensor:
    """
    One LSTM step. state and the result are [h; c] (length 2H).

      a = [x; h_prev]
      i, f, o = sigmoid(W a + b);  g = tanh(W_g a + b_g)
      c = f * c_prev + i * g;      h = o * tanh(c)
    """
    hidden = b_i.shape[0]
    if state.shape != (2 * hidden,):
        raise ShapeError("lstm_cell", state.shape, (2 * hidden,))
    if w_i.shape != (hidden, x.shape[0] + hidden):
        raise ShapeError("lstm_cell", w_i.shape, (hidden, x.shape[0] + hidden))
    h_prev, c_prev = state.data[:hidden], state.data[hidden:]
    joined = np.concatenate([x.data, h_prev])
    i = _sigmoid(w_i.data @ joined + b_i.data)
    f = _sigmoid(w_f.data @ joined + b_f.data)
    o = _sigmoid(w_o.data @ joined + b_o.data)
    g = np.tanh(w_g.data @ joined + b_g.data)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c

    def backward(grad):
        dh, dc = grad[:hidden], grad[hidden:]
        dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
        dz_i = dc_total * g * i * (1.0 - i)
        dz_f = dc_total * c_prev * f * (1.0 - f)
        dz_o = dh * tanh_c * o * (1.0 - o)
        dz_g = dc_total * i * (1.0 - g * g)
        d_joined = w_i.data.T @ dz_i + w_f.data.T @ dz_f + w_o.data.T @ dz_o + w_g.data.T @ dz_g
        for weight, bias, dz in ((w_i, b_i, dz_i), (w_f, b_f, dz_f), (w_o, b_o, dz_o), (w_g, b_g, dz_g)):
            _accumulate(weight, np.outer(dz, joined))
            _accumulate(bias, dz)
        _accumulate(x, d_joined[: x.shape[0]])
        _accumulate(state, np.concatenate([d_joined[x.shape[0]:], dc_total * f]))

    parents = (x, state, w_i, w_f, w_o, w_g, b_i, b_f, b_o, b_g)
    return _result(np.concatenate([h, c]), parents, backward, "lstm_cell")


OPS: Dict[str, Callable[..., Tensor]] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul_elementwise": mul,
    "concat_rows": lambda *parts: concat(parts),
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "softmax_vec": softmax_vec,
    "max_over_rows": max_over_rows,
    "max_over_cols": max_over_cols,
    "pick": pick,
    "neg_log": neg_log,
    "sum": sum_all,
}


def apply(op_kind: str, inputs: Sequence[Tensor], *args) -> Tensor:
    """Dispatch by name; extra positional args (e.g. the pick index) follow the inputs."""
    op = OPS.get(op_kind)
    if op is None:
        raise ArgumentError(f"unknown op {op_kind!r}")
    return op(*inputs, *args)


# ============================================================================
# BACKWARD
# ============================================================================

def _topological(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulates dLoss/dT into .grad of every requires_grad tensor reachable from loss."""
    if loss.shape != ():
        raise ArgumentError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topological(loss)
    _accumulate(loss, np.asarray(1.0))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ============================================================================
# PARAMETERS
# ============================================================================

class ParamStore:
    """Named trainable tensors; iteration is sorted by name."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._params: Dict[str, Tensor] = {}
        self._first_moment: Dict[str, np.ndarray] = {}
        self._second_moment: Dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, shape: Tuple[int, ...], init: str = "uniform", value: float = 0.0,
            requires_grad: bool = True) -> Tensor:
        if name in self._params:
            raise ArgumentError(f"parameter {name!r} already exists")
        if any(dim < 1 for dim in shape):
            raise ShapeError("param " + name, shape)
        if init == "uniform":
            fan_out = shape[0] if len(shape) > 1 else 1
            fan_in = shape[-1]
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            rng = np.random.default_rng(derive_seed(self.seed, name))
            data = rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "const":
            data = np.full(shape, value, dtype=np.float64)
        else:
            raise ArgumentError(f"unknown init {init!r}")
        tensor = Tensor(data, requires_grad=requires_grad, op=name)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return sorted(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._params[name]

    def trainable(self) -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self.items():
            if tensor.requires_grad:
                yield name, tensor

    def zero_grad(self) -> None:
        for _, tensor in self.trainable():
            tensor.grad = np.zeros_like(tensor.data)

    def size(self) -> int:
        return sum(tensor.data.size for _, tensor in self.items())

    def to_dict(self) -> Dict[str, dict]:
        return {name: {"shape": list(t.shape), "values": t.data.reshape(-1).tolist()} for name, t in self.items()}

    def load_dict(self, document: Dict[str, dict]) -> None:
        """Overwrites values in place; every parameter must be present with its shape."""
        for name, tensor in self.items():
            entry = document.get(name)
            if entry is None:
                raise StateError(f"missing parameter {name!r}")
            values = np.asarray(entry.get("values", []), dtype=np.float64)
            if list(entry.get("shape", [])) != list(tensor.shape) or values.size != tensor.data.size:
                raise StateError(f"parameter {name!r} has shape {entry.get('shape')}, expected {list(tensor.shape)}")
            tensor.data = values.reshape(tensor.shape)
        unknown = sorted(set(document) - set(self._params))
        if unknown:
            raise StateError(f"unknown parameters {unknown}")


def adam_step(params: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps_adam: float = 1e-8) -> None:
    trainable = list(params.trainable())
    for name, tensor in trainable:
        if tensor.grad is None:
            raise StateError(f"parameter {name!r} has no gradient; run zero_grad/backward first")
    params.step_count += 1
    t = params.step_count
    for name, tensor in trainable:
        grad = tensor.grad
        m = params._first_moment.get(name)
        v = params._second_moment.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        params._first_moment[name] = m
        params._second_moment[name] = v
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps_adam)


# ============================================================================
# GRADIENT CHECK
# ============================================================================

def grad_check(f: Callable[[ParamStore], Tensor], params: ParamStore, eps: float = 1e-5, floor: float = 1e-8) -> float:
    """
    Max relative error between backward gradients and central differences,
    |a - b| / max(floor, |a| + |b|), over every trainable component.
    """
    if eps <= 0:
        raise ArgumentError(f"eps must be positive, got {eps}")

    def evaluate() -> float:
        value = float(f(params).data)
        if not math.isfinite(value):
            raise NumericError(f"objective is not finite: {value}")
        return value

    params.zero_grad()
    loss = f(params)
    if not math.isfinite(float(loss.data)):
        raise NumericError(f"objective is not finite: {float(loss.data)}")
    backward(loss)
    analytic = {name: tensor.grad.copy() for name, tensor in params.trainable()}

    worst = 0.0
    worst_at = None
    for name, tensor in params.trainable():
        tensor.data = np.ascontiguousarray(tensor.data)
        flat = tensor.data.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + eps
            plus = evaluate()
            flat[k] = original - eps
            minus = evaluate()
            flat[k] = original
            numeric = (plus - minus) / (2.0 * eps)
            exact = analytic[name].reshape(-1)[k]
            error = abs(exact - numeric) / max(floor, abs(exact) + abs(numeric))
            if error > worst:
                worst = error
                worst_at = (name, k, exact, numeric)
    if worst_at is not None:
        logging.debug(f"[GRADCHECK] worst component {worst_at[0]}[{worst_at[1]}]: backward={worst_at[2]:.6e} numeric={worst_at[3]:.6e}")
    return worst
