"""
Dense tensor engine with reverse-mode automatic differentiation.

Operations run eagerly on float64 numpy arrays. While a ``Tape`` is active,
every operation whose operands require gradients is recorded on it, and
``backward`` replays the recorded backward rules in reverse order. Outside a
tape computation runs in inference mode and nothing is recorded.

A tape and the tensors it references belong to one thread; distinct tapes
are independent.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import (
    ContractViolation,
    DomainError,
    InvalidConfigurationError,
    NonFiniteValueError,
    ShapeMismatchError,
)

Array = NDArray[np.float64]

# GAT convention
LEAKY_RELU_SLOPE = 0.2

_local = threading.local()


def _tape_stack() -> list[Tape]:
    stack: list[Tape] | None = getattr(_local, "tapes", None)
    if stack is None:
        stack = []
        _local.tapes = stack
    return stack


def current_tape() -> Tape | None:
    """Return the innermost active tape of this thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


@dataclass(eq=False)
class TapeNode:
    """One recorded operation: operands, output and the op holding the backward rule."""

    op: Op
    operands: tuple[Tensor, ...]
    output: Tensor
    tape: Tape


class Tape:
    """Ordered record of operations for reverse-mode differentiation.

    Usage:
        with Tape():
            loss = model_loss(...)
            backward(loss)
    """

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []

    def __enter__(self) -> Tape:
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)


class Tensor:
    """Dense float64 array with optional gradient tracking."""

    def __init__(self, values: ArrayLike, requires_grad: bool = False, name: str | None = None) -> None:
        self.values: Array = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.name = name
        self._producer: TapeNode | None = None

    @classmethod
    def _wrap(cls, values: Array, requires_grad: bool) -> Tensor:
        out = cls.__new__(cls)
        out.values = values
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out._producer = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def tape(self) -> Tape | None:
        """Tape this tensor was recorded on, None for leaves and inference results."""
        return self._producer.tape if self._producer is not None else None

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractViolation(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.values.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.values, requires_grad=False)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # Operator overloads delegate to the recorded primitives.
    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, _as_tensor(other))

    def __radd__(self, other: float) -> Tensor:
        return add(_as_tensor(other), self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return sub(self, _as_tensor(other))

    def __rsub__(self, other: float) -> Tensor:
        return sub(_as_tensor(other), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, _as_tensor(other))

    def __rmul__(self, other: float) -> Tensor:
        return mul(_as_tensor(other), self)

    def __neg__(self) -> Tensor:
        return mul(self, _as_tensor(-1.0))

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    @property
    def T(self) -> Tensor:  # noqa: N802
        return transpose(self)

    def sum(self, axis: int | None = None) -> Tensor:
        return reduce_sum(self, axis=axis)

    def mean(self, axis: int) -> Tensor:
        return reduce_mean_axis(self, axis=axis)

    def max(self, axis: int) -> Tensor:
        return reduce_max_axis(self, axis=axis)


def _as_tensor(value: Tensor | float) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def constant(values: ArrayLike) -> Tensor:
    """Wrap values as a tensor that never receives gradients."""
    return Tensor(values, requires_grad=False)


def parameter(values: ArrayLike, name: str | None = None) -> Tensor:
    """Wrap values as a trainable leaf tensor."""
    return Tensor(values, requires_grad=True, name=name)


# ============================================================================
# Primitive operations
# ============================================================================


class Op:
    """Base class of a differentiable primitive.

    ``check`` validates operand shapes, ``forward`` computes the output from
    operand arrays (caching what backward needs) and ``backward`` maps the
    output gradient to one gradient per operand (None when not needed).
    """

    kind: ClassVar[str] = ""
    arity: ClassVar[int | None] = 2

    def check(self, *shapes: tuple[int, ...]) -> None:
        return None

    def forward(self, *arrays: Array) -> Array:
        raise NotImplementedError

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        raise NotImplementedError


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum out broadcast dimensions so that grad matches shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class _Broadcasting(Op):
    def check(self, *shapes: tuple[int, ...]) -> None:
        try:
            np.broadcast_shapes(shapes[0], shapes[1])
        except ValueError as e:
            raise ShapeMismatchError(self.kind, shapes[0], shapes[1]) from e


class Add(_Broadcasting):
    kind = "add"

    def forward(self, *arrays: Array) -> Array:
        a, b = arrays
        return a + b

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return grad, grad


class Sub(_Broadcasting):
    kind = "sub"

    def forward(self, *arrays: Array) -> Array:
        a, b = arrays
        return a - b

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return grad, -grad


class Mul(_Broadcasting):
    kind = "mul"

    def forward(self, *arrays: Array) -> Array:
        self.a, self.b = arrays
        return self.a * self.b

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return grad * self.b, grad * self.a


class MatMul(Op):
    kind = "matmul"

    def check(self, *shapes: tuple[int, ...]) -> None:
        left, right = shapes
        if not (1 <= len(left) <= 2 and 1 <= len(right) <= 2) or left[-1] != right[0]:
            raise ShapeMismatchError(self.kind, left, right)

    def forward(self, *arrays: Array) -> Array:
        self.a, self.b = arrays
        return self.a @ self.b

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        a, b = self.a, self.b
        if a.ndim == 1 and b.ndim == 1:
            return grad * b, grad * a
        if a.ndim == 1:
            return b @ grad, np.outer(a, grad)
        if b.ndim == 1:
            return np.outer(grad, b), a.T @ grad
        return grad @ b.T, a.T @ grad


class Concat(Op):
    kind = "concat"
    arity = None

    def __init__(self, axis: int = 0) -> None:
        self.axis = axis

    def check(self, *shapes: tuple[int, ...]) -> None:
        if not shapes:
            raise DomainError("concat needs at least one operand")
        first = shapes[0]
        if not -len(first) <= self.axis < len(first):
            raise ShapeMismatchError(self.kind, first, first, details=f"axis {self.axis} out of range")
        axis = self.axis % len(first)
        for other in shapes[1:]:
            if len(other) != len(first) or any(
                i != axis and x != y for i, (x, y) in enumerate(zip(first, other, strict=True))
            ):
                raise ShapeMismatchError(self.kind, first, other)

    def forward(self, *arrays: Array) -> Array:
        self.sizes = [arr.shape[self.axis] for arr in arrays]
        return np.concatenate(arrays, axis=self.axis)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        cuts = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, cuts, axis=self.axis))


class Relu(Op):
    kind = "relu"
    arity = 1

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self.positive = x > 0
        return np.where(self.positive, x, 0.0)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (grad * self.positive,)


class LeakyRelu(Op):
    kind = "leaky_relu"
    arity = 1

    def __init__(self, slope: float = LEAKY_RELU_SLOPE) -> None:
        self.slope = slope

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self.positive = x > 0
        return np.where(self.positive, x, self.slope * x)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (np.where(self.positive, grad, self.slope * grad),)


class Sigmoid(Op):
    kind = "sigmoid"
    arity = 1

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        # split by sign to keep exp() from overflowing
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self.out = out
        return out

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (grad * self.out * (1.0 - self.out),)


class RowSoftmax(Op):
    """Softmax over the last axis; masked-out entries are excluded and output 0."""

    kind = "row_softmax"
    arity = 1

    def __init__(self, mask: NDArray[np.bool_] | None = None) -> None:
        self.mask = mask

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if len(shape) not in (1, 2):
            raise ShapeMismatchError(self.kind, shape, shape, details="row_softmax needs a 1-D or 2-D operand")
        if shape[-1] == 0:
            raise DomainError("row_softmax over an empty axis")
        if self.mask is not None and tuple(self.mask.shape) != shape:
            raise ShapeMismatchError(self.kind, shape, tuple(self.mask.shape))

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        if self.mask is None:
            shifted = x - x.max(axis=-1, keepdims=True)
            e = np.exp(shifted)
            out = e / e.sum(axis=-1, keepdims=True)
        else:
            mask = self.mask
            filled = np.where(mask, x, -np.inf)
            row_max = filled.max(axis=-1, keepdims=True)
            row_max = np.where(np.isfinite(row_max), row_max, 0.0)
            e = np.where(mask, np.exp(np.where(mask, x, 0.0) - row_max), 0.0)
            totals = e.sum(axis=-1, keepdims=True)
            out = np.divide(e, totals, out=np.zeros_like(e), where=totals > 0)
        self.out = out
        return out

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        y = self.out
        return (y * (grad - (grad * y).sum(axis=-1, keepdims=True)),)


class _AxisReduction(Op):
    arity = 1

    def __init__(self, axis: int = 0) -> None:
        self.axis = axis

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if not -len(shape) <= self.axis < len(shape):
            raise ShapeMismatchError(self.kind, shape, shape, details=f"axis {self.axis} out of range")
        if shape[self.axis] == 0:
            raise DomainError(f"{self.kind} over an empty axis {self.axis} of shape {shape}")


class ReduceMeanAxis(_AxisReduction):
    kind = "reduce_mean_axis"

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self.in_shape = x.shape
        return x.mean(axis=self.axis)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        count = self.in_shape[self.axis]
        expanded = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(expanded, self.in_shape) / count,)


class ReduceMaxAxis(_AxisReduction):
    """Max over an axis; the gradient goes to the first maximal entry."""

    kind = "reduce_max_axis"

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self.in_shape = x.shape
        self.argmax = np.argmax(x, axis=self.axis)
        return x.max(axis=self.axis)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        out = np.zeros(self.in_shape)
        np.put_along_axis(
            out,
            np.expand_dims(self.argmax, self.axis),
            np.expand_dims(grad, self.axis),
            axis=self.axis,
        )
        return (out,)


class ReduceSum(Op):
    kind = "reduce_sum"
    arity = 1

    def __init__(self, axis: int | None = None) -> None:
        self.axis = axis

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if self.axis is not None and not -len(shape) <= self.axis < len(shape):
            raise ShapeMismatchError(self.kind, shape, shape, details=f"axis {self.axis} out of range")

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self.in_shape = x.shape
        return np.asarray(x.sum(axis=self.axis), dtype=np.float64)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        if self.axis is None:
            return (np.broadcast_to(grad, self.in_shape).copy(),)
        return (np.broadcast_to(np.expand_dims(grad, self.axis), self.in_shape).copy(),)


class Transpose(Op):
    kind = "transpose"
    arity = 1

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if len(shape) != 2:
            raise ShapeMismatchError(self.kind, shape, shape, details="transpose needs a 2-D operand")

    def forward(self, *arrays: Array) -> Array:
        return arrays[0].T.copy()

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (grad.T,)


class Reshape(Op):
    kind = "reshape"
    arity = 1

    def __init__(self, shape: tuple[int, ...]) -> None:
        self.shape = tuple(shape)

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if int(np.prod(shape)) != int(np.prod(self.shape)):
            raise ShapeMismatchError(self.kind, shape, self.shape)

    def forward(self, *arrays: Array) -> Array:
        self.in_shape = arrays[0].shape
        return arrays[0].reshape(self.shape)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (grad.reshape(self.in_shape),)


class SquaredL2Distance(Op):
    kind = "squared_l2_distance"

    def check(self, *shapes: tuple[int, ...]) -> None:
        if shapes[0] != shapes[1]:
            raise ShapeMismatchError(self.kind, shapes[0], shapes[1])

    def forward(self, *arrays: Array) -> Array:
        a, b = arrays
        self.diff = a - b
        return np.asarray(np.sum(self.diff * self.diff), dtype=np.float64)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        g = 2.0 * grad * self.diff
        return g, -g


class CrossEntropy(Op):
    """Negative log-likelihood of ``target`` under softmax(logits), logits 1-D."""

    kind = "cross_entropy"
    arity = 1

    def __init__(self, target: int) -> None:
        self.target = target

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if len(shape) != 1 or shape[0] == 0:
            raise ShapeMismatchError(self.kind, shape, (max(self.target + 1, 1),))
        if not 0 <= self.target < shape[0]:
            raise ContractViolation(f"cross_entropy target {self.target} outside [0, {shape[0]})")

    def forward(self, *arrays: Array) -> Array:
        (logits,) = arrays
        shifted = logits - logits.max()
        log_norm = np.log(np.exp(shifted).sum())
        self.probabilities = np.exp(shifted - log_norm)
        return np.asarray(log_norm - shifted[self.target], dtype=np.float64)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        g = self.probabilities.copy()
        g[self.target] -= 1.0
        return (grad * g,)


class TopKSelect(Op):
    """Keep the k largest entries of a score vector.

    Ties go to the lowest index; selected indices are returned in ascending
    order. The index output is not differentiable, gradients flow only to the
    selected values.
    """

    kind = "top_k_select"
    arity = 1

    def __init__(self, k: int) -> None:
        self.k = k
        self.indices: NDArray[np.int64] = np.zeros(0, dtype=np.int64)

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if len(shape) != 1:
            raise ShapeMismatchError(self.kind, shape, (self.k,))
        if not 1 <= self.k <= shape[0]:
            raise DomainError(f"top_k_select needs 1 <= k <= {shape[0]}, got k={self.k}")

    def forward(self, *arrays: Array) -> Array:
        (scores,) = arrays
        self.n = scores.shape[0]
        order = np.lexsort((np.arange(self.n), -scores))
        self.indices = np.sort(order[: self.k]).astype(np.int64)
        return scores[self.indices]

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        out = np.zeros(self.n)
        out[self.indices] = grad
        return (out,)


class GatherRows(Op):
    """Select rows (first-axis entries) by index; repeated indices accumulate gradients."""

    kind = "gather_rows"
    arity = 1

    def __init__(self, indices: Sequence[int] | NDArray[np.int64]) -> None:
        self.indices = np.asarray(indices, dtype=np.int64)

    def check(self, *shapes: tuple[int, ...]) -> None:
        (shape,) = shapes
        if len(shape) == 0:
            raise ShapeMismatchError(self.kind, shape, shape)
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= shape[0]):
            raise ContractViolation(f"gather_rows index out of range for {shape[0]} rows")

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self.in_shape = x.shape
        return x[self.indices]

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        out = np.zeros(self.in_shape)
        np.add.at(out, self.indices, grad)
        return (out,)


OPS: dict[str, Callable[..., Op]] = {
    cls.kind: cls
    for cls in (
        MatMul,
        Add,
        Sub,
        Mul,
        Concat,
        Relu,
        LeakyRelu,
        RowSoftmax,
        ReduceMeanAxis,
        ReduceMaxAxis,
        ReduceSum,
        SquaredL2Distance,
        CrossEntropy,
        Sigmoid,
        TopKSelect,
        Transpose,
        Reshape,
        GatherRows,
    )
}


def _apply(op: Op, operands: Sequence[Tensor]) -> Tensor:
    if op.arity is not None and len(operands) != op.arity:
        raise ContractViolation(f"{op.kind} takes {op.arity} operand(s), got {len(operands)}")
    op.check(*(t.shape for t in operands))
    values = op.forward(*(t.values for t in operands))
    if not np.all(np.isfinite(values)):
        raise NonFiniteValueError(f"{op.kind} produced non-finite values")

    tape = current_tape()
    track = tape is not None and any(t.requires_grad for t in operands)
    out = Tensor._wrap(np.asarray(values, dtype=np.float64), requires_grad=track)
    if track and tape is not None:
        node = TapeNode(op, tuple(operands), out, tape)
        tape.record(node)
        out._producer = node
    return out


def forward_op(kind: str, operands: Sequence[Tensor], **params: Any) -> Tensor:
    """Run the primitive ``kind`` on ``operands`` and record it on the active tape.

    Raises:
        InvalidConfigurationError: unknown kind
        ShapeMismatchError: incompatible operand shapes
        DomainError: empty reduction axis or invalid k
    """
    factory = OPS.get(kind)
    if factory is None:
        raise InvalidConfigurationError(f"Unknown tensor operation: {kind}", field="kind")
    return _apply(factory(**params), operands)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every gradient-requiring leaf reachable from ``loss``.

    Gradients accumulate additively into existing ``grad`` arrays.

    Raises:
        ContractViolation: loss is not a scalar or was not produced on the active tape
    """
    if loss.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._producer is None:
        raise ContractViolation("backward called on a tensor that was not recorded on a tape")

    tape = loss._producer.tape
    active = current_tape()
    if active is not None and active is not tape:
        raise ContractViolation("loss was recorded on a different tape than the active one")

    pending: dict[int, Array] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(tape.nodes):
        grad = pending.pop(id(node.output), None)
        if grad is None:
            continue
        for operand, operand_grad in zip(node.operands, node.op.backward(grad), strict=True):
            if operand_grad is None or not operand.requires_grad:
                continue
            operand_grad = _unbroadcast(np.asarray(operand_grad, dtype=np.float64), operand.shape)
            if operand._producer is None:
                _accumulate(operand, operand_grad)
            else:
                key = id(operand)
                pending[key] = pending[key] + operand_grad if key in pending else operand_grad


def _accumulate(leaf: Tensor, grad: Array) -> None:
    if leaf.grad is None:
        leaf.grad = grad.copy()
    else:
        leaf.grad = leaf.grad + grad


# ============================================================================
# Functional wrappers
# ============================================================================


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("matmul", [a, b])


def add(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("add", [a, b])


def sub(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("sub", [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("mul", [a, b])


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return forward_op("concat", list(tensors), axis=axis)


def relu(x: Tensor) -> Tensor:
    return forward_op("relu", [x])


def leaky_relu(x: Tensor, slope: float = LEAKY_RELU_SLOPE) -> Tensor:
    return forward_op("leaky_relu", [x], slope=slope)


def sigmoid(x: Tensor) -> Tensor:
    return forward_op("sigmoid", [x])


def row_softmax(x: Tensor, mask: NDArray[np.bool_] | None = None) -> Tensor:
    return forward_op("row_softmax", [x], mask=None if mask is None else np.asarray(mask, dtype=bool))


def reduce_mean_axis(x: Tensor, axis: int = 0) -> Tensor:
    return forward_op("reduce_mean_axis", [x], axis=axis)


def reduce_max_axis(x: Tensor, axis: int = 0) -> Tensor:
    return forward_op("reduce_max_axis", [x], axis=axis)


def reduce_sum(x: Tensor, axis: int | None = None) -> Tensor:
    return forward_op("reduce_sum", [x], axis=axis)


def transpose(x: Tensor) -> Tensor:
    return forward_op("transpose", [x])


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return forward_op("reshape", [x], shape=shape)


def squared_l2_distance(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("squared_l2_distance", [a, b])


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    return forward_op("cross_entropy", [logits], target=int(target))


def gather_rows(x: Tensor, indices: Sequence[int] | NDArray[np.int64]) -> Tensor:
    return forward_op("gather_rows", [x], indices=indices)


def top_k_select(scores: Tensor, k: int) -> tuple[Tensor, NDArray[np.int64]]:
    """Return the selected score values and their (ascending) node indices."""
    op = TopKSelect(k)
    values = _apply(op, [scores])
    return values, op.indices


# ============================================================================
# Finite-difference oracle
# ============================================================================


def numerical_gradient(
    loss_fn: Callable[[], Tensor],
    param: Tensor,
    h: float = 1e-5,
    coordinates: Sequence[int] | None = None,
) -> dict[int, float]:
    """Central finite differences of ``loss_fn`` w.r.t. flat coordinates of ``param``."""
    flat = param.values.reshape(-1)
    picked = range(flat.size) if coordinates is None else coordinates
    estimates: dict[int, float] = {}
    for index in picked:
        original = flat[index]
        flat[index] = original + h
        upper = loss_fn().item()
        flat[index] = original - h
        lower = loss_fn().item()
        flat[index] = original
        estimates[index] = (upper - lower) / (2.0 * h)
    return estimates


def max_relative_error(analytic: Array, numeric: dict[int, float], floor: float = 1e-6) -> float:
    """Largest |a - n| / max(|a|, |n|, floor) over the checked coordinates."""
    flat = analytic.reshape(-1)
    worst = 0.0
    for index, estimate in numeric.items():
        a = float(flat[index])
        scale = max(abs(a), abs(estimate), floor)
        worst = max(worst, abs(a - estimate) / scale)
    return worst
