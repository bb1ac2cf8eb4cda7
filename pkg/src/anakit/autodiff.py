"""Reverse-mode automatic differentiation over a dynamically recorded tape.

A `Tape` records every `GraphNode` in construction order, which is a topological
order of the (acyclic) computation graph. `backward` walks the tape in reverse and
accumulates adjoints with the vector-Jacobian product registered for each op.

All op functions in this module also accept plain numbers and numpy arrays. When
none of the inputs is a `GraphNode`, the op is evaluated eagerly and a numpy value
is returned, so the same formula can serve both training (on a tape) and plain
simulation.
"""

from __future__ import annotations

import collections
import dataclasses
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
import numpy.typing as npt


FloatArray = npt.NDArray[np.float64]

# floor on the denominator of grad_check's relative error
GRAD_CHECK_SCALE_FLOOR = 1.0


class ShapeError(ValueError):
    """Input shapes are incompatible with the requested op."""


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class DomainError(ArithmeticError):
    """An op was evaluated outside of its mathematical domain."""

    def __init__(self, msg: str, value: float) -> None:
        """Store the offending value alongside the message."""
        super().__init__(f"{msg} (offending value: {value!r})")
        self.value = value


@dataclasses.dataclass(frozen=True)
class OpDefinition:
    """Forward rule and vector-Jacobian product of one registered op.

    `vjp(adjoint, output, *inputs, **attrs)` returns one gradient per input. The
    gradients may have the broadcast shape of the output; the engine sums them
    back to the input shapes.
    """

    tag: str
    forward: Callable[..., Any]
    vjp: Callable[..., Sequence[Any]]
    arity: int | None = None


_REGISTRY: dict[str, OpDefinition] = {}


def register_op(
    tag: str,
    forward: Callable[..., Any],
    vjp: Callable[..., Sequence[Any]],
    arity: int | None = None,
) -> None:
    """Register a differentiable op under `tag` (arity None means variadic)."""
    if tag in {"variable", "constant"}:
        raise ContractError(f"op tag '{tag}' is reserved for leaf nodes")
    _REGISTRY[tag] = OpDefinition(tag, forward, vjp, arity)


def registered_ops() -> list[str]:
    """Tags of all registered ops, in registration order."""
    return list(_REGISTRY)


def _as_array(value: Any) -> FloatArray:
    return np.asarray(value, dtype=np.float64)


class GraphNode:
    """A node of the computation graph: value, adjoint, producing op and parents."""

    __slots__ = ("adjoint", "attrs", "index", "name", "op", "parents", "tape", "value")

    # let numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(  # noqa: PLR0913 [node bookkeeping fields]
        self,
        value: FloatArray,
        op: str,
        parents: tuple[GraphNode, ...],
        attrs: dict[str, Any],
        tape: Tape,
        index: int,
        name: str | None = None,
    ) -> None:
        """Create a node; use the `Tape` methods instead of calling this directly."""
        self.value = value
        self.adjoint = np.zeros_like(value)
        self.op = op
        self.parents = parents
        self.attrs = attrs
        self.tape = tape
        self.index = index
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the node value."""
        return tuple(self.value.shape)

    @property
    def ndim(self) -> int:
        """Number of dimensions of the node value."""
        return int(self.value.ndim)

    def item(self) -> float:
        """Value of a scalar node as a Python float."""
        return float(self.value)

    def __repr__(self) -> str:
        """Short description with op tag and shape."""
        label = f" '{self.name}'" if self.name else ""
        return f"GraphNode{label}(op={self.op}, shape={self.shape})"

    def __add__(self, other: Any) -> GraphNode:
        return add(self, other)  # type: ignore[return-value]

    def __radd__(self, other: Any) -> GraphNode:
        return add(other, self)  # type: ignore[return-value]

    def __sub__(self, other: Any) -> GraphNode:
        return subtract(self, other)  # type: ignore[return-value]

    def __rsub__(self, other: Any) -> GraphNode:
        return subtract(other, self)  # type: ignore[return-value]

    def __mul__(self, other: Any) -> GraphNode:
        return multiply(self, other)  # type: ignore[return-value]

    def __rmul__(self, other: Any) -> GraphNode:
        return multiply(other, self)  # type: ignore[return-value]

    def __truediv__(self, other: Any) -> GraphNode:
        return divide(self, other)  # type: ignore[return-value]

    def __rtruediv__(self, other: Any) -> GraphNode:
        return divide(other, self)  # type: ignore[return-value]

    def __neg__(self) -> GraphNode:
        return negate(self)  # type: ignore[return-value]

    def __matmul__(self, other: Any) -> GraphNode:
        return matmul(self, other)  # type: ignore[return-value]

    def __rmatmul__(self, other: Any) -> GraphNode:
        return matmul(other, self)  # type: ignore[return-value]

    def __getitem__(self, key: Any) -> GraphNode:
        return self.tape.forward_op("index", [self], key=key)


class Tape:
    """Append-only record of graph nodes plus the scalar root used by `backward`."""

    def __init__(self) -> None:
        """Create an empty tape."""
        self.nodes: list[GraphNode] = []
        self.root: GraphNode | None = None
        self.events: collections.Counter[str] = collections.Counter()
        self._bound: dict[int, list[GraphNode]] = {}

    def __len__(self) -> int:
        """Number of recorded nodes."""
        return len(self.nodes)

    def _append(
        self,
        value: FloatArray,
        op: str,
        parents: tuple[GraphNode, ...] = (),
        attrs: dict[str, Any] | None = None,
        name: str | None = None,
    ) -> GraphNode:
        node = GraphNode(value, op, parents, attrs or {}, self, len(self.nodes), name)
        self.nodes.append(node)
        return node

    def variable(self, value: Any, name: str | None = None) -> GraphNode:
        """Record a differentiable leaf."""
        return self._append(_as_array(value).copy(), "variable", name=name)

    def constant(self, value: Any) -> GraphNode:
        """Record a leaf that is treated as data."""
        return self._append(_as_array(value), "constant")

    def lift(self, value: Any) -> GraphNode:
        """Return `value` as a node of this tape, wrapping plain values as constants."""
        if isinstance(value, GraphNode):
            if value.tape is not self:
                raise ContractError("cannot combine nodes recorded on different tapes")
            return value
        return self.constant(value)

    def forward_op(self, op: str, inputs: Sequence[Any], **attrs: Any) -> GraphNode:
        """Evaluate the registered op `op` and record the result on this tape."""
        definition = _lookup(op, len(inputs))
        parents = tuple(self.lift(x) for x in inputs)
        value = _as_array(definition.forward(*(p.value for p in parents), **attrs))
        return self._append(value, op, parents, attrs)

    def bind(self, owner: object, arrays: Sequence[FloatArray]) -> list[GraphNode]:
        """Record `arrays` as variables owned by `owner`, once per tape.

        Repeated calls with the same owner return the same nodes, so a network
        evaluated on several batches accumulates its adjoints in one place.
        """
        key = id(owner)
        if key not in self._bound:
            self._bound[key] = [self.variable(a) for a in arrays]
        return self._bound[key]

    def bound(self, owner: object) -> list[GraphNode] | None:
        """Nodes previously bound for `owner`, if any."""
        return self._bound.get(id(owner))

    def record_event(self, event: str, count: int = 1) -> None:
        """Count a diagnostic event (e.g. loss saturation) on this tape."""
        if count:
            self.events[event] += count


def _lookup(op: str, count: int) -> OpDefinition:
    try:
        definition = _REGISTRY[op]
    except KeyError:
        raise ContractError(f"unknown op '{op}'") from None
    if definition.arity is not None and count != definition.arity:
        raise ContractError(f"op '{op}' takes {definition.arity} inputs, got {count}")
    return definition


def forward_op(op: str, inputs: Sequence[Any], **attrs: Any) -> GraphNode | FloatArray:
    """Apply a registered op.

    The result is recorded on the tape of the first `GraphNode` among `inputs`;
    without any node the op is evaluated eagerly and a numpy value is returned.

    Raises:
        ShapeError: if the input shapes are incompatible.
        DomainError: if an input lies outside the op's domain.
    """
    tape = next((x.tape for x in inputs if isinstance(x, GraphNode)), None)
    if tape is not None:
        return tape.forward_op(op, inputs, **attrs)
    definition = _lookup(op, len(inputs))
    return _as_array(definition.forward(*(_as_array(x) for x in inputs), **attrs))


def _unbroadcast(grad: Any, shape: tuple[int, ...]) -> FloatArray:
    """Sum `grad` down to `shape` after numpy broadcasting."""
    grad = _as_array(grad)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape: Tape, root: GraphNode | None = None) -> dict[GraphNode, FloatArray]:
    """Run the reverse pass from the tape's scalar root.

    Adjoints are reset to zero on every node first; nodes the root does not depend
    on keep a zero adjoint.

    Args:
        tape: Tape holding the forward pass.
        root: Optional root node; replaces `tape.root` when given.

    Returns:
        Mapping from every recorded node to its adjoint.
    """
    if root is not None:
        tape.root = root
    if tape.root is None:
        raise ContractError("backward requires a root node")
    root = tape.lift(tape.root)
    if root.ndim != 0:
        raise ContractError(f"backward requires a scalar root, got shape {root.shape}")

    for node in tape.nodes:
        node.adjoint = np.zeros_like(node.value)
    root.adjoint = np.ones_like(root.value)

    for node in reversed(tape.nodes[: root.index + 1]):
        if not node.parents or not np.any(node.adjoint):
            continue
        definition = _REGISTRY[node.op]
        grads = definition.vjp(
            node.adjoint, node.value, *(p.value for p in node.parents), **node.attrs
        )
        for parent, grad in zip(node.parents, grads, strict=True):
            parent.adjoint = parent.adjoint + _unbroadcast(grad, parent.value.shape)

    return {node: node.adjoint for node in tape.nodes}


@dataclasses.dataclass(frozen=True)
class GradCheckReport:
    """Outcome of comparing backward adjoints against central differences."""

    passed: bool
    max_relative_error: float
    analytic: FloatArray
    numeric: FloatArray


def grad_check(
    f: Callable[[Tape, GraphNode], GraphNode],
    point: Any,
    step: float = 1e-6,
    tol: float = 1e-5,
) -> GradCheckReport:
    """Check the gradient of a graph-building function with central differences.

    The relative error of each component is |analytic - numeric| divided by
    max(|analytic|, |numeric|, 1).

    Args:
        f: Builds a scalar root on the given tape from the variable node.
        point: Point at which the gradient is checked.
        step: Central difference step.
        tol: Maximum accepted relative error.

    Returns:
        Report with the analytic and numeric gradients.
    """
    point = _as_array(point)

    tape = Tape()
    x = tape.variable(point)
    backward(tape, f(tape, x))
    analytic = x.adjoint.copy()

    def evaluate(at: FloatArray) -> float:
        scratch = Tape()
        return tape_value(f(scratch, scratch.variable(at)))

    numeric = np.empty_like(point)
    for i in np.ndindex(point.shape):
        plus = point.copy()
        plus[i] += step
        minus = point.copy()
        minus[i] -= step
        numeric[i] = (evaluate(plus) - evaluate(minus)) / (2.0 * step)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRAD_CHECK_SCALE_FLOOR)
    errors = np.abs(analytic - numeric) / scale
    max_error = float(errors.max()) if errors.size else 0.0
    return GradCheckReport(max_error <= tol, max_error, analytic, numeric)


def tape_value(x: GraphNode | Any) -> float:
    """Scalar value of a node or plain number."""
    if isinstance(x, GraphNode):
        return x.item()
    return float(x)


def value_of(x: GraphNode | Any) -> FloatArray:
    """Numpy value of a node or plain array."""
    if isinstance(x, GraphNode):
        return x.value
    return _as_array(x)


# op definitions


def _broadcast_check(a: FloatArray, b: FloatArray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"cannot {op} shapes {a.shape} and {b.shape}") from None


def _check_positive(x: FloatArray, op: str) -> None:
    bad = ~(x > 0)
    if np.any(bad):
        raise DomainError(f"{op} requires strictly positive input", float(x[bad].flat[0]))


def _add(a: FloatArray, b: FloatArray) -> FloatArray:
    _broadcast_check(a, b, "add")
    return a + b


def _subtract(a: FloatArray, b: FloatArray) -> FloatArray:
    _broadcast_check(a, b, "subtract")
    return a - b


def _multiply(a: FloatArray, b: FloatArray) -> FloatArray:
    _broadcast_check(a, b, "multiply")
    return a * b


def _divide(a: FloatArray, b: FloatArray) -> FloatArray:
    _broadcast_check(a, b, "divide")
    if np.any(b == 0):
        raise DomainError("division by zero", 0.0)
    return a / b


def _log(x: FloatArray) -> FloatArray:
    _check_positive(x, "log")
    return np.log(x)


def _sqrt(x: FloatArray) -> FloatArray:
    _check_positive(x, "sqrt")
    return np.sqrt(x)


def _sigmoid(x: FloatArray) -> FloatArray:
    # exp(-|x|) never overflows; pick the branch by sign
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _matmul(a: FloatArray, b: FloatArray) -> FloatArray:
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def _matmul_vjp(g: FloatArray, _out: FloatArray, a: FloatArray, b: FloatArray) -> tuple:
    if a.ndim == 1 and b.ndim == 1:
        return g * b, g * a
    if b.ndim == 1:
        return np.outer(g, b), a.T @ g
    if a.ndim == 1:
        return b @ g, np.outer(a, g)
    return g @ b.T, a.T @ g


def _reduce_vjp(g: FloatArray, x: FloatArray, axis: int | None, count: int) -> FloatArray:
    if axis is not None:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g / count, x.shape)


def _is_basic_index(key: Any) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, slice, type(Ellipsis), type(None))) for k in parts)


def _index_vjp(g: FloatArray, _out: FloatArray, x: FloatArray, key: Any) -> tuple:
    grad = np.zeros_like(x)
    if _is_basic_index(key):
        grad[key] += g
    else:
        np.add.at(grad, key, g)
    return (grad,)


def _concat(*xs: FloatArray, axis: int = 0) -> FloatArray:
    try:
        return np.concatenate(xs, axis=axis)
    except ValueError as e:
        raise ShapeError(f"cannot concatenate: {e}") from None


def _concat_vjp(g: FloatArray, _out: FloatArray, *xs: FloatArray, axis: int = 0) -> list:
    splits = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return np.split(g, splits, axis=axis)


def _reshape(x: FloatArray, shape: tuple[int, ...]) -> FloatArray:
    try:
        return x.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from None


register_op("add", _add, lambda g, _o, _a, _b: (g, g), 2)
register_op("subtract", _subtract, lambda g, _o, _a, _b: (g, -g), 2)
register_op("multiply", _multiply, lambda g, _o, a, b: (g * b, g * a), 2)
register_op("divide", _divide, lambda g, _o, a, b: (g / b, -g * a / (b * b)), 2)
register_op("negate", np.negative, lambda g, _o, _x: (-g,), 1)
register_op("exp", np.exp, lambda g, o, _x: (g * o,), 1)
register_op("log", _log, lambda g, _o, x: (g / x,), 1)
register_op("sqrt", _sqrt, lambda g, o, _x: (0.5 * g / o,), 1)
register_op("square", np.square, lambda g, _o, x: (2.0 * g * x,), 1)
register_op("tanh", np.tanh, lambda g, o, _x: (g * (1.0 - o * o),), 1)
register_op("sigmoid", _sigmoid, lambda g, o, _x: (g * o * (1.0 - o),), 1)
register_op("relu", lambda x: np.maximum(x, 0.0), lambda g, _o, x: (g * (x > 0),), 1)
register_op("absolute", np.abs, lambda g, _o, x: (g * np.sign(x),), 1)
register_op("matmul", _matmul, _matmul_vjp, 2)
register_op(
    "sum",
    lambda x, axis=None: np.sum(x, axis=axis),
    lambda g, _o, x, axis=None: (_reduce_vjp(g, x, axis, 1),),
    1,
)
register_op(
    "mean",
    lambda x, axis=None: np.mean(x, axis=axis),
    lambda g, _o, x, axis=None: (_reduce_vjp(g, x, axis, x.size // max(np.size(g), 1)),),
    1,
)
register_op(
    "clamp",
    lambda x, lo, hi: np.clip(x, lo, hi),
    lambda g, _o, x, lo, hi: (g * ((x >= lo) & (x <= hi)),),
    1,
)
register_op("index", lambda x, key: x[key], _index_vjp, 1)
register_op("concat", _concat, _concat_vjp)
register_op("reshape", _reshape, lambda g, _o, x, shape: (g.reshape(x.shape),), 1)


# public op functions


def add(a: Any, b: Any) -> GraphNode | FloatArray:
    """Elementwise a + b with broadcasting."""
    return forward_op("add", [a, b])


def subtract(a: Any, b: Any) -> GraphNode | FloatArray:
    """Elementwise a - b with broadcasting."""
    return forward_op("subtract", [a, b])


def multiply(a: Any, b: Any) -> GraphNode | FloatArray:
    """Elementwise a * b with broadcasting."""
    return forward_op("multiply", [a, b])


def divide(a: Any, b: Any) -> GraphNode | FloatArray:
    """Elementwise a / b; division by zero raises DomainError."""
    return forward_op("divide", [a, b])


def negate(x: Any) -> GraphNode | FloatArray:
    return forward_op("negate", [x])


def exp(x: Any) -> GraphNode | FloatArray:
    return forward_op("exp", [x])


def log(x: Any) -> GraphNode | FloatArray:
    """Natural logarithm; non-positive inputs raise DomainError."""
    return forward_op("log", [x])


def sqrt(x: Any) -> GraphNode | FloatArray:
    """Square root; non-positive inputs raise DomainError."""
    return forward_op("sqrt", [x])


def square(x: Any) -> GraphNode | FloatArray:
    return forward_op("square", [x])


def tanh(x: Any) -> GraphNode | FloatArray:
    return forward_op("tanh", [x])


def sigmoid(x: Any) -> GraphNode | FloatArray:
    """Logistic function, evaluated without overflow for large |x|."""
    return forward_op("sigmoid", [x])


def relu(x: Any) -> GraphNode | FloatArray:
    """Elementwise max(x, 0); the gradient at 0 is taken as 0."""
    return forward_op("relu", [x])


maximum_zero = relu


def absolute(x: Any) -> GraphNode | FloatArray:
    return forward_op("absolute", [x])


def matmul(a: Any, b: Any) -> GraphNode | FloatArray:
    """Matrix-vector, vector-matrix or matrix-matrix product."""
    return forward_op("matmul", [a, b])


matvec = matmul


def reduce_sum(x: Any, axis: int | None = None) -> GraphNode | FloatArray:
    """Sum over all entries, or over one axis."""
    return forward_op("sum", [x], axis=axis)


def reduce_mean(x: Any, axis: int | None = None) -> GraphNode | FloatArray:
    """Mean over all entries, or over one axis."""
    return forward_op("mean", [x], axis=axis)


def clamp(x: Any, lo: float, hi: float) -> GraphNode | FloatArray:
    """Clip to [lo, hi]; the gradient vanishes outside the interval."""
    return forward_op("clamp", [x], lo=lo, hi=hi)


def concat(xs: Sequence[Any], axis: int = 0) -> GraphNode | FloatArray:
    return forward_op("concat", list(xs), axis=axis)


def reshape(x: Any, shape: tuple[int, ...]) -> GraphNode | FloatArray:
    return forward_op("reshape", [x], shape=tuple(shape))
