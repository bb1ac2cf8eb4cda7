"""Parameter update rules used by the adversarial training loop.

All optimizers work on flat parameter vectors. `step` applies one update with
the rule of the given state; `lbfgs_minimize` runs a full L-BFGS minimization
with a backtracking Armijo line search on a deterministic objective.
"""

from __future__ import annotations

import collections
import dataclasses
import logging
from collections.abc import Callable, Sequence
from typing import Any, ClassVar

import numpy as np

from anakit import autodiff as ad


OPTIMIZER_KINDS = ("adam", "rmsprop", "gd", "lbfgs")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-8
LBFGS_MEMORY = 10
LBFGS_ARMIJO = 1e-4
LBFGS_BACKTRACK = 0.5
LBFGS_INITIAL_STEP = 1.0
LBFGS_MAX_BACKTRACKS = 40


class NonFiniteGradientError(FloatingPointError):
    """A gradient with NaN or infinite entries reached an optimizer."""

    def __init__(self, iteration: int | None) -> None:
        """Name the training iteration in the message when it is known."""
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"non-finite gradient{where}")
        self.iteration = iteration


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, collections.deque)):
        return [_encode(v) for v in value]
    return value


@dataclasses.dataclass
class GradientDescentState:
    """Plain gradient descent, p <- p - lr * g."""

    kind: ClassVar[str] = "gd"
    learning_rate: float

    def update(self, params: ad.FloatArray, grad: ad.FloatArray) -> ad.FloatArray:
        return params - self.learning_rate * grad

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "learning_rate": self.learning_rate}


@dataclasses.dataclass
class AdamState:
    """Adam with bias-corrected first and second moment estimates."""

    kind: ClassVar[str] = "adam"
    learning_rate: float
    m: ad.FloatArray
    v: ad.FloatArray
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    def update(self, params: ad.FloatArray, grad: ad.FloatArray) -> ad.FloatArray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def to_dict(self) -> dict[str, Any]:
        fields = {f.name: _encode(getattr(self, f.name)) for f in dataclasses.fields(self)}
        return {"kind": self.kind, **fields}


@dataclasses.dataclass
class RmsPropState:
    """RMSProp: the gradient divided by a running root-mean-square average."""

    kind: ClassVar[str] = "rmsprop"
    learning_rate: float
    v: ad.FloatArray
    rho: float = RMSPROP_RHO
    eps: float = RMSPROP_EPS

    def update(self, params: ad.FloatArray, grad: ad.FloatArray) -> ad.FloatArray:
        self.v = self.rho * self.v + (1.0 - self.rho) * grad * grad
        return params - self.learning_rate * grad / (np.sqrt(self.v) + self.eps)

    def to_dict(self) -> dict[str, Any]:
        fields = {f.name: _encode(getattr(self, f.name)) for f in dataclasses.fields(self)}
        return {"kind": self.kind, **fields}


@dataclasses.dataclass
class LbfgsState:
    """Limited-memory BFGS history and line-search settings.

    Used directly by `step` as a fixed-step quasi-Newton update; the training
    loop runs `lbfgs_minimize` with these settings on a frozen objective instead.
    """

    kind: ClassVar[str] = "lbfgs"
    learning_rate: float
    memory: int = LBFGS_MEMORY
    max_iterations: int = 5
    s_history: list[ad.FloatArray] = dataclasses.field(default_factory=list)
    y_history: list[ad.FloatArray] = dataclasses.field(default_factory=list)
    previous_params: ad.FloatArray | None = None
    previous_grad: ad.FloatArray | None = None

    def remember(self, s: ad.FloatArray, y: ad.FloatArray) -> bool:
        """Store a curvature pair if it satisfies s^T y > 0."""
        if float(s @ y) <= 0.0:
            return False
        self.s_history.append(s)
        self.y_history.append(y)
        if len(self.s_history) > self.memory:
            del self.s_history[0], self.y_history[0]
        return True

    def update(self, params: ad.FloatArray, grad: ad.FloatArray) -> ad.FloatArray:
        if self.previous_params is not None and self.previous_grad is not None:
            self.remember(params - self.previous_params, grad - self.previous_grad)
        direction = -two_loop_direction(grad, self.s_history, self.y_history)
        self.previous_params = params.copy()
        self.previous_grad = grad.copy()
        return params + self.learning_rate * direction

    def to_dict(self) -> dict[str, Any]:
        fields = {f.name: _encode(getattr(self, f.name)) for f in dataclasses.fields(self)}
        return {"kind": self.kind, **fields}


OptimizerState = GradientDescentState | AdamState | RmsPropState | LbfgsState


def make_optimizer(kind: str, learning_rate: float, dim: int, **settings: Any) -> OptimizerState:
    """Create a fresh optimizer state for a parameter vector of length `dim`."""
    if not learning_rate > 0:
        raise ad.ContractError(f"learning rate must be positive, got {learning_rate}")
    if kind == "adam":
        return AdamState(learning_rate, np.zeros(dim), np.zeros(dim), **settings)
    if kind == "rmsprop":
        return RmsPropState(learning_rate, np.zeros(dim), **settings)
    if kind == "gd":
        return GradientDescentState(learning_rate)
    if kind == "lbfgs":
        return LbfgsState(learning_rate, **settings)
    raise ad.ContractError(f"unknown optimizer '{kind}', expected one of {OPTIMIZER_KINDS}")


def optimizer_from_dict(data: dict[str, Any]) -> OptimizerState:
    """Rebuild an optimizer state written by its `to_dict` method."""
    data = dict(data)
    kind = data.pop("kind")
    if kind == "gd":
        return GradientDescentState(**data)
    if kind == "adam":
        data["m"], data["v"] = np.asarray(data["m"], float), np.asarray(data["v"], float)
        return AdamState(**data)
    if kind == "rmsprop":
        data["v"] = np.asarray(data["v"], float)
        return RmsPropState(**data)
    if kind == "lbfgs":
        data["s_history"] = [np.asarray(s, float) for s in data["s_history"]]
        data["y_history"] = [np.asarray(y, float) for y in data["y_history"]]
        for key in ("previous_params", "previous_grad"):
            if data[key] is not None:
                data[key] = np.asarray(data[key], float)
        return LbfgsState(**data)
    raise ad.ContractError(f"unknown optimizer '{kind}'")


def step(
    state: OptimizerState,
    params: ad.FloatArray,
    grad: ad.FloatArray,
    iteration: int | None = None,
) -> ad.FloatArray:
    """Apply one update and return the new parameter vector.

    Raises:
        NonFiniteGradientError: if `grad` has a NaN or infinite entry.
        autodiff.ShapeError: if `params` and `grad` differ in shape.
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape:
        raise ad.ShapeError(f"parameter shape {params.shape} != gradient shape {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(iteration)
    return state.update(params, grad)


def two_loop_direction(
    grad: ad.FloatArray,
    s_history: Sequence[ad.FloatArray],
    y_history: Sequence[ad.FloatArray],
) -> ad.FloatArray:
    """Inverse-Hessian approximation times `grad` by the L-BFGS two-loop recursion.

    The initial matrix is gamma * I with gamma = s^T y / y^T y of the newest pair
    (identity without history).
    """
    q = np.array(grad, dtype=np.float64)
    alphas = []
    for s, y in zip(reversed(s_history), reversed(y_history), strict=True):
        rho = 1.0 / float(y @ s)
        alpha = rho * float(s @ q)
        q -= alpha * y
        alphas.append((rho, alpha))

    gamma = 1.0
    if s_history:
        gamma = float(s_history[-1] @ y_history[-1]) / float(y_history[-1] @ y_history[-1])
    r = gamma * q

    pairs = zip(s_history, y_history, strict=True)
    for (s, y), (rho, alpha) in zip(pairs, reversed(alphas), strict=True):
        beta = rho * float(y @ r)
        r += s * (alpha - beta)
    return r


@dataclasses.dataclass(frozen=True)
class LbfgsIterate:
    """One accepted L-BFGS step."""

    iteration: int
    value: float
    grad_norm: float
    step_size: float
    fallback: bool = False


@dataclasses.dataclass
class LbfgsTrace:
    """Record of an `lbfgs_minimize` run."""

    iterates: list[LbfgsIterate] = dataclasses.field(default_factory=list)
    evaluations: int = 0
    fallbacks: int = 0
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.iterates)


Objective = Callable[[ad.FloatArray], tuple[float, ad.FloatArray]]


def _backtracking(  # noqa: PLR0913 [line search settings]
    f: Objective,
    p: ad.FloatArray,
    value: float,
    direction: ad.FloatArray,
    slope: float,
    trace: LbfgsTrace,
    armijo: float,
    backtrack: float,
    initial_step: float,
    max_backtracks: int,
) -> tuple[float, ad.FloatArray, float, ad.FloatArray] | None:
    """Largest step initial_step * backtrack^j satisfying the Armijo condition."""
    t = initial_step
    for _ in range(max_backtracks + 1):
        candidate = p + t * direction
        new_value, new_grad = f(candidate)
        trace.evaluations += 1
        if np.isfinite(new_value) and new_value <= value + armijo * t * slope:
            return t, candidate, float(new_value), np.asarray(new_grad, dtype=np.float64)
        t *= backtrack
    return None


def lbfgs_minimize(  # noqa: PLR0913 [standard L-BFGS settings]
    f: Objective,
    p0: Any,
    m: int = LBFGS_MEMORY,
    max_iter: int = 100,
    grad_tol: float = 1e-8,
    *,
    armijo: float = LBFGS_ARMIJO,
    backtrack: float = LBFGS_BACKTRACK,
    initial_step: float = LBFGS_INITIAL_STEP,
    max_backtracks: int = LBFGS_MAX_BACKTRACKS,
) -> tuple[ad.FloatArray, LbfgsTrace]:
    """Minimize `f` with L-BFGS and a backtracking Armijo line search.

    When the line search along the quasi-Newton direction fails, the history is
    discarded and a steepest-descent line search is tried instead (recorded as a
    fallback). The run ends when the gradient norm drops to `grad_tol`, after
    `max_iter` iterations, or when no descent step can be found.

    Args:
        f: Returns (value, gradient) at a point.
        p0: Starting point.
        m: Number of curvature pairs kept.
        max_iter: Maximum number of iterations.
        grad_tol: Gradient norm at which the run is converged.
        armijo: Sufficient-decrease constant.
        backtrack: Step reduction factor.
        initial_step: First trial step of every line search.
        max_backtracks: Step reductions before the line search fails.

    Returns:
        The final point and the trace of the run.
    """
    p = np.array(p0, dtype=np.float64)
    value, grad = f(p)
    value, grad = float(value), np.asarray(grad, dtype=np.float64)
    trace = LbfgsTrace(evaluations=1)
    state = LbfgsState(initial_step, memory=m)
    search = {
        "armijo": armijo,
        "backtrack": backtrack,
        "initial_step": initial_step,
        "max_backtracks": max_backtracks,
    }

    for iteration in range(max_iter):
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(iteration)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= grad_tol:
            trace.converged = True
            break

        direction = -two_loop_direction(grad, state.s_history, state.y_history)
        slope = float(grad @ direction)
        result = None
        if slope < 0:
            result = _backtracking(f, p, value, direction, slope, trace, **search)

        fallback = result is None
        if fallback:
            trace.fallbacks += 1
            logging.warning(
                "L-BFGS line search failed at iteration %d, falling back to steepest descent",
                iteration,
            )
            state.s_history.clear()
            state.y_history.clear()
            result = _backtracking(f, p, value, -grad, -grad_norm**2, trace, **search)
            if result is None:
                logging.warning("no descent step found at iteration %d, stopping", iteration)
                break

        step_size, new_p, new_value, new_grad = result
        state.remember(new_p - p, new_grad - grad)
        p, value, grad = new_p, new_value, new_grad
        trace.iterates.append(
            LbfgsIterate(iteration, value, float(np.linalg.norm(grad)), step_size, fallback)
        )
    else:
        trace.converged = float(np.linalg.norm(grad)) <= grad_tol

    return p, trace
