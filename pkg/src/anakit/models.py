"""Differentiable forward models F(w, θ).

* 1-D Poisson problem -(a(x) u')' = 1 on (0, 1), u(0) = u(1) = 0, discretized
  with central differences and solved with the Thomas algorithm.
* One step of the CIR process with the Euler-Maruyama or the weighted Milstein
  scheme, plus path simulation.
* European call payoff under geometric Brownian motion.

The model functions accept plain floats/arrays or graph nodes for their
parameters; leading batch axes broadcast through every model.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from typing import Any

import numpy as np

from anakit import autodiff as ad


POISSON_GRID_POINTS = 100
POISSON_BUMP_DEPTH = 0.9
CIR_SCHEMES = ("em", "milstein")


class SingularSystemError(ArithmeticError):
    """Zero pivot met during tridiagonal elimination."""

    def __init__(self, pivot_index: int) -> None:
        """Record the row of the zero pivot."""
        super().__init__(f"zero pivot at row {pivot_index} of tridiagonal system")
        self.pivot_index = pivot_index


@dataclasses.dataclass(frozen=True)
class TridiagonalSystem:
    """A u = rhs with A given by its three diagonals (leading batch axes allowed)."""

    lower: ad.FloatArray
    diag: ad.FloatArray
    upper: ad.FloatArray
    rhs: ad.FloatArray

    def __post_init__(self) -> None:
        """Check the diagonal lengths n-1, n, n-1 and n."""
        n = np.shape(self.diag)[-1]
        lengths = [np.shape(x)[-1] for x in (self.lower, self.upper, self.rhs)]
        if lengths != [n - 1, n - 1, n]:
            raise ad.ShapeError(f"diagonal lengths {lengths} do not match n = {n}")

    def matvec(self, u: ad.FloatArray) -> ad.FloatArray:
        """A u, used for residual checks."""
        out = self.diag * u
        out[..., 1:] += self.lower * u[..., :-1]
        out[..., :-1] += self.upper * u[..., 1:]
        return out


def _thomas(
    lower: ad.FloatArray, diag: ad.FloatArray, upper: ad.FloatArray, rhs: ad.FloatArray
) -> ad.FloatArray:
    batch = np.broadcast_shapes(lower.shape[:-1], diag.shape[:-1], upper.shape[:-1], rhs.shape[:-1])
    n = diag.shape[-1]
    lower = np.broadcast_to(lower, (*batch, n - 1))
    diag = np.broadcast_to(diag, (*batch, n))
    upper = np.broadcast_to(upper, (*batch, n - 1))
    rhs = np.broadcast_to(rhs, (*batch, n))

    c = np.zeros((*batch, n))
    d = np.zeros((*batch, n))
    pivot = diag[..., 0]
    if np.any(pivot == 0):
        raise SingularSystemError(0)
    if n > 1:
        c[..., 0] = upper[..., 0] / pivot
    d[..., 0] = rhs[..., 0] / pivot
    for i in range(1, n):
        pivot = diag[..., i] - lower[..., i - 1] * c[..., i - 1]
        if np.any(pivot == 0):
            raise SingularSystemError(i)
        if i < n - 1:
            c[..., i] = upper[..., i] / pivot
        d[..., i] = (rhs[..., i] - lower[..., i - 1] * d[..., i - 1]) / pivot

    u = np.empty((*batch, n))
    u[..., -1] = d[..., -1]
    for i in range(n - 2, -1, -1):
        u[..., i] = d[..., i] - c[..., i] * u[..., i + 1]
    return u


def thomas_solve(system: TridiagonalSystem) -> ad.FloatArray:
    """Solve a tridiagonal system by forward elimination and back substitution.

    Raises:
        SingularSystemError: if a pivot vanishes, with the row index.
    """
    return _thomas(
        np.asarray(system.lower, dtype=np.float64),
        np.asarray(system.diag, dtype=np.float64),
        np.asarray(system.upper, dtype=np.float64),
        np.asarray(system.rhs, dtype=np.float64),
    )


def _tridiagonal_vjp(
    g: ad.FloatArray,
    u: ad.FloatArray,
    lower: ad.FloatArray,
    diag: ad.FloatArray,
    upper: ad.FloatArray,
    _rhs: ad.FloatArray,
) -> tuple[ad.FloatArray, ...]:
    # adjoint system A^T lam = g: the transpose swaps the off-diagonals
    lam = _thomas(upper, diag, lower, g)
    return (
        -lam[..., 1:] * u[..., :-1],
        -lam * u,
        -lam[..., :-1] * u[..., 1:],
        lam,
    )


ad.register_op("tridiagonal_solve", _thomas, _tridiagonal_vjp, 4)


def tridiagonal_solve(lower: Any, diag: Any, upper: Any, rhs: Any) -> Any:
    """Differentiable tridiagonal solve; the adjoint is one transposed solve."""
    return ad.forward_op("tridiagonal_solve", [lower, diag, upper, rhs])


@dataclasses.dataclass(frozen=True)
class PoissonParams:
    """Bump center mu and width sigma of a(x) = 1 - 0.9 exp(-(x - mu)^2 / (2 sigma^2))."""

    mu: Any
    sigma: Any
    n: int = POISSON_GRID_POINTS

    def __post_init__(self) -> None:
        """Validate the grid size."""
        if self.n < 2:  # noqa: PLR2004 [smallest grid with an interior coupling]
            raise ad.ContractError(f"Poisson grid needs at least 2 interior points, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    def nodes(self) -> ad.FloatArray:
        """Interior grid points x_1 ... x_n."""
        return self.h * np.arange(1, self.n + 1)


def poisson_coefficient(x: Any, mu: Any, sigma: Any) -> Any:
    """a(x) = 1 - 0.9 exp(-(x - mu)^2 / (2 sigma^2))."""
    spread = ad.multiply(2.0, ad.square(sigma))
    bump = ad.exp(ad.negate(ad.divide(ad.square(ad.subtract(x, mu)), spread)))
    return ad.subtract(1.0, ad.multiply(POISSON_BUMP_DEPTH, bump))


def poisson_solve(p: PoissonParams, tape: ad.Tape | None = None) -> Any:
    """Nodal values u_1 ... u_n of the central-difference scheme.

    Row i reads -a_{i-1/2} u_{i-1} + (a_{i-1/2} + a_{i+1/2}) u_i - a_{i+1/2} u_{i+1} = h^2
    with u_0 = u_{n+1} = 0. A `mu`/`sigma` of shape (batch, 1) yields a (batch, n)
    solution, one row per parameter sample.
    """
    mu, sigma = p.mu, p.sigma
    if tape is not None:
        mu, sigma = tape.lift(mu), tape.lift(sigma)
    midpoints = p.h * (np.arange(p.n + 1) + 0.5)
    a = poisson_coefficient(midpoints, mu, sigma)
    left, right, inner = a[..., :-1], a[..., 1:], a[..., 1:-1]
    diag = ad.add(left, right)
    off = ad.negate(inner)
    rhs = np.full(p.n, p.h * p.h)
    return tridiagonal_solve(off, diag, off, rhs)


@dataclasses.dataclass(frozen=True)
class CirParams:
    """Parameters of dr = kappa (tau - r) dt + sigma sqrt(r) dW and of its discretization.

    Plain-number fields are validated; graph-node fields (estimates under
    training) are not.
    """

    kappa: Any
    tau: Any
    sigma: Any
    dt: float
    alpha: float = 0.5

    def __post_init__(self) -> None:
        """Validate the plain-number fields."""
        for name in ("kappa", "tau"):
            value = getattr(self, name)
            if isinstance(value, (int, float)) and not value > 0:
                raise ad.ContractError(f"CIR parameter {name} must be positive, got {value}")
        if isinstance(self.sigma, (int, float)) and self.sigma < 0:
            raise ad.ContractError(f"CIR volatility must be nonnegative, got {self.sigma}")
        if self.dt < 0:
            raise ad.ContractError(f"time step must be nonnegative, got {self.dt}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ad.ContractError(f"Milstein weight must lie in [0, 1], got {self.alpha}")

    def feller(self) -> bool:
        """2 kappa tau > sigma^2."""
        kappa, tau, sigma = (ad.tape_value(v) for v in (self.kappa, self.tau, self.sigma))
        return 2.0 * kappa * tau > sigma**2


def _check_rate(x: Any) -> None:
    values = ad.value_of(x)
    bad = ~(values > 0)
    if np.any(bad):
        raise ad.DomainError("CIR step requires a positive rate", float(values[bad].flat[0]))


def cir_em_step(x: Any, w: Any, p: CirParams, tape: ad.Tape | None = None) -> tuple[Any, Any]:
    """Euler-Maruyama step y = x + kappa (tau - x) dt + sigma sqrt(x dt) W.

    Returns:
        The pair (x, y).
    """
    _check_rate(x)
    if tape is not None:
        x = tape.lift(x)
    drift = ad.multiply(ad.multiply(p.kappa, ad.subtract(p.tau, x)), p.dt)
    noise = ad.multiply(ad.multiply(p.sigma, ad.sqrt(x)), ad.multiply(math.sqrt(p.dt), w))
    return x, ad.add(ad.add(x, drift), noise)


def cir_milstein_step(x: Any, w: Any, p: CirParams, tape: ad.Tape | None = None) -> Any:
    """Weighted Milstein step.

    y = [x + kappa (tau - alpha x) dt + sigma sqrt(x) sqrt(dt) W + sigma^2 dt (W^2 - 1) / 4]
        / (1 + (1 - alpha) kappa dt)
    """
    _check_rate(x)
    if tape is not None:
        x = tape.lift(x)
    drift = ad.multiply(ad.multiply(p.kappa, ad.subtract(p.tau, ad.multiply(p.alpha, x))), p.dt)
    noise = ad.multiply(ad.multiply(p.sigma, ad.sqrt(x)), ad.multiply(math.sqrt(p.dt), w))
    correction = ad.multiply(
        ad.multiply(0.25 * p.dt, ad.square(p.sigma)), ad.subtract(ad.square(w), 1.0)
    )
    numerator = ad.add(ad.add(ad.add(x, drift), noise), correction)
    denominator = ad.add(1.0, ad.multiply((1.0 - p.alpha) * p.dt, p.kappa))
    return ad.divide(numerator, denominator)


def cir_step(
    x: Any, w: Any, p: CirParams, scheme: str = "milstein", tape: ad.Tape | None = None
) -> Any:
    """One step of the selected scheme, returning y only."""
    if scheme == "em":
        return cir_em_step(x, w, p, tape)[1]
    if scheme == "milstein":
        return cir_milstein_step(x, w, p, tape)
    raise ad.ContractError(f"unknown CIR scheme '{scheme}', expected one of {CIR_SCHEMES}")


@dataclasses.dataclass(frozen=True)
class SimulatedPath:
    """Simulated rates (first axis: time) and the number of reflected negative values."""

    values: ad.FloatArray
    reflections: int = 0

    def pairs(self) -> tuple[ad.FloatArray, ad.FloatArray]:
        """Consecutive observations (R_i, R_{i+1})."""
        return self.values[:-1], self.values[1:]


def simulate_cir_ensemble(
    r0: Any,
    p: CirParams,
    w: ad.FloatArray,
    scheme: str = "milstein",
) -> SimulatedPath:
    """Simulate independent paths side by side.

    Args:
        r0: Initial rate(s), broadcastable to the path axis.
        p: Parameters; kappa, tau and sigma may be arrays over the path axis.
        w: Standard normal draws of shape (steps, paths).
        scheme: "em" or "milstein".

    Returns:
        Paths of shape (steps + 1, paths). Negative rates are reflected to their
        absolute value and counted.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.broadcast_to(np.asarray(r0, dtype=np.float64), w.shape[1:]).copy()
    _check_rate(x)
    values = np.empty((w.shape[0] + 1, *w.shape[1:]))
    values[0] = x
    reflections = 0
    for i in range(w.shape[0]):
        y = np.asarray(cir_step(x, w[i], p, scheme))
        negative = y < 0
        if np.any(negative):
            reflections += int(np.count_nonzero(negative))
            y = np.abs(y)
        values[i + 1] = y
        x = y
    if reflections:
        logging.warning("reflected %d negative rates during CIR simulation", reflections)
    return SimulatedPath(values, reflections)


def simulate_cir_path(
    r0: float,
    steps: int,
    p: CirParams,
    scheme: str = "milstein",
    rng: np.random.Generator | None = None,
) -> SimulatedPath:
    """Simulate one path of length steps + 1 starting from r0."""
    rng = np.random.default_rng() if rng is None else rng
    w = rng.standard_normal((steps, 1))
    path = simulate_cir_ensemble(r0, p, w, scheme)
    return SimulatedPath(path.values[:, 0], path.reflections)


@dataclasses.dataclass(frozen=True)
class GbmParams:
    """Spot, strike, risk-free rate, expiry and volatility of a European call."""

    spot: float = 100.0
    strike: float = 100.0
    rate: float = 0.05
    expiry: float = 1.0
    sigma: Any = 0.2

    def __post_init__(self) -> None:
        """Validate the positive contract terms."""
        for name in ("spot", "strike", "expiry"):
            if not getattr(self, name) > 0:
                raise ad.ContractError(f"GBM {name} must be positive, got {getattr(self, name)}")


def gbm_option_payoff(w: Any, p: GbmParams, tape: ad.Tape | None = None) -> Any:
    """P = max(S_T - K, 0) with S_T = s exp((r - sigma^2/2) T + sigma sqrt(T) W)."""
    sigma = tape.lift(p.sigma) if tape is not None else p.sigma
    drift = ad.multiply(ad.subtract(p.rate, ad.multiply(0.5, ad.square(sigma))), p.expiry)
    diffusion = ad.multiply(ad.multiply(sigma, math.sqrt(p.expiry)), w)
    terminal = ad.multiply(p.spot, ad.exp(ad.add(drift, diffusion)))
    return ad.relu(ad.subtract(terminal, p.strike))


def gbm_payoff_samples(count: int, p: GbmParams, rng: np.random.Generator) -> ad.FloatArray:
    """Draw `count` payoffs with fresh standard normal W."""
    return np.asarray(gbm_option_payoff(rng.standard_normal(count), p))
