"""Forward-model bindings x = F(w, θ) used by the adversarial training loop.

A simulator draws the known stochastic input w for a batch and maps it, together
with the current scalar estimates and generated parameter samples, to simulated
observations of the same width as the observed ones.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from typing import Any, Protocol

import numpy as np

from anakit import autodiff as ad, models


STANDARDIZE_FLOOR = 1e-12


@dataclasses.dataclass(frozen=True)
class EstimateValues:
    """Current unknowns as seen by a simulator.

    Attributes:
        scalars: Named scalar estimates, graph nodes while training.
        generated: Generator output of shape (count, d) or None.
    """

    scalars: Mapping[str, Any] = dataclasses.field(default_factory=dict)
    generated: Any = None


class Simulator(Protocol):
    """Binding of one forward model to the training loop."""

    @property
    def observation_dim(self) -> int:
        """Width of one observation vector."""
        ...

    @property
    def scalar_names(self) -> tuple[str, ...]:
        """Names of the scalar parameters this model expects in `EstimateValues`."""
        ...

    @property
    def generated_dim(self) -> int:
        """Width of the generator output the model consumes (0 for none)."""
        ...

    def draw_inputs(self, batch: ad.FloatArray, rng: np.random.Generator) -> ad.FloatArray:
        """Known stochastic input w for simulating a batch matched to `batch`."""
        ...

    def simulate(self, est: EstimateValues, w: ad.FloatArray) -> Any:
        """Simulated observations of shape (len(w), observation_dim)."""
        ...


def _require(est: EstimateValues, name: str) -> Any:
    try:
        return est.scalars[name]
    except KeyError:
        raise ad.ContractError(f"simulator needs a value for '{name}'") from None


def _require_generated(est: EstimateValues, width: int) -> Any:
    if est.generated is None:
        raise ad.ContractError("simulator needs generated parameter samples")
    generated = est.generated
    shape = generated.shape if isinstance(generated, ad.GraphNode) else np.shape(generated)
    if len(shape) != 2 or shape[1] != width:  # noqa: PLR2004 [(count, width) samples]
        raise ad.ShapeError(
            f"expected generated samples of shape (count, {width}), got {shape}"
        )
    return est.generated


@dataclasses.dataclass(frozen=True)
class PoissonSimulator:
    """Nodal Poisson solutions with generated bump centers mu.

    * `sigma` given: sigma is known (distribution-only estimation).
    * `sigma` None: sigma is the scalar estimate "sigma".
    * `joint`: the generator emits (mu, sigma) pairs.
    """

    grid_points: int = models.POISSON_GRID_POINTS
    sigma: float | None = None
    joint: bool = False

    @property
    def observation_dim(self) -> int:
        return self.grid_points

    @property
    def scalar_names(self) -> tuple[str, ...]:
        return ("sigma",) if self.sigma is None and not self.joint else ()

    @property
    def generated_dim(self) -> int:
        return 2 if self.joint else 1

    def draw_inputs(
        self,
        batch: ad.FloatArray,
        rng: np.random.Generator,  # noqa: ARG002 [deterministic model]
    ) -> ad.FloatArray:
        return np.empty((len(batch), 0))

    def simulate(self, est: EstimateValues, w: ad.FloatArray) -> Any:
        generated = _require_generated(est, self.generated_dim)
        if self.joint:
            mu, sigma = generated[:, 0:1], generated[:, 1:2]
        else:
            mu = generated
            sigma = _require(est, "sigma") if self.sigma is None else self.sigma
        if len(w) != np.shape(ad.value_of(mu))[0]:
            raise ad.ShapeError(f"{len(w)} inputs for {np.shape(ad.value_of(mu))[0]} samples")
        return models.poisson_solve(models.PoissonParams(mu, sigma, self.grid_points))


@dataclasses.dataclass(frozen=True)
class CirSimulator:
    """Pairs (x_i, y_i) of the CIR process, x_i taken from the observed batch.

    One of tau and kappa is estimated (named by `estimate`); the other is known.
    """

    kappa: float
    tau: float
    sigma: float
    dt: float
    alpha: float = 0.5
    scheme: str = "milstein"
    estimate: str = "tau"

    def __post_init__(self) -> None:
        """Validate the estimated parameter name and the scheme."""
        if self.estimate not in ("tau", "kappa"):
            raise ad.ContractError(
                f"CIR simulator estimates 'tau' or 'kappa', got '{self.estimate}'"
            )
        if self.scheme not in models.CIR_SCHEMES:
            raise ad.ContractError(f"unknown CIR scheme '{self.scheme}'")

    @property
    def observation_dim(self) -> int:
        return 2

    @property
    def scalar_names(self) -> tuple[str, ...]:
        return (self.estimate,)

    @property
    def generated_dim(self) -> int:
        return 0

    def params(self, est: EstimateValues) -> models.CirParams:
        known = {"kappa": self.kappa, "tau": self.tau}
        known[self.estimate] = _require(est, self.estimate)
        return models.CirParams(known["kappa"], known["tau"], self.sigma, self.dt, self.alpha)

    def draw_inputs(self, batch: ad.FloatArray, rng: np.random.Generator) -> ad.FloatArray:
        """Columns: observed x_i and a standard normal W_i."""
        batch = np.asarray(batch, dtype=np.float64)
        return np.column_stack([batch[:, 0], rng.standard_normal(len(batch))])

    def simulate(self, est: EstimateValues, w: ad.FloatArray) -> Any:
        x, noise = w[:, 0], w[:, 1]
        y = models.cir_step(x, noise, self.params(est), self.scheme)
        return ad.concat([x.reshape(-1, 1), ad.reshape(y, (-1, 1))], axis=1)


@dataclasses.dataclass(frozen=True)
class OptionSimulator:
    """European call payoffs with the volatility "sigma" estimated."""

    spot: float = 100.0
    strike: float = 100.0
    rate: float = 0.05
    expiry: float = 1.0

    @property
    def observation_dim(self) -> int:
        return 1

    @property
    def scalar_names(self) -> tuple[str, ...]:
        return ("sigma",)

    @property
    def generated_dim(self) -> int:
        return 0

    def draw_inputs(self, batch: ad.FloatArray, rng: np.random.Generator) -> ad.FloatArray:
        return rng.standard_normal((len(batch), 1))

    def simulate(self, est: EstimateValues, w: ad.FloatArray) -> Any:
        p = models.GbmParams(self.spot, self.strike, self.rate, self.expiry, _require(est, "sigma"))
        return models.gbm_option_payoff(w, p)


@dataclasses.dataclass(frozen=True)
class Standardizer:
    """Affine map (x - shift) / scale applied to discriminator inputs.

    Fixed from the observations so real and simulated batches see the same map.
    """

    shift: ad.FloatArray
    scale: ad.FloatArray

    @classmethod
    def fit(cls, observations: Any) -> Standardizer:
        """Column means and standard deviations (unit scale for constant columns)."""
        observations = np.asarray(observations, dtype=np.float64)
        if observations.ndim != 2 or len(observations) == 0:  # noqa: PLR2004 [(count, width) data]
            raise ad.ShapeError(
                f"observations must be a nonempty 2-D array, got {observations.shape}"
            )
        scale = observations.std(axis=0)
        scale[scale < STANDARDIZE_FLOOR] = 1.0
        return cls(observations.mean(axis=0), scale)

    @classmethod
    def identity(cls, width: int) -> Standardizer:
        return cls(np.zeros(width), np.ones(width))

    def __call__(self, x: Any) -> Any:
        return ad.divide(ad.subtract(x, self.shift), self.scale)
