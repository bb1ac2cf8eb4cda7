"""Closed-form likelihood oracles for the CIR process.

Maximum-likelihood estimators of the long-run mean tau and the mean-reversion
speed kappa from consecutive Euler-Maruyama pairs, their Fisher information,
the stationary gamma density, and discrete-KL landscapes over one parameter.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Any

import numpy as np
from scipy import special

from anakit import autodiff as ad, models


DEGENERACY_THRESHOLD = 1e-12
CONDITIONING_RATIO = 1e-4
HISTOGRAM_BINS = 50
KL_FLOOR = 1e-12
LANDSCAPE_PARAMETERS = ("kappa", "tau")


class DegeneracyError(ArithmeticError):
    """The likelihood is flat in the requested parameter."""


@dataclasses.dataclass(frozen=True)
class PairSample:
    """Consecutive observations (x_i, y_i) taken dt apart."""

    xs: ad.FloatArray
    ys: ad.FloatArray
    dt: float

    def __post_init__(self) -> None:
        """Validate shapes and positivity of the inputs x_i."""
        xs, ys = np.asarray(self.xs, dtype=np.float64), np.asarray(self.ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ad.ShapeError(
                f"pair sample needs two equal 1-D arrays, got {xs.shape}, {ys.shape}"
            )
        bad = ~(xs > 0)
        if np.any(bad):
            raise ad.DomainError("pair sample inputs must be positive", float(xs[bad][0]))
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        """Number of pairs."""
        return int(self.xs.size)

    @classmethod
    def from_path(cls, path: ad.FloatArray, dt: float) -> PairSample:
        """All consecutive pairs (R_i, R_{i+1}) of a path."""
        path = np.asarray(path, dtype=np.float64)
        return cls(path[:-1], path[1:], dt)


@dataclasses.dataclass(frozen=True)
class MomentStats:
    """X_{-1} = mean of 1/x and X_0 = mean of x."""

    x_minus1: float
    x_0: float


def _require_pairs(s: PairSample) -> None:
    if len(s) == 0:
        raise ad.ContractError("estimator needs at least one pair")


def moment_stats(s: PairSample) -> MomentStats:
    """Sample moments of the inputs x_i."""
    _require_pairs(s)
    return MomentStats(float(np.mean(1.0 / s.xs)), float(np.mean(s.xs)))


def uniform_moments(lo: float, hi: float) -> MomentStats:
    """Moments of U(lo, hi): X_{-1} = ln(hi/lo) / (hi - lo), X_0 = (lo + hi) / 2."""
    if not 0 < lo < hi:
        raise ad.ContractError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    return MomentStats(float(np.log(hi / lo) / (hi - lo)), 0.5 * (lo + hi))


def tau_mle(
    s: PairSample,
    kappa: float,
    sigma: float | None = None,  # noqa: ARG001 [sigma drops out of the estimator]
) -> float:
    """Maximum-likelihood estimate of tau with kappa known.

    tau_n = [mean(y/x) + kappa dt - 1] / [mean(1/x) kappa dt]
    """
    _require_pairs(s)
    kdt = kappa * s.dt
    if kdt == 0:
        raise ad.ContractError("tau estimator needs kappa * dt != 0")
    ratio = float(np.mean(s.ys / s.xs))
    return (ratio + kdt - 1.0) / (float(np.mean(1.0 / s.xs)) * kdt)


def kappa_mle(s: PairSample, tau: float) -> float:
    """Maximum-likelihood estimate of kappa with tau known.

    kappa_n = [tau mean(y/x) - mean(y) - tau + mean(x)]
              / (dt [tau^2 mean(1/x) - 2 tau + mean(x)])

    Raises:
        DegeneracyError: if the denominator vanishes, i.e. the inputs sit at the
            point where the likelihood is flat in kappa.
    """
    _require_pairs(s)
    moments = moment_stats(s)
    denominator = tau * (tau * moments.x_minus1 - 1.0) + (moments.x_0 - tau)
    if abs(denominator) < DEGENERACY_THRESHOLD:
        raise DegeneracyError(
            f"kappa likelihood is flat: tau^2 X_-1 - 2 tau + X_0 = {denominator:.3e};"
            " resample the inputs away from the stationary distribution"
        )
    if abs(denominator) < CONDITIONING_RATIO * tau * tau:
        logging.warning("kappa estimate is ill-conditioned (denominator %.3e)", denominator)
    numerator = tau * float(np.mean(s.ys / s.xs)) - float(np.mean(s.ys)) - tau + moments.x_0
    return numerator / (s.dt * denominator)


def fisher_tau(kappa: float, sigma: float, dt: float, x_minus1: float) -> float:
    """I(tau) = kappa^2 dt X_{-1} / sigma^2."""
    return kappa * kappa * dt * x_minus1 / (sigma * sigma)


def fisher_kappa(tau: float, sigma: float, dt: float, x_minus1: float, x_0: float) -> float:
    """I(kappa) = dt (tau^2 X_{-1} - 2 tau + X_0) / sigma^2."""
    return dt * (tau * (tau * x_minus1 - 1.0) + (x_0 - tau)) / (sigma * sigma)


def tau_asymptotic_std(kappa: float, sigma: float, dt: float, x_minus1: float, n: int) -> float:
    """Standard deviation 1 / sqrt(n I(tau)) of the tau estimator."""
    return float(1.0 / np.sqrt(n * fisher_tau(kappa, sigma, dt, x_minus1)))


def kappa_asymptotic_std(  # noqa: PLR0913 [all Fisher information inputs]
    tau: float, sigma: float, dt: float, x_minus1: float, x_0: float, n: int
) -> float:
    """Standard deviation 1 / sqrt(n I(kappa)) of the kappa estimator."""
    information = fisher_kappa(tau, sigma, dt, x_minus1, x_0)
    if information <= 0:
        return float("inf")
    return float(1.0 / np.sqrt(n * information))


def feller_condition(kappa: float, tau: float, sigma: float) -> bool:
    """2 kappa tau > sigma^2."""
    return 2.0 * kappa * tau > sigma * sigma


def _gamma_shape_rate(kappa: float, tau: float, sigma: float) -> tuple[float, float]:
    rate = 2.0 * kappa / (sigma * sigma)
    return rate * tau, rate


def stationary_density(r: Any, kappa: float, tau: float, sigma: float) -> Any:
    """Gamma density h(r) = w^nu / Gamma(nu) r^(nu-1) exp(-w r).

    With w = 2 kappa / sigma^2 and nu = 2 kappa tau / sigma^2. A violated Feller
    condition is logged; the density is returned regardless.
    """
    r = np.asarray(r, dtype=np.float64)
    bad = ~(r > 0)
    if np.any(bad):
        raise ad.DomainError("stationary density is defined for r > 0", float(r[bad].flat[0]))
    if not feller_condition(kappa, tau, sigma):
        logging.warning(
            "Feller condition 2 kappa tau > sigma^2 violated (kappa=%s, tau=%s, sigma=%s)",
            kappa,
            tau,
            sigma,
        )
    nu, w = _gamma_shape_rate(kappa, tau, sigma)
    log_h = nu * np.log(w) - special.gammaln(nu) + (nu - 1.0) * np.log(r) - w * r
    return np.exp(log_h)


def stationary_moments(kappa: float, tau: float, sigma: float) -> MomentStats:
    """Exact moments of the stationary law: X_{-1} = w / (nu - 1), X_0 = tau.

    X_{-1} is infinite for nu <= 1.
    """
    nu, w = _gamma_shape_rate(kappa, tau, sigma)
    x_minus1 = w / (nu - 1.0) if nu > 1.0 else float("inf")
    return MomentStats(x_minus1, tau)


def resample_uniform(
    p: models.CirParams,
    lo: float,
    hi: float,
    count: int,
    rng: np.random.Generator,
    scheme: str = "em",
) -> PairSample:
    """Pairs with x_i ~ U(lo, hi) and y_i one simulation step from x_i.

    Drawing the inputs away from the stationary law keeps the kappa likelihood
    from degenerating. Negative y_i are reflected like in path simulation.
    """
    if not lo < hi:
        raise ad.ContractError(f"need lo < hi, got lo={lo}, hi={hi}")
    xs = rng.uniform(lo, hi, size=count)
    if count == 0:
        return PairSample(xs, np.empty(0), p.dt)
    ys = np.abs(np.asarray(models.cir_step(xs, rng.standard_normal(count), p, scheme)))
    return PairSample(xs, ys, p.dt)


@dataclasses.dataclass(frozen=True)
class Histogram:
    """Counts on uniform bins; `normalized` marks counts that already sum to one."""

    edges: ad.FloatArray
    counts: ad.FloatArray
    normalized: bool = False

    def __post_init__(self) -> None:
        """Validate edges and counts."""
        edges = np.asarray(self.edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.float64)
        if edges.ndim != 1 or counts.shape != (edges.size - 1,):
            raise ad.ShapeError(f"{edges.size} edges do not bound {counts.size} bins")
        if np.any(np.diff(edges) <= 0):
            raise ad.ContractError("histogram edges must be strictly increasing")
        if np.any(counts < 0):
            raise ad.ContractError("histogram counts must be nonnegative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def bins(self) -> int:
        return int(self.counts.size)

    def probabilities(self) -> ad.FloatArray:
        """Counts scaled to sum to one."""
        total = float(self.counts.sum())
        if total <= 0:
            raise ad.ContractError("cannot normalize an empty histogram")
        return self.counts / total

    def density(self) -> ad.FloatArray:
        """Probabilities divided by bin widths."""
        return self.probabilities() / np.diff(self.edges)

    def normalize(self) -> Histogram:
        return Histogram(self.edges, self.probabilities(), normalized=True)


def histogram(
    samples: Any, bins: int = HISTOGRAM_BINS, value_range: tuple[float, float] | None = None
) -> Histogram:
    """Histogram on `bins` uniform bins spanning `value_range` (default: sample range)."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if value_range is None:
        value_range = (float(samples.min()), float(samples.max()))
    lo, hi = value_range
    if not hi > lo:
        # degenerate range, e.g. a constant sample
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    return Histogram(edges, counts.astype(np.float64))


def shared_histograms(
    reference: Any, candidate: Any, bins: int = HISTOGRAM_BINS
) -> tuple[Histogram, Histogram]:
    """Histograms of two samples on common bins spanning the pooled range."""
    pooled = np.concatenate([np.ravel(reference), np.ravel(candidate)])
    value_range = (float(pooled.min()), float(pooled.max()))
    return histogram(reference, bins, value_range), histogram(candidate, bins, value_range)


def _bin_probabilities(h: Histogram | Any) -> ad.FloatArray:
    if isinstance(h, Histogram):
        return h.probabilities()
    weights = np.asarray(h, dtype=np.float64)
    return weights / weights.sum()


def discrete_kl(p_hist: Histogram | Any, q_hist: Histogram | Any) -> float:
    """Discrete KL divergence sum_i P*_i log(P*_i / P_i).

    Either argument may be a `Histogram` or raw bin weights. Bins with P*_i = 0
    contribute nothing; P_i is floored at 1e-12.

    Raises:
        autodiff.ContractError: if the histograms do not share bins.
    """
    if isinstance(p_hist, Histogram) and isinstance(q_hist, Histogram):
        if not np.array_equal(p_hist.edges, q_hist.edges):
            raise ad.ContractError("histograms do not share bin edges")
    p, q = _bin_probabilities(p_hist), _bin_probabilities(q_hist)
    if p.shape != q.shape:
        raise ad.ContractError(f"bin counts differ: {p.shape} vs {q.shape}")
    support = p > 0
    return float(np.sum(p[support] * np.log(p[support] / np.maximum(q[support], KL_FLOOR))))


@dataclasses.dataclass(frozen=True)
class LandscapeScan:
    """Discrete KL between the path marginals at the true and at scanned parameter values."""

    parameter: str
    grid: ad.FloatArray
    kl: ad.FloatArray
    kl_per_realization: ad.FloatArray

    def curvature_at(self, value: float) -> float:
        """Second difference of the mean KL at the interior grid point nearest `value`."""
        if self.grid.size < 3:  # noqa: PLR2004 [three-point stencil]
            raise ad.ContractError("curvature needs at least three grid points")
        i = int(np.clip(np.argmin(np.abs(self.grid - value)), 1, self.grid.size - 2))
        h = 0.5 * (self.grid[i + 1] - self.grid[i - 1])
        return float((self.kl[i + 1] - 2.0 * self.kl[i] + self.kl[i - 1]) / (h * h))


def kl_landscape(  # noqa: PLR0913 [scan settings]
    parameter: str,
    grid: Any,
    true_params: models.CirParams,
    r0: float,
    steps: int,
    rng: np.random.Generator,
    realizations: int = 10,
    bins: int = HISTOGRAM_BINS,
    scheme: str = "milstein",
) -> LandscapeScan:
    """Scan one CIR parameter and measure the discrete KL to the true path marginal.

    Each realization draws one noise sequence and reuses it for the reference
    path and for every grid point.
    """
    if parameter not in LANDSCAPE_PARAMETERS:
        raise ad.ContractError(f"cannot scan '{parameter}', expected one of {LANDSCAPE_PARAMETERS}")
    grid = np.asarray(grid, dtype=np.float64)
    scanned = dataclasses.replace(true_params, **{parameter: grid})

    per_realization = np.empty((realizations, grid.size))
    for j in range(realizations):
        w = rng.standard_normal((steps, 1))
        reference = models.simulate_cir_ensemble(r0, true_params, w, scheme).values[:, 0]
        paths = models.simulate_cir_ensemble(r0, scanned, np.repeat(w, grid.size, axis=1), scheme)
        for k in range(grid.size):
            p_ref, p_scan = shared_histograms(reference, paths.values[:, k], bins)
            per_realization[j, k] = discrete_kl(p_ref, p_scan)
        logging.info("landscape %s: realization %d/%d done", parameter, j + 1, realizations)

    return LandscapeScan(parameter, grid, per_realization.mean(axis=0), per_realization)
