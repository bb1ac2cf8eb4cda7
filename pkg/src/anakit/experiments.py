"""End-to-end experiments: synthetic data, adversarial training, oracles and reports.

Artifacts of one run are written to the experiment's output directory:

* observations.csv, parameters.csv, manifest.json: generated data set
* history.csv: one row per outer iteration
* summary.json: final estimates and run statistics
* generated.csv, generated_histogram*.csv: generator samples (distribution runs)
* landscape_kappa.csv, landscape_tau.csv: discrete-KL scans
"""

from __future__ import annotations

import dataclasses
import logging
import math
import pathlib
from collections.abc import Callable
from typing import Any

import numpy as np
from scipy import stats

from anakit import (
    autodiff as ad,
    config,
    losses,
    models,
    neural,
    oracle,
    simulators,
    trainer,
    utils,
)


REFERENCE_DRAWS = 10_000
GENERATED_DRAWS = 10_000
DATA_STREAM = 0
INIT_STREAM = 1
REPORT_STREAM = 2

EXIT_OK = 0
EXIT_ABORTED = 1


class UnknownTargetError(LookupError):
    """A target-spec string names no known distribution or has bad parameters."""


@dataclasses.dataclass(frozen=True)
class Target:
    """A reference distribution for generated parameter samples.

    Attributes:
        name: Target tag.
        params: Parameters the target was built with.
        sampler: Draws `count` samples (rows for 2-D targets).
        mean: Analytic mean, None where it does not exist.
        variance: Analytic variance, None where it does not exist.
        dim: 1 or 2.
    """

    name: str
    params: dict[str, float]
    sampler: Callable[[int, np.random.Generator], np.ndarray]
    mean: Any = None
    variance: Any = None
    dim: int = 1

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.sampler(count, rng)


def _finite(value: Any) -> Any:
    value = np.asarray(value, dtype=np.float64)
    return value if np.all(np.isfinite(value)) else None


def _scipy_target(name: str, params: dict[str, float], dist: Any) -> Target:
    return Target(
        name,
        params,
        lambda count, rng: np.asarray(dist.rvs(size=count, random_state=rng), dtype=np.float64),
        _finite(dist.mean()),
        _finite(dist.var()),
    )


def _mixture(p: dict[str, float]) -> Target:
    weights = np.array([p["w1"], 1.0 - p["w1"]])
    locs = np.array([p["loc1"], p["loc2"]])
    scales = np.array([p["scale1"], p["scale2"]])

    def sample(count: int, rng: np.random.Generator) -> np.ndarray:
        component = rng.choice(2, size=count, p=weights)
        return rng.normal(locs[component], scales[component])

    mean = float(weights @ locs)
    variance = float(weights @ (scales**2 + locs**2)) - mean**2
    return Target("mixture", p, sample, mean, variance)


def _dirichlet(name: str, p: dict[str, float]) -> Target:
    alpha = np.array([p["a1"], p["a2"], p["a3"]])
    dist = stats.dirichlet(alpha)
    return Target(
        name,
        p,
        lambda count, rng: dist.rvs(size=count, random_state=rng)[:, :2],
        dist.mean()[:2],
        dist.var()[:2],
        dim=2,
    )


def _gaussian2d(p: dict[str, float]) -> Target:
    mean = np.array([p["mean1"], p["mean2"]])
    cov = np.array([[p["var1"], p["cov"]], [p["cov"], p["var2"]]])
    dist = stats.multivariate_normal(mean, cov)
    return Target(
        "gaussian2d",
        p,
        lambda count, rng: np.asarray(dist.rvs(size=count, random_state=rng)).reshape(count, 2),
        mean,
        np.diag(cov),
        dim=2,
    )


# name -> (default parameters, builder)
_TARGETS: dict[str, tuple[dict[str, float], Callable[[dict[str, float]], Target]]] = {
    "normal": (
        {"loc": 0.3, "scale": 0.1},
        lambda p: _scipy_target("normal", p, stats.norm(p["loc"], p["scale"])),
    ),
    "mixture": (
        {"w1": 0.4, "loc1": 0.3, "scale1": 0.1, "loc2": 0.8, "scale2": 0.05},
        _mixture,
    ),
    "exponential": (
        {"rate": 1.0},
        lambda p: _scipy_target("exponential", p, stats.expon(scale=1.0 / p["rate"])),
    ),
    "f": ({"dfn": 5.0, "dfd": 2.0}, lambda p: _scipy_target("f", p, stats.f(p["dfn"], p["dfd"]))),
    "arcsine": ({}, lambda p: _scipy_target("arcsine", p, stats.arcsine())),
    "beta": ({"a": 1.0, "b": 3.0}, lambda p: _scipy_target("beta", p, stats.beta(p["a"], p["b"]))),
    "cauchy": (
        {"loc": 0.0, "scale": 0.5},
        lambda p: _scipy_target("cauchy", p, stats.cauchy(p["loc"], p["scale"])),
    ),
    # raised cosine on [mu - s, mu + s]
    "cosine": (
        {"mu": 0.5, "s": 0.5},
        lambda p: _scipy_target("cosine", p, stats.cosine(loc=p["mu"], scale=p["s"] / math.pi)),
    ),
    "gaussian2d": (
        {"mean1": 0.3, "mean2": 1.0, "var1": 0.1, "var2": 0.1, "cov": -0.05},
        _gaussian2d,
    ),
    "dirichlet": ({"a1": 1.0, "a2": 1.0, "a3": 1.0}, lambda p: _dirichlet("dirichlet", p)),
    "dirichlet111": ({"a1": 1.0, "a2": 1.0, "a3": 1.0}, lambda p: _dirichlet("dirichlet111", p)),
    "dirichlet123": ({"a1": 1.0, "a2": 2.0, "a3": 3.0}, lambda p: _dirichlet("dirichlet123", p)),
}

PANEL_TARGETS = ("exponential", "f", "arcsine", "beta", "cauchy", "cosine")


def target_names() -> list[str]:
    return sorted(_TARGETS)


def parse_target(spec: str) -> Target:
    """Build a target from "name" or "name:key=value,key=value".

    Raises:
        UnknownTargetError: for an unknown name, key or a non-numeric value.
    """
    name, _, arguments = spec.strip().partition(":")
    if name not in _TARGETS:
        raise UnknownTargetError(f"unknown target '{name}', expected one of {target_names()}")
    defaults, build = _TARGETS[name]
    params = dict(defaults)
    for item in filter(None, (a.strip() for a in arguments.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in defaults:
            raise UnknownTargetError(f"target '{name}' has no parameter '{key}'")
        try:
            params[key] = float(value)
        except ValueError:
            raise UnknownTargetError(
                f"parameter '{key}' of target '{name}' must be a number"
            ) from None
    try:
        return build(params)
    except ValueError as e:
        raise UnknownTargetError(f"invalid parameters for target '{name}': {e}") from None


@dataclasses.dataclass(frozen=True)
class ComparisonReport:
    """Generated sample against a target: KS statistic and moment errors."""

    target: str
    sample_size: int
    ks_statistic: float
    sample_mean: float
    sample_variance: float
    target_mean: float | None
    target_variance: float | None

    @property
    def mean_error(self) -> float | None:
        return None if self.target_mean is None else abs(self.sample_mean - self.target_mean)

    @property
    def variance_error(self) -> float | None:
        if self.target_variance is None:
            return None
        return abs(self.sample_variance - self.target_variance)

    def to_dict(self) -> dict[str, Any]:
        return {
            **dataclasses.asdict(self),
            "mean_error": self.mean_error,
            "variance_error": self.variance_error,
        }


def compare_histogram(
    samples: Any,
    target: Target | str,
    rng: np.random.Generator | None = None,
    reference_draws: int = REFERENCE_DRAWS,
) -> ComparisonReport:
    """Two-sample KS statistic against fresh target draws plus first/second moments.

    Moments of targets without finite moments (Cauchy; variance of F(5, 2)) are
    reported as None.
    """
    if isinstance(target, str):
        target = parse_target(target)
    if target.dim != 1:
        raise ad.ContractError(f"target '{target.name}' is {target.dim}-dimensional")
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size == 0:
        raise ad.ContractError("cannot compare an empty sample")
    rng = np.random.default_rng() if rng is None else rng
    reference = target.sample(reference_draws, rng)
    ks = stats.ks_2samp(samples, reference)
    return ComparisonReport(
        target.name,
        int(samples.size),
        float(ks.statistic),
        float(samples.mean()),
        float(samples.var()),
        None if target.mean is None else float(target.mean),
        None if target.variance is None else float(target.variance),
    )


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Generated observations and the files they were written to."""

    observations: np.ndarray
    parameters: np.ndarray | None
    files: dict[str, pathlib.Path]
    true_parameters: dict[str, Any]


@dataclasses.dataclass(frozen=True)
class RunResult:
    """Exit status, artifact paths and the summary written to summary.json."""

    status: int
    artifacts: dict[str, pathlib.Path]
    summary: dict[str, Any]


def _stream(spec: config.ExperimentSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, stream])


def _cir_params(model: dict[str, Any], **overrides: float) -> models.CirParams:
    values = {
        "kappa": model.get("kappa_true", model["kappa"]),
        "tau": model.get("tau_true", model["tau"]),
        "sigma": model["sigma"],
        "dt": model["dt"],
        "alpha": model["alpha"],
    }
    values.update(overrides)
    return models.CirParams(**values)


def _poisson_simulator(spec: config.ExperimentSpec) -> simulators.PoissonSimulator:
    model = spec.model
    if spec.name == "poisson-2d":
        return simulators.PoissonSimulator(model["grid_points"], joint=True)
    if spec.name == "poisson-mixture":
        return simulators.PoissonSimulator(model["grid_points"], sigma=model["sigma"])
    return simulators.PoissonSimulator(model["grid_points"])


def _spec_target(spec: config.ExperimentSpec) -> Target:
    if spec.name == "poisson-uq":
        return parse_target(f"normal:loc={spec.model['mu_mean']},scale={spec.model['mu_std']}")
    return parse_target(spec.model["target"])


def _generate(spec: config.ExperimentSpec, rng: np.random.Generator) -> Dataset:
    model = spec.model
    if spec.name.startswith("poisson"):
        target = _spec_target(spec)
        simulator = _poisson_simulator(spec)
        draws = target.sample(spec.observations, rng).reshape(spec.observations, -1)
        if spec.name == "poisson-2d":
            # sigma enters through sigma^2, so (mu, |sigma|) is what can be identified
            draws[:, 1] = np.abs(draws[:, 1])
        scalars = {"sigma": model["sigma_true"]} if spec.name == "poisson-uq" else {}
        observations = simulator.simulate(
            simulators.EstimateValues(scalars, draws), np.empty((spec.observations, 0))
        )
        truth = {"target": target.name, **target.params, **scalars}
        return Dataset(np.asarray(observations), draws, {}, truth)

    if spec.name in ("cir-tau", "mle-oracle", "cir-landscape"):
        p = _cir_params(model)
        path = models.simulate_cir_path(model["r0"], model["path_length"], p, model["scheme"], rng)
        pairs = np.column_stack(path.pairs())
        truth = dataclasses.asdict(p) | {"r0": model["r0"], "reflections": path.reflections}
        return Dataset(pairs, path.values.reshape(-1, 1), {}, truth)

    if spec.name == "cir-kappa":
        p = _cir_params(model)
        low, high = model["resample_low"], model["resample_high"]
        sample = oracle.resample_uniform(p, low, high, spec.observations, rng, model["scheme"])
        return Dataset(np.column_stack([sample.xs, sample.ys]), None, {}, dataclasses.asdict(p))

    p_gbm = models.GbmParams(
        model["spot"], model["strike"], model["rate"], model["expiry"], model["sigma_true"]
    )
    payoffs = models.gbm_payoff_samples(spec.observations, p_gbm, rng)
    return Dataset(payoffs.reshape(-1, 1), None, {}, dataclasses.asdict(p_gbm))


def _observation_columns(spec: config.ExperimentSpec, width: int) -> list[str]:
    if spec.name.startswith("poisson"):
        return [f"u_{i + 1}" for i in range(width)]
    if spec.name.startswith("cir") or spec.name == "mle-oracle":
        return ["x", "y"]
    return ["payoff"]


def make_dataset(spec: config.ExperimentSpec) -> Dataset:
    """Generate the synthetic data set of `spec` and write it with a manifest.

    The manifest is itself a configuration: generating again from it reproduces
    the same files.
    """
    out_dir = utils.ensure_directory(spec.out_dir)
    data = _generate(spec, _stream(spec, DATA_STREAM))
    files = {
        "observations": utils.write_csv(
            out_dir / "observations.csv",
            _observation_columns(spec, data.observations.shape[1]),
            data.observations,
        )
    }
    if data.parameters is not None:
        if spec.name == "poisson-2d":
            columns = ["mu", "sigma"]
        elif spec.name.startswith("poisson"):
            columns = ["mu"]
        else:
            columns = ["r"]
        files["parameters"] = utils.write_csv(out_dir / "parameters.csv", columns, data.parameters)

    manifest = spec.to_document()
    manifest["dataset"] = {
        "format_version": config.DATASET_FORMAT,
        "files": {k: v.name for k, v in files.items()},
        "true_parameters": data.true_parameters,
    }
    files["manifest"] = utils.write_json(out_dir / "manifest.json", manifest)
    logging.info("wrote %d observations to %s", len(data.observations), files["observations"])
    return dataclasses.replace(data, files=files)


def load_observations(path: pathlib.Path) -> np.ndarray:
    _, data = utils.read_csv(path)
    if len(data) == 0:
        raise ad.ContractError(f"no observations in {path}")
    return data


def build_problem(
    spec: config.ExperimentSpec, rng: np.random.Generator
) -> tuple[simulators.Simulator, trainer.Estimand]:
    """Forward-model binding and initial estimand for a training experiment."""
    model = spec.model
    if spec.name.startswith("poisson"):
        simulator = _poisson_simulator(spec)
        generator = neural.generator(spec.noise, simulator.generated_dim, rng)
        if spec.name == "poisson-uq":
            truth = {"sigma": model["sigma_true"]}
            return simulator, trainer.Estimand(
                ["sigma"], [model["sigma_init"]], generator, spec.noise, truth
            )
        return simulator, trainer.Estimand([], [], generator, spec.noise)

    if spec.name in ("cir-tau", "cir-kappa"):
        unknown = spec.name.removeprefix("cir-")
        cir = simulators.CirSimulator(
            model["kappa"],
            model["tau"],
            model["sigma"],
            model["dt"],
            model["alpha"],
            model["scheme"],
            unknown,
        )
        return cir, trainer.Estimand(
            [unknown], [model[f"{unknown}_init"]], true_values={unknown: model[f"{unknown}_true"]}
        )

    if spec.name == "option-vol":
        option = simulators.OptionSimulator(
            model["spot"], model["strike"], model["rate"], model["expiry"]
        )
        return option, trainer.Estimand(
            ["sigma"], [model["sigma_init"]], true_values={"sigma": model["sigma_true"]}
        )

    raise ad.ContractError(f"experiment '{spec.name}' does not train")


def _distribution_artifacts(
    spec: config.ExperimentSpec, run: trainer.Trainer, out_dir: pathlib.Path
) -> tuple[dict[str, pathlib.Path], dict[str, Any]]:
    rng = _stream(spec, REPORT_STREAM)
    generated = run.sample_generator(GENERATED_DRAWS, rng)
    artifacts: dict[str, pathlib.Path] = {}
    report: dict[str, Any] = {}
    target = _spec_target(spec)

    if generated.shape[1] == 1:
        reference = target.sample(GENERATED_DRAWS, rng)
        hist_generated, hist_target = oracle.shared_histograms(
            generated, reference, spec.histogram_bins
        )
        artifacts["generated"] = utils.write_csv(out_dir / "generated.csv", ["mu"], generated)
        artifacts["generated_histogram"] = utils.write_histogram(
            out_dir / "generated_histogram.csv", hist_generated
        )
        artifacts["target_histogram"] = utils.write_histogram(
            out_dir / "target_histogram.csv", hist_target
        )
        report["comparison"] = compare_histogram(generated, target, rng).to_dict()
        return artifacts, report

    generated = np.column_stack([generated[:, 0], np.abs(generated[:, 1])])
    artifacts["generated"] = utils.write_csv(
        out_dir / "generated.csv", ["mu", "abs_sigma"], generated
    )
    for i, column in enumerate(("mu", "abs_sigma")):
        artifacts[f"generated_histogram_{column}"] = utils.write_histogram(
            out_dir / f"generated_histogram_{column}.csv",
            oracle.histogram(generated[:, i], spec.histogram_bins),
        )
    reference = target.sample(GENERATED_DRAWS, rng)
    reference[:, 1] = np.abs(reference[:, 1])
    report["covariance"] = {
        "generated_mean": generated.mean(axis=0).tolist(),
        "generated_covariance": np.cov(generated, rowvar=False).tolist(),
        "target_mean": reference.mean(axis=0).tolist(),
        "target_covariance": np.cov(reference, rowvar=False).tolist(),
    }
    return artifacts, report


def _training_summary(spec: config.ExperimentSpec, run: trainer.Trainer) -> dict[str, Any]:
    history = run.history
    pair = losses.loss_pair(spec.train.loss)
    summary: dict[str, Any] = {
        "experiment": spec.name,
        "seed": spec.seed,
        "estimand": run.est.kind,
        "iterations": len(history),
        "stopped_early": history.stopped_early,
        "estimates": run.est.estimates(),
        "true_values": run.est.true_values,
        "equilibrium": {
            "model_loss": pair.equilibrium_model_loss,
            "discriminator_loss": pair.equilibrium_discriminator_loss,
        },
        "events": dict(history.events),
    }
    if len(history):
        summary["final_losses"] = {
            "model_loss": history.records[-1].model_loss,
            "discriminator_loss": history.records[-1].discriminator_loss,
        }
        summary["tail_mean"] = {
            name: history.tail_mean(name)
            for name in ("model_loss", "discriminator_loss", *history.estimate_names())
        }
    return summary


def run_training(spec: config.ExperimentSpec) -> RunResult:
    """Generate or load observations, train, and write history and reports."""
    out_dir = utils.ensure_directory(spec.out_dir)
    if spec.data_file is not None:
        observations = load_observations(spec.data_file)
        artifacts = {"observations": spec.data_file}
    else:
        data = make_dataset(spec)
        observations, artifacts = data.observations, dict(data.files)

    simulator, est = build_problem(spec, _stream(spec, INIT_STREAM))
    checkpoints = out_dir / "checkpoints" if spec.train.checkpoint_interval else None
    run = trainer.Trainer(spec.train, simulator, observations, est, checkpoint_dir=checkpoints)

    status = EXIT_OK
    error = None
    try:
        run.train()
    except (trainer.TrainingAbortedError, ad.DomainError) as e:
        logging.error("training aborted: %s", e)
        status, error = EXIT_ABORTED, str(e)

    artifacts["history"] = run.history.to_csv(out_dir / "history.csv")
    summary = _training_summary(spec, run)
    if error is not None:
        summary["error"] = error
    if status == EXIT_OK:
        artifacts["discriminator"] = out_dir / "discriminator.txt"
        neural.save(run.discriminator, artifacts["discriminator"])
        if est.generator is not None:
            artifacts["generator"] = out_dir / "generator.txt"
            neural.save(est.generator, artifacts["generator"])
            more, report = _distribution_artifacts(spec, run, out_dir)
            artifacts.update(more)
            summary.update(report)
    artifacts["summary"] = utils.write_json(out_dir / "summary.json", summary)
    return RunResult(status, artifacts, summary)


def _grid(model: dict[str, Any], parameter: str) -> np.ndarray:
    """Explicit `<parameter>_grid` values, else evenly spaced points over `<parameter>_range`."""
    values = model.get(f"{parameter}_grid")
    if values is not None:
        return np.asarray(values, dtype=np.float64)
    lo, hi = model[f"{parameter}_range"]
    return np.linspace(lo, hi, model[f"{parameter}_points"])


def run_landscape(spec: config.ExperimentSpec) -> RunResult:
    """Discrete-KL scans over kappa and over tau around the true parameters."""
    out_dir = utils.ensure_directory(spec.out_dir)
    model = {**config.EXPERIMENT_DEFAULTS["cir-landscape"]["model"], **spec.model}
    p = models.CirParams(model["kappa"], model["tau"], model["sigma"], model["dt"], model["alpha"])
    if not p.feller():
        logging.warning("landscape parameters violate the Feller condition")
    rng = _stream(spec, DATA_STREAM)

    artifacts: dict[str, pathlib.Path] = {}
    curvature: dict[str, float] = {}
    for parameter, true_value in (("kappa", model["kappa"]), ("tau", model["tau"])):
        scan = oracle.kl_landscape(
            parameter,
            _grid(model, parameter),
            p,
            model["r0"],
            model["path_length"],
            rng,
            realizations=model["realizations"],
            bins=spec.histogram_bins,
            scheme=model["scheme"],
        )
        artifacts[f"landscape_{parameter}"] = utils.write_csv(
            out_dir / f"landscape_{parameter}.csv",
            ["parameter_value", "discrete_kl"],
            np.column_stack([scan.grid, scan.kl]),
        )
        curvature[parameter] = scan.curvature_at(true_value)

    summary = {
        "experiment": "cir-landscape",
        "seed": spec.seed,
        "curvature": curvature,
        "curvature_ratio": curvature["kappa"] / curvature["tau"] if curvature["tau"] else None,
    }
    artifacts["summary"] = utils.write_json(out_dir / "summary.json", summary)
    return RunResult(EXIT_OK, artifacts, summary)


def mle_report(spec: config.ExperimentSpec) -> dict[str, Any]:
    """Closed-form estimates of tau and kappa with their Fisher information and 3-sigma bounds."""
    model = spec.model
    p = _cir_params(model)
    rng = _stream(spec, DATA_STREAM)
    path = models.simulate_cir_path(model["r0"], model["path_length"], p, model["scheme"], rng)
    pairs = oracle.PairSample.from_path(path.values, p.dt)
    n = len(pairs)

    tau_hat = oracle.tau_mle(pairs, p.kappa, p.sigma)
    tau_std = oracle.tau_asymptotic_std(p.kappa, p.sigma, p.dt, 1.0 / p.tau, n)
    report: dict[str, Any] = {
        "pairs": n,
        "tau_mle": tau_hat,
        "tau_true": p.tau,
        "tau_bound": 3.0 * tau_std,
        "tau_within_bound": abs(tau_hat - p.tau) <= 3.0 * tau_std,
        "fisher_tau": oracle.fisher_tau(p.kappa, p.sigma, p.dt, 1.0 / p.tau),
        "feller": oracle.feller_condition(p.kappa, p.tau, p.sigma),
    }

    stationary = oracle.stationary_moments(p.kappa, p.tau, p.sigma)
    observed = oracle.moment_stats(pairs)
    report["stationary_x_minus1"] = stationary.x_minus1
    report["fisher_kappa_stationary"] = oracle.fisher_kappa(
        p.tau, p.sigma, p.dt, stationary.x_minus1, stationary.x_0
    )
    report["fisher_kappa_path"] = oracle.fisher_kappa(
        p.tau, p.sigma, p.dt, observed.x_minus1, observed.x_0
    )
    try:
        report["kappa_mle_path"] = oracle.kappa_mle(pairs, p.tau)
    except oracle.DegeneracyError as e:
        report["kappa_mle_path"] = None
        report["kappa_degeneracy"] = str(e)

    resampled = oracle.resample_uniform(
        p, model["resample_low"], model["resample_high"], n, rng, model["scheme"]
    )
    moments = oracle.uniform_moments(model["resample_low"], model["resample_high"])
    kappa_std = oracle.kappa_asymptotic_std(p.tau, p.sigma, p.dt, moments.x_minus1, moments.x_0, n)
    kappa_hat = oracle.kappa_mle(resampled, p.tau)
    report.update(
        {
            "kappa_mle_resampled": kappa_hat,
            "kappa_true": p.kappa,
            "kappa_bound": 3.0 * kappa_std,
            "kappa_within_bound": abs(kappa_hat - p.kappa) <= 3.0 * kappa_std,
            "fisher_kappa_resampled": oracle.fisher_kappa(
                p.tau, p.sigma, p.dt, moments.x_minus1, moments.x_0
            ),
        }
    )
    return report


def run_mle_oracle(spec: config.ExperimentSpec) -> RunResult:
    out_dir = utils.ensure_directory(spec.out_dir)
    summary = {"experiment": "mle-oracle", "seed": spec.seed, **mle_report(spec)}
    artifacts = {"summary": utils.write_json(out_dir / "summary.json", summary)}
    return RunResult(EXIT_OK, artifacts, summary)


def run_experiment(spec: config.ExperimentSpec) -> RunResult:
    """Run one experiment end to end.

    Returns:
        The result; status 0 on completion and 1 when training aborted (the
        history and summary written so far are kept).
    """
    logging.info("running experiment %s (seed %d) into %s", spec.name, spec.seed, spec.out_dir)
    if spec.name == "cir-landscape":
        return run_landscape(spec)
    if spec.name == "mle-oracle":
        return run_mle_oracle(spec)
    return run_training(spec)
