"""Tests for experiments.py module."""

from __future__ import annotations

import math
import pathlib
from typing import Any

import numpy as np
import pytest

from anakit import autodiff as ad, config, experiments, utils


def _spec(name: str, out_dir: pathlib.Path, **sections: dict[str, Any]) -> config.ExperimentSpec:
    document: dict[str, Any] = {"experiment": {"name": name, "out_dir": str(out_dir)}}
    for section, values in sections.items():
        document.setdefault(section, {}).update(values)
    spec = config.parse_config(document)
    assert isinstance(spec, config.ExperimentSpec), spec
    return spec


def test_parse_target() -> None:
    """Unit tests for method."""
    beta = experiments.parse_target("beta")
    assert beta.params == {"a": 1.0, "b": 3.0}
    assert beta.mean == pytest.approx(0.25)
    assert beta.variance == pytest.approx(3.0 / 80.0)

    normal = experiments.parse_target(" normal:loc=1, scale=2 ")
    assert normal.params == {"loc": 1.0, "scale": 2.0}
    assert normal.mean == pytest.approx(1.0)
    assert normal.variance == pytest.approx(4.0)

    mixture = experiments.parse_target("mixture")
    assert mixture.mean == pytest.approx(0.6)

    cauchy = experiments.parse_target("cauchy")
    assert cauchy.mean is None
    assert cauchy.variance is None
    assert experiments.parse_target("f").variance is None

    dirichlet = experiments.parse_target("dirichlet123")
    assert dirichlet.dim == 2
    assert dirichlet.sample(5, np.random.default_rng(0)).shape == (5, 2)
    gaussian = experiments.parse_target("gaussian2d")
    assert gaussian.sample(7, np.random.default_rng(0)).shape == (7, 2)


@pytest.mark.parametrize(
    ("spec", "message"),
    [
        ("gumbel", "unknown target"),
        ("beta:c=1", "no parameter"),
        ("beta:a", "no parameter"),
        ("beta:a=one", "must be a number"),
    ],
)
def test_parse_target_errors(spec: str, message: str) -> None:
    """Unit tests for method."""
    with pytest.raises(experiments.UnknownTargetError, match=message):
        experiments.parse_target(spec)


def test_target_names() -> None:
    """Unit tests for method."""
    names = experiments.target_names()
    assert names == sorted(names)
    assert set(experiments.PANEL_TARGETS) <= set(names)
    assert {"mixture", "gaussian2d", "dirichlet111", "dirichlet123"} <= set(names)


def test_compare_histogram() -> None:
    """Unit tests for method."""
    rng = np.random.default_rng(0)
    beta = experiments.parse_target("beta")
    report = experiments.compare_histogram(beta.sample(10_000, rng), beta, rng)
    assert report.ks_statistic < 0.03  # noqa: PLR2004
    assert report.sample_size == 10_000
    assert report.target_mean == pytest.approx(0.25)
    assert report.mean_error < 0.01  # noqa: PLR2004

    constant = experiments.compare_histogram(np.full(100, 5.0), "beta", rng)
    assert constant.ks_statistic == pytest.approx(1.0)
    assert constant.sample_variance == 0.0

    cauchy = experiments.compare_histogram(np.zeros(10), "cauchy", rng).to_dict()
    assert cauchy["mean_error"] is None
    assert cauchy["variance_error"] is None


def test_compare_histogram_reports_beta_mean() -> None:
    """Unit tests for method."""
    rng = np.random.default_rng(3)
    samples = rng.beta(1.0, 3.0, size=5000)
    report = experiments.compare_histogram(samples, "beta:a=1,b=3", rng).to_dict()
    assert report["target"] == "beta"
    assert report["target_mean"] == pytest.approx(0.25, abs=1e-12)
    assert report["sample_mean"] == pytest.approx(0.25, abs=0.01)
    assert report["target_variance"] == pytest.approx(3.0 / 80.0)


def test_compare_histogram_errors() -> None:
    """Unit tests for method."""
    with pytest.raises(ad.ContractError):
        experiments.compare_histogram(np.empty(0), "beta")
    with pytest.raises(ad.ContractError):
        experiments.compare_histogram(np.ones(10), "gaussian2d")
    with pytest.raises(experiments.UnknownTargetError):
        experiments.compare_histogram(np.ones(10), "gumbel")


def test_make_dataset_option(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec("option-vol", tmp_path / "first")
    data = experiments.make_dataset(spec)
    assert data.observations.shape == (100, 1)
    assert np.all(data.observations >= 0)
    assert data.parameters is None
    assert set(data.files) == {"observations", "manifest"}
    assert data.true_parameters["sigma"] == 0.2

    again = experiments.make_dataset(spec.with_overrides(out_dir=tmp_path / "second"))
    assert (
        again.files["observations"].read_bytes() == data.files["observations"].read_bytes()
    )

    other_seed = experiments.make_dataset(spec.with_overrides(seed=1, out_dir=tmp_path / "third"))
    assert not np.array_equal(other_seed.observations, data.observations)


def test_manifest_reproduces_dataset(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec("cir-tau", tmp_path, experiment={"seed": 5}, model={"path_length": 200})
    data = experiments.make_dataset(spec)
    before = data.files["observations"].read_bytes()

    manifest = utils.read_json(data.files["manifest"])
    assert manifest["dataset"]["files"]["observations"] == "observations.csv"
    assert manifest["dataset"]["true_parameters"]["tau"] == 0.06

    restored = config.load_config(data.files["manifest"])
    assert restored == spec
    experiments.make_dataset(restored)
    assert data.files["observations"].read_bytes() == before


def test_make_dataset_cir_path(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    data = experiments.make_dataset(_spec("cir-tau", tmp_path))
    assert data.observations.shape == (4000, 2)
    assert data.parameters.shape == (4001, 1)
    assert np.all(data.parameters > 0)
    np.testing.assert_array_equal(data.observations[1:, 0], data.observations[:-1, 1])

    columns, path = utils.read_csv(data.files["parameters"])
    assert columns == ["r"]
    np.testing.assert_array_equal(path, data.parameters)


def test_make_dataset_poisson(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    data = experiments.make_dataset(
        _spec("poisson-uq", tmp_path / "uq", experiment={"observations": 40})
    )
    assert data.observations.shape == (40, 100)
    assert np.all(data.observations > 0)
    assert data.true_parameters["sigma"] == 0.1
    assert data.true_parameters["target"] == "normal"

    joint = experiments.make_dataset(
        _spec("poisson-2d", tmp_path / "joint", experiment={"observations": 40})
    )
    columns, parameters = utils.read_csv(joint.files["parameters"])
    assert columns == ["mu", "sigma"]
    assert parameters.shape == (40, 2)
    assert np.all(parameters[:, 1] >= 0)


def test_make_dataset_resampled(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    data = experiments.make_dataset(
        _spec("cir-kappa", tmp_path, experiment={"observations": 300})
    )
    assert data.observations.shape == (300, 2)
    assert np.all((data.observations[:, 0] >= 0.001) & (data.observations[:, 0] <= 0.03))
    assert np.all(data.observations[:, 1] >= 0)


def test_build_problem(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    rng = np.random.default_rng(0)
    simulator, est = experiments.build_problem(_spec("poisson-uq", tmp_path), rng)
    assert simulator.observation_dim == 100
    assert est.names == ["sigma"]
    assert est.generator is not None
    assert est.true_values == {"sigma": 0.1}

    _, mixture = experiments.build_problem(_spec("poisson-mixture", tmp_path), rng)
    assert mixture.names == []
    assert mixture.generator is not None

    _, kappa = experiments.build_problem(_spec("cir-kappa", tmp_path), rng)
    assert kappa.estimates() == {"kappa": 0.2}
    _, tau = experiments.build_problem(_spec("cir-tau", tmp_path), rng)
    assert tau.estimates() == {"tau": 0.1}

    with pytest.raises(ad.ContractError):
        experiments.build_problem(_spec("mle-oracle", tmp_path), rng)


def test_run_training_short(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec("option-vol", tmp_path, train={"max_iterations": 4})
    result = experiments.run_experiment(spec)
    assert result.status == experiments.EXIT_OK
    assert result.summary["iterations"] == 4
    assert result.summary["estimand"] == "scalar-parameters"
    assert set(result.summary["estimates"]) == {"sigma"}
    assert result.summary["equilibrium"]["model_loss"] == pytest.approx(math.log(2.0))
    for name in ("observations", "history", "summary", "discriminator"):
        assert result.artifacts[name].is_file()

    columns, history = utils.read_csv(result.artifacts["history"])
    assert columns == ["iteration", "model_loss", "discriminator_loss", "sigma", "wall_time"]
    assert history.shape == (4, 5)
    assert utils.read_json(result.artifacts["summary"]) == result.summary


def test_run_training_from_data_file(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    data = experiments.make_dataset(_spec("option-vol", tmp_path / "data"))
    spec = _spec(
        "option-vol",
        tmp_path / "run",
        experiment={"data_file": str(data.files["observations"])},
        train={"max_iterations": 2},
    )
    result = experiments.run_experiment(spec)
    assert result.status == experiments.EXIT_OK
    assert result.artifacts["observations"] == data.files["observations"]
    assert not (tmp_path / "run" / "observations.csv").exists()

    empty = utils.write_csv(tmp_path / "empty.csv", ["payoff"], np.empty((0, 1)))
    with pytest.raises(ad.ContractError, match="no observations"):
        experiments.run_experiment(
            _spec("option-vol", tmp_path / "none", experiment={"data_file": str(empty)})
        )


def test_run_generator_experiment(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec(
        "poisson-mixture",
        tmp_path,
        experiment={"observations": 64, "histogram_bins": 10},
        model={"grid_points": 20},
        train={"max_iterations": 2},
    )
    result = experiments.run_experiment(spec)
    assert result.status == experiments.EXIT_OK
    assert result.summary["estimand"] == "generator-distribution"
    assert result.summary["comparison"]["target"] == "mixture"
    assert 0.0 <= result.summary["comparison"]["ks_statistic"] <= 1.0

    columns, generated = utils.read_csv(result.artifacts["generated"])
    assert columns == ["mu"]
    assert generated.shape == (experiments.GENERATED_DRAWS, 1)
    _, hist = utils.read_csv(result.artifacts["generated_histogram"])
    assert hist.shape[0] == 10
    assert result.artifacts["generator"].is_file()


def test_run_joint_generator_experiment(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec(
        "poisson-2d",
        tmp_path,
        experiment={"observations": 64},
        model={"grid_points": 20},
        train={"max_iterations": 1},
    )
    result = experiments.run_experiment(spec)
    assert result.status == experiments.EXIT_OK
    covariance = result.summary["covariance"]
    assert np.shape(covariance["generated_covariance"]) == (2, 2)
    assert covariance["target_mean"][0] == pytest.approx(0.3, abs=0.02)

    columns, generated = utils.read_csv(result.artifacts["generated"])
    assert columns == ["mu", "abs_sigma"]
    assert np.all(generated[:, 1] >= 0)
    assert result.artifacts["generated_histogram_abs_sigma"].is_file()


def test_history_is_reproducible(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec("option-vol", tmp_path / "a", train={"max_iterations": 10})
    first = experiments.run_experiment(spec)
    second = experiments.run_experiment(spec.with_overrides(out_dir=tmp_path / "b"))

    columns, history_a = utils.read_csv(first.artifacts["history"])
    _, history_b = utils.read_csv(second.artifacts["history"])
    assert columns[-1] == "wall_time"
    np.testing.assert_array_equal(history_a[:, :-1], history_b[:, :-1])


def test_run_landscape(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec(
        "cir-landscape",
        tmp_path,
        experiment={"histogram_bins": 20},
        model={
            "path_length": 500,
            "realizations": 2,
            "kappa_grid": [0.4, 0.5, 0.6],
            "tau_grid": [0.05, 0.06, 0.07],
        },
    )
    result = experiments.run_experiment(spec)
    assert result.status == experiments.EXIT_OK
    for parameter in ("kappa", "tau"):
        columns, scan = utils.read_csv(result.artifacts[f"landscape_{parameter}"])
        assert columns == ["parameter_value", "discrete_kl"]
        assert scan.shape == (3, 2)
        assert scan[1, 1] == pytest.approx(0.0, abs=1e-12)
        assert np.all(scan[:, 1] >= 0)
    assert set(result.summary["curvature"]) == {"kappa", "tau"}


def test_landscape_grid() -> None:
    """Unit tests for method."""
    explicit = experiments._grid({"kappa_grid": [0.2, 0.5, 1.0]}, "kappa")
    np.testing.assert_array_equal(explicit, [0.2, 0.5, 1.0])

    spread = experiments._grid({"tau_range": [0.02, 0.1], "tau_points": 17}, "tau")
    assert len(spread) == 17
    assert spread[0] == pytest.approx(0.02)
    assert spread[-1] == pytest.approx(0.1)

    both = {"kappa_grid": [0.4, 0.5, 0.6], "kappa_range": [0.1, 1.0], "kappa_points": 19}
    np.testing.assert_array_equal(experiments._grid(both, "kappa"), [0.4, 0.5, 0.6])


def test_run_landscape_three_value_grid(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    spec = _spec(
        "cir-landscape",
        tmp_path,
        experiment={"histogram_bins": 20},
        model={
            "path_length": 300,
            "realizations": 1,
            "kappa_grid": [0.2, 0.5, 1.0],
            "tau_grid": [0.05, 0.06, 0.07],
        },
    )
    result = experiments.run_landscape(spec)
    assert result.status == experiments.EXIT_OK
    _, scan = utils.read_csv(result.artifacts["landscape_kappa"])
    np.testing.assert_allclose(scan[:, 0], [0.2, 0.5, 1.0])


def test_mle_oracle(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    result = experiments.run_experiment(_spec("mle-oracle", tmp_path, experiment={"seed": 1}))
    summary = result.summary
    assert result.status == experiments.EXIT_OK
    assert summary["pairs"] == 4000
    assert summary["tau_bound"] == pytest.approx(3.0 * 0.0062, rel=0.05)
    assert abs(summary["tau_mle"] - 0.06) < summary["tau_bound"]
    assert summary["tau_within_bound"]
    assert summary["feller"]
    assert abs(summary["kappa_mle_resampled"] - 0.5) < 0.15  # noqa: PLR2004
    assert summary["fisher_kappa_resampled"] > summary["fisher_kappa_stationary"] > 0
    assert utils.read_json(result.artifacts["summary"])["pairs"] == 4000


@pytest.mark.slow
def test_cir_tau_recovery(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    result = experiments.run_experiment(_spec("cir-tau", tmp_path))
    assert result.status == experiments.EXIT_OK
    assert result.summary["tail_mean"]["tau"] == pytest.approx(0.06, abs=0.01)


@pytest.mark.slow
def test_poisson_sigma_recovery(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    result = experiments.run_experiment(
        _spec("poisson-uq", tmp_path, train={"max_iterations": 5000})
    )
    assert result.status == experiments.EXIT_OK
    assert abs(result.summary["estimates"]["sigma"]) == pytest.approx(0.1, abs=0.02)


@pytest.mark.slow
def test_mixture_recovery(tmp_path: pathlib.Path) -> None:
    """Unit tests for method."""
    result = experiments.run_experiment(
        _spec("poisson-mixture", tmp_path, train={"max_iterations": 20000})
    )
    assert result.status == experiments.EXIT_OK
    comparison = result.summary["comparison"]
    assert comparison["ks_statistic"] < 0.1  # noqa: PLR2004
    assert comparison["mean_error"] < 0.05  # noqa: PLR2004


# KS bounds for the distribution panel; heavy-tailed targets get the looser bound
PANEL_KS = {"exponential": 0.15, "beta": 0.15, "cauchy": 0.25, "f": 0.25}


@pytest.mark.slow
@pytest.mark.parametrize("target", experiments.PANEL_TARGETS)
def test_panel_recovery(tmp_path: pathlib.Path, target: str) -> None:
    """Unit tests for method."""
    result = experiments.run_experiment(
        _spec(
            "poisson-mixture",
            tmp_path,
            model={"target": target},
            train={"max_iterations": 20000},
        )
    )
    assert result.status == experiments.EXIT_OK
    assert result.artifacts["generated_histogram"].is_file()
    assert result.artifacts["target_histogram"].is_file()
    comparison = result.summary["comparison"]
    assert comparison["target"] == target
    assert comparison["ks_statistic"] < PANEL_KS.get(target, 0.25)
