"""Experiment configuration files.

A configuration is a TOML document (or a dataset manifest in JSON) with the
sections [experiment], [model], [train] and [optimizer]. Every experiment has
defaults for all keys, so a file holding only `[experiment] name = "..."` is a
complete configuration.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib
from typing import Any

import tomli
from packaging import version

from anakit import neural, trainer


EXPERIMENT_NAMES = (
    "poisson-uq",
    "poisson-mixture",
    "poisson-2d",
    "cir-tau",
    "cir-kappa",
    "cir-landscape",
    "option-vol",
    "mle-oracle",
)
SECTIONS = ("experiment", "model", "train", "optimizer")

DEFAULT_OUT_DIR = "results"
DEFAULT_OBSERVATIONS = 1000
DEFAULT_HISTOGRAM_BINS = 50
DATASET_FORMAT = "1.0"


@dataclasses.dataclass(frozen=True)
class ConfigurationError:
    """Invalid value in one configuration field."""

    msg: str
    key: str | None = None


@dataclasses.dataclass(frozen=True)
class ParseError:
    """The configuration cannot be used at all."""

    msg: str


class DataFetcher:
    """Typed lookups of dotted keys in a parsed configuration document."""

    def __init__(self, data: dict[str, Any]) -> None:
        """Wrap the raw document."""
        self._data = data

    def __contains__(self, key: Any) -> bool:
        """Check if the document contains the (nested) key, e.g. 'train.loss'."""
        if not isinstance(key, str):
            return False
        val: Any = self._data
        try:
            for part in key.split("."):
                val = val[part]
        except (KeyError, TypeError):
            return False
        return True

    def get(self, key: str) -> Any:
        """Get value for a specific (multi-level) key."""
        val: Any = self._data
        for part in key.split("."):
            val = val[part]
        return val

    def get_str(self, key: str) -> str | None | ConfigurationError:
        try:
            val = self.get(key)
        except KeyError:
            return None
        if not isinstance(val, str):
            return ConfigurationError(
                f'Field "{key}" has an invalid type, expecting a string (got "{val}")', key=key
            )
        return val

    def get_int(self, key: str) -> int | None | ConfigurationError:
        try:
            val = self.get(key)
        except KeyError:
            return None
        if isinstance(val, bool) or not isinstance(val, int):
            return ConfigurationError(
                f'Field "{key}" has an invalid type, expecting an integer (got "{val}")', key=key
            )
        return val

    def get_float(self, key: str) -> float | None | ConfigurationError:
        """Get a number; integers are accepted."""
        try:
            val = self.get(key)
        except KeyError:
            return None
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            return ConfigurationError(
                f'Field "{key}" has an invalid type, expecting a number (got "{val}")', key=key
            )
        return float(val)

    def get_bool(self, key: str) -> bool | None | ConfigurationError:
        try:
            val = self.get(key)
        except KeyError:
            return None
        if not isinstance(val, bool):
            return ConfigurationError(
                f'Field "{key}" has an invalid type, expecting true or false (got "{val}")', key=key
            )
        return val

    def get_float_list(self, key: str) -> list[float] | None | ConfigurationError:
        try:
            val = self.get(key)
        except KeyError:
            return None
        if not isinstance(val, list) or any(
            isinstance(item, bool) or not isinstance(item, (int, float)) for item in val
        ):
            return ConfigurationError(
                f'Field "{key}" has an invalid type, expecting a list of numbers (got "{val}")',
                key=key,
            )
        return [float(item) for item in val]


# key -> getter name; one table per section
_EXPERIMENT_KEYS = {
    "name": "get_str",
    "seed": "get_int",
    "out_dir": "get_str",
    "data_file": "get_str",
    "observations": "get_int",
    "histogram_bins": "get_int",
}
_MODEL_KEYS = {
    **dict.fromkeys(
        (
            "sigma_true",
            "sigma_init",
            "mu_mean",
            "mu_std",
            "tau_true",
            "tau_init",
            "kappa",
            "kappa_true",
            "kappa_init",
            "tau",
            "sigma",
            "dt",
            "alpha",
            "r0",
            "spot",
            "strike",
            "rate",
            "expiry",
            "resample_low",
            "resample_high",
        ),
        "get_float",
    ),
    **dict.fromkeys(
        ("path_length", "grid_points", "realizations", "kappa_points", "tau_points"), "get_int"
    ),
    **dict.fromkeys(("target", "scheme"), "get_str"),
    **dict.fromkeys(
        ("kappa_grid", "tau_grid", "kappa_range", "tau_range"), "get_float_list"
    ),
}
_TRAIN_KEYS = {
    "loss": "get_str",
    "batch_size": "get_int",
    "discriminator_steps": "get_int",
    "generator_updates": "get_int",
    "max_iterations": "get_int",
    "threshold": "get_float",
    "clip": "get_float",
    "checkpoint_interval": "get_int",
    "log_interval": "get_int",
    "noise": "get_str",
    "noise_dim": "get_int",
    "literal_wasserstein": "get_bool",
}
_OPTIMIZER_KEYS = {
    "generator": "get_str",
    "generator_learning_rate": "get_float",
    "discriminator": "get_str",
    "discriminator_learning_rate": "get_float",
    "lbfgs_memory": "get_int",
    "lbfgs_max_iterations": "get_int",
}
_SECTION_KEYS = {
    "experiment": _EXPERIMENT_KEYS,
    "model": _MODEL_KEYS,
    "train": _TRAIN_KEYS,
    "optimizer": _OPTIMIZER_KEYS,
}

# [optimizer] key -> TrainConfig field
_OPTIMIZER_FIELDS = {
    "generator": "generator_optimizer",
    "generator_learning_rate": "generator_learning_rate",
    "discriminator": "discriminator_optimizer",
    "discriminator_learning_rate": "discriminator_learning_rate",
    "lbfgs_memory": "lbfgs_memory",
    "lbfgs_max_iterations": "lbfgs_max_iterations",
}

_POISSON_TRAIN = {"loss": "wasserstein", "batch_size": 32, "noise": "uniform", "noise_dim": 10}
_POISSON_OPTIMIZER = {
    "generator": "rmsprop",
    "generator_learning_rate": 1e-4,
    "discriminator": "rmsprop",
    "discriminator_learning_rate": 1e-4,
}
_CIR = {"kappa": 0.5, "tau": 0.06, "sigma": 0.08, "alpha": 0.5, "scheme": "milstein"}

EXPERIMENT_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "poisson-uq": {
        "experiment": {"observations": 1000},
        "model": {
            "sigma_true": 0.1,
            "sigma_init": 0.2,
            "mu_mean": 0.3,
            "mu_std": 0.1,
            "grid_points": 100,
        },
        "train": {**_POISSON_TRAIN, "max_iterations": 38000},
        "optimizer": _POISSON_OPTIMIZER,
    },
    "poisson-mixture": {
        "experiment": {"observations": 1000},
        "model": {"sigma": 0.1, "target": "mixture", "grid_points": 100},
        "train": {**_POISSON_TRAIN, "max_iterations": 100000},
        "optimizer": _POISSON_OPTIMIZER,
    },
    "poisson-2d": {
        "experiment": {"observations": 1000},
        "model": {"target": "gaussian2d", "grid_points": 100},
        "train": {**_POISSON_TRAIN, "max_iterations": 100000},
        "optimizer": _POISSON_OPTIMIZER,
    },
    "cir-tau": {
        "experiment": {"observations": 4000},
        "model": {
            **_CIR,
            "tau_true": 0.06,
            "tau_init": 0.1,
            "dt": 0.01,
            "r0": 0.06,
            "path_length": 4000,
        },
        "train": {"loss": "kl", "batch_size": 4000, "max_iterations": 2000},
        "optimizer": {
            "generator": "lbfgs",
            "generator_learning_rate": 1.0,
            "discriminator": "adam",
            "discriminator_learning_rate": 1e-3,
            "lbfgs_memory": 10,
            "lbfgs_max_iterations": 5,
        },
    },
    "cir-kappa": {
        "experiment": {"observations": 4000},
        "model": {
            **_CIR,
            "kappa_true": 0.5,
            "kappa_init": 0.2,
            "dt": 0.001,
            "resample_low": 0.001,
            "resample_high": 0.03,
        },
        "train": {
            "loss": "kl",
            "batch_size": 4000,
            "discriminator_steps": 5,
            "max_iterations": 10000,
        },
        "optimizer": {
            "generator": "rmsprop",
            "generator_learning_rate": 1e-3,
            "discriminator": "rmsprop",
            "discriminator_learning_rate": 1e-3,
        },
    },
    "cir-landscape": {
        "experiment": {},
        "model": {
            **_CIR,
            "dt": 0.001,
            "r0": 0.05,
            "path_length": 100000,
            "realizations": 10,
            "kappa_range": [0.1, 1.0],
            "kappa_points": 19,
            "tau_range": [0.02, 0.1],
            "tau_points": 17,
        },
        "train": {},
        "optimizer": {},
    },
    "option-vol": {
        "experiment": {"observations": 100},
        "model": {
            "spot": 100.0,
            "strike": 100.0,
            "rate": 0.05,
            "expiry": 1.0,
            "sigma_true": 0.2,
            "sigma_init": 0.4,
        },
        "train": {"loss": "vanilla", "batch_size": 100, "max_iterations": 30000},
        "optimizer": {
            "generator": "rmsprop",
            "generator_learning_rate": 1e-4,
            "discriminator": "rmsprop",
            "discriminator_learning_rate": 1e-4,
        },
    },
    "mle-oracle": {
        "experiment": {"observations": 4000},
        "model": {
            **_CIR,
            "tau_true": 0.06,
            "dt": 0.01,
            "r0": 0.06,
            "path_length": 4000,
            "resample_low": 0.001,
            "resample_high": 0.03,
        },
        "train": {},
        "optimizer": {},
    },
}


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment: name, data source, model settings and training settings.

    `model` holds the experiment defaults overlaid with the file's [model] section.
    """

    name: str
    seed: int = 0
    out_dir: pathlib.Path = pathlib.Path(DEFAULT_OUT_DIR)
    data_file: pathlib.Path | None = None
    observations: int = DEFAULT_OBSERVATIONS
    histogram_bins: int = DEFAULT_HISTOGRAM_BINS
    model: dict[str, Any] = dataclasses.field(default_factory=dict)
    train: trainer.TrainConfig = dataclasses.field(default_factory=trainer.TrainConfig)
    noise: neural.NoiseSpec = dataclasses.field(default_factory=neural.NoiseSpec)

    def with_overrides(
        self,
        seed: int | None = None,
        out_dir: pathlib.Path | None = None,
        max_iterations: int | None = None,
    ) -> ExperimentSpec:
        """Copy with command-line overrides applied."""
        spec = self
        if seed is not None:
            train = dataclasses.replace(spec.train, seed=seed)
            spec = dataclasses.replace(spec, seed=seed, train=train)
        if out_dir is not None:
            spec = dataclasses.replace(spec, out_dir=out_dir)
        if max_iterations is not None:
            spec = dataclasses.replace(
                spec, train=dataclasses.replace(spec.train, max_iterations=max_iterations)
            )
        return spec

    def to_document(self) -> dict[str, Any]:
        """Sections that `parse_config` turns back into an equal spec."""
        cfg = dataclasses.asdict(self.train)
        experiment: dict[str, Any] = {
            "name": self.name,
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "observations": self.observations,
            "histogram_bins": self.histogram_bins,
        }
        if self.data_file is not None:
            experiment["data_file"] = str(self.data_file)
        train = {key: cfg[key] for key in _TRAIN_KEYS if key in cfg}
        train.update({"noise": self.noise.kind, "noise_dim": self.noise.dim})
        optimizer = {key: cfg[field] for key, field in _OPTIMIZER_FIELDS.items()}
        return {
            "experiment": experiment,
            "model": dict(self.model),
            "train": train,
            "optimizer": optimizer,
        }


def _read_section(
    fetcher: DataFetcher, section: str, errors: list[ConfigurationError]
) -> dict[str, Any]:
    values: dict[str, Any] = {}
    if section not in fetcher:
        return values
    raw = fetcher.get(section)
    if not isinstance(raw, dict):
        errors.append(ConfigurationError(f'Section "{section}" must be a table', key=section))
        return values
    getters = _SECTION_KEYS[section]
    for key in raw:
        if key not in getters:
            dotted = f"{section}.{key}"
            errors.append(ConfigurationError(f'Unknown field "{dotted}"', key=dotted))
            continue
        value = getattr(fetcher, getters[key])(f"{section}.{key}")
        if isinstance(value, ConfigurationError):
            errors.append(value)
        elif value is not None:
            values[key] = value
    return values


def _parse_errors(errors: list[ConfigurationError]) -> ParseError:
    return ParseError("; ".join(e.msg for e in errors))


def _check_dataset(fetcher: DataFetcher) -> ParseError | None:
    """Reject manifests written in an incompatible dataset format."""
    if "dataset" not in fetcher:
        return None
    if not isinstance(fetcher.get("dataset"), dict):
        return ParseError('Section "dataset" must be a table')
    stamp = fetcher.get_str("dataset.format_version")
    if isinstance(stamp, ConfigurationError):
        return ParseError(stamp.msg)
    if stamp is None:
        return ParseError('Field "dataset.format_version" is required in a manifest')
    try:
        written = version.Version(stamp)
    except version.InvalidVersion:
        return ParseError(f"invalid dataset format version '{stamp}'")
    if written.major != version.Version(DATASET_FORMAT).major:
        return ParseError(
            f"dataset format version {stamp} is not supported, expected {DATASET_FORMAT}"
        )
    return None


def _check_grids(model: dict[str, Any]) -> ParseError | None:
    # a landscape needs three points to measure curvature
    for parameter in ("kappa", "tau"):
        grid = model.get(f"{parameter}_grid")
        if grid is not None and len(grid) < 3:  # noqa: PLR2004
            return ParseError(f'"model.{parameter}_grid" needs at least three values')
        bounds = model.get(f"{parameter}_range")
        if bounds is not None and (len(bounds) != 2 or bounds[0] >= bounds[1]):  # noqa: PLR2004
            return ParseError(f'"model.{parameter}_range" must be [lo, hi] with lo < hi')
        points = model.get(f"{parameter}_points")
        if points is not None and points < 3:  # noqa: PLR2004
            return ParseError(f'"model.{parameter}_points" must be at least 3')
    return None


def parse_config(document: dict[str, Any]) -> ExperimentSpec | ParseError:
    """Validate a parsed configuration document and fill in experiment defaults."""
    fetcher = DataFetcher(document)
    for section in document:
        if section not in SECTIONS and section != "dataset":
            return ParseError(f'Unknown section "{section}", expected one of {SECTIONS}')
    dataset_error = _check_dataset(fetcher)
    if dataset_error is not None:
        return dataset_error

    name = fetcher.get_str("experiment.name")
    if isinstance(name, ConfigurationError):
        return ParseError(name.msg)
    if name is None:
        return ParseError('Field "experiment.name" is required')
    if name not in EXPERIMENT_NAMES:
        return ParseError(f'Unknown experiment "{name}", expected one of {EXPERIMENT_NAMES}')

    errors: list[ConfigurationError] = []
    sections = {section: _read_section(fetcher, section, errors) for section in SECTIONS}
    if errors:
        return _parse_errors(errors)

    defaults = EXPERIMENT_DEFAULTS[name]
    experiment = {**defaults["experiment"], **sections["experiment"]}
    model = {**defaults["model"], **sections["model"]}
    train = {**defaults["train"], **sections["train"]}
    optimizer = {**defaults["optimizer"], **sections["optimizer"]}

    seed = experiment.get("seed", 0)
    noise_kind = train.pop("noise", "uniform")
    noise_dim = train.pop("noise_dim", 10)
    train_fields = {**train, **{_OPTIMIZER_FIELDS[k]: v for k, v in optimizer.items()}}
    try:
        cfg = trainer.TrainConfig(seed=seed, **train_fields)
        noise = neural.NoiseSpec(noise_kind, noise_dim)
    except ValueError as e:
        return ParseError(str(e))

    observations = experiment.get("observations", DEFAULT_OBSERVATIONS)
    bins = experiment.get("histogram_bins", DEFAULT_HISTOGRAM_BINS)
    if observations < 1 or bins < 1:
        return ParseError("observations and histogram_bins must be positive")
    grid_error = _check_grids(model)
    if grid_error is not None:
        return grid_error

    data_file = experiment.get("data_file")
    return ExperimentSpec(
        name=name,
        seed=seed,
        out_dir=pathlib.Path(experiment.get("out_dir", DEFAULT_OUT_DIR)),
        data_file=pathlib.Path(data_file) if data_file is not None else None,
        observations=observations,
        histogram_bins=bins,
        model=model,
        train=cfg,
        noise=noise,
    )


def load_config(path: pathlib.Path) -> ExperimentSpec | ParseError:
    """Read a TOML configuration or a JSON dataset manifest."""
    try:
        if path.suffix == ".json":
            document = json.loads(path.read_text())
        else:
            with path.open("rb") as f:
                document = tomli.load(f)
    except OSError as e:
        return ParseError(f"cannot read {path}: {e}")
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as e:
        return ParseError(f"cannot parse {path}: {e}")
    if not isinstance(document, dict):
        return ParseError(f"{path} does not hold a table of sections")
    return parse_config(document)
