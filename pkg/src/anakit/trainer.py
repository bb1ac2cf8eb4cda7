"""Adversarial training loop.

Every outer iteration runs `discriminator_steps` discriminator updates on fresh
observed and simulated batches, then `generator_updates` updates of the
estimand (scalar parameters and/or generator weights) on the model loss. The
loop stops at `max_iterations` or when the discriminator loss stays within
`threshold` of its equilibrium value for five consecutive iterations.
"""

from __future__ import annotations

import collections
import dataclasses
import json
import logging
import math
import pathlib
import time
from collections.abc import Callable
from typing import Any

import numpy as np
from packaging import version

from anakit import autodiff as ad, losses, neural, optimizers, simulators, utils


CHECKPOINT_FORMAT = "1.0"
MONITOR_WINDOW = 5
TAIL_FRACTION = 0.1

ESTIMAND_KINDS = ("scalar-parameters", "generator-distribution", "mixed")


class TrainingAbortedError(RuntimeError):
    """Training cannot continue; `last_checkpoint` is the newest snapshot, if any."""

    def __init__(self, msg: str, iteration: int, last_checkpoint: pathlib.Path | None) -> None:
        """Attach the failing iteration and the checkpoint to restart from."""
        if last_checkpoint is not None:
            msg = f"{msg} (last checkpoint: {last_checkpoint})"
        super().__init__(msg)
        self.iteration = iteration
        self.last_checkpoint = last_checkpoint


@dataclasses.dataclass(frozen=True)
class CheckpointError:
    """Checkpoint file missing, corrupted or written by an incompatible version."""

    msg: str
    path: pathlib.Path


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Settings of one training run.

    A `batch_size` at least the number of observations means full-batch training.
    `checkpoint_interval` 0 disables periodic checkpoints.
    """

    loss: str = "vanilla"
    generator_optimizer: str = "rmsprop"
    generator_learning_rate: float = 1e-4
    discriminator_optimizer: str = "rmsprop"
    discriminator_learning_rate: float = 1e-4
    batch_size: int = 32
    discriminator_steps: int = 1
    generator_updates: int = 1
    max_iterations: int = 1000
    threshold: float = 0.0
    seed: int = 0
    clip: float = neural.DEFAULT_CLIP
    checkpoint_interval: int = 0
    log_interval: int = 100
    literal_wasserstein: bool = False
    lbfgs_memory: int = optimizers.LBFGS_MEMORY
    lbfgs_max_iterations: int = 5

    def __post_init__(self) -> None:
        """Validate counts, thresholds and kinds."""
        losses.loss_pair(self.loss)
        for kind in (self.generator_optimizer, self.discriminator_optimizer):
            if kind not in optimizers.OPTIMIZER_KINDS:
                raise ad.ContractError(f"unknown optimizer '{kind}'")
        if self.discriminator_optimizer == "lbfgs":
            raise ad.ContractError(
                "the discriminator takes stochastic steps; L-BFGS is generator-only"
            )
        for name in ("batch_size", "discriminator_steps", "generator_updates"):
            if getattr(self, name) < 1:
                raise ad.ContractError(f"{name} must be at least 1, got {getattr(self, name)}")
        for name in ("max_iterations", "checkpoint_interval", "log_interval"):
            if getattr(self, name) < 0:
                raise ad.ContractError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not self.threshold >= 0:
            raise ad.ContractError(f"threshold must be nonnegative, got {self.threshold}")

    def optimizer_settings(self, kind: str) -> dict[str, Any]:
        if kind == "lbfgs":
            return {"memory": self.lbfgs_memory, "max_iterations": self.lbfgs_max_iterations}
        return {}


@dataclasses.dataclass
class Estimand:
    """The unknowns: a vector of named scalars and/or a generator network.

    `true_values` is kept for reporting and never read by the updates.
    """

    names: list[str] = dataclasses.field(default_factory=list)
    values: ad.FloatArray = dataclasses.field(default_factory=lambda: np.zeros(0))
    generator: neural.Mlp | None = None
    noise: neural.NoiseSpec | None = None
    true_values: dict[str, float] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate that something is trainable."""
        self.values = np.array(self.values, dtype=np.float64).reshape(-1)
        if len(self.names) != self.values.size:
            raise ad.ShapeError(f"{len(self.names)} names for {self.values.size} scalar values")
        if not self.names and self.generator is None:
            raise ad.ContractError("estimand has no trainable component")
        if (self.generator is None) != (self.noise is None):
            raise ad.ContractError("a generator needs a noise spec and vice versa")
        noise_dim = self.noise.dim if self.noise is not None else None
        if self.generator is not None and noise_dim != self.generator.input_dim:
            raise ad.ShapeError("noise dimension does not match the generator input width")

    @property
    def kind(self) -> str:
        if self.generator is None:
            return "scalar-parameters"
        return "mixed" if self.names else "generator-distribution"

    def parameter_count(self) -> int:
        generator = self.generator.parameter_count() if self.generator is not None else 0
        return self.values.size + generator

    def flat_parameters(self) -> ad.FloatArray:
        """Scalars first, then the generator parameters."""
        if self.generator is None:
            return self.values.copy()
        return np.concatenate([self.values, self.generator.flat_parameters()])

    def set_flat_parameters(self, flat: ad.FloatArray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count(),):
            raise ad.ShapeError(f"expected {self.parameter_count()} parameters, got {flat.shape}")
        self.values[...] = flat[: self.values.size]
        if self.generator is not None:
            self.generator.set_flat_parameters(flat[self.values.size :])

    def estimates(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, self.values, strict=True)}

    def estimate_values(
        self, count: int, u: ad.FloatArray | None, tape: ad.Tape | None = None
    ) -> simulators.EstimateValues:
        """Scalars and generator samples G(u) for a batch of `count` simulations."""
        scalars: dict[str, Any] = {}
        if self.names:
            if tape is None:
                scalars = self.estimates()
            else:
                node = tape.bind(self, [self.values])[0]
                scalars = {name: node[i] for i, name in enumerate(self.names)}
        generated = None
        if self.generator is not None:
            if count == 0 or u is None:
                generated = np.empty((0, self.generator.output_dim))
            else:
                generated = neural.mlp_forward(self.generator, u, tape)
        return simulators.EstimateValues(scalars, generated)

    def gradient(self, tape: ad.Tape) -> ad.FloatArray:
        """Adjoints of the estimand parameters bound on `tape`, in flat layout."""
        nodes = tape.bound(self)
        scalars = nodes[0].adjoint.copy() if nodes else np.zeros(self.values.size)
        if self.generator is None:
            return scalars
        return np.concatenate([scalars, neural.parameter_gradient(self.generator, tape)])


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    iteration: int
    model_loss: float
    discriminator_loss: float
    estimates: dict[str, float]
    wall_time: float


@dataclasses.dataclass
class TrainHistory:
    """Per-iteration records plus counts of diagnostic events.

    Event names: "saturation", "negative_rate", "line_search_fallback".
    """

    records: list[IterationRecord] = dataclasses.field(default_factory=list)
    events: collections.Counter[str] = dataclasses.field(default_factory=collections.Counter)
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: IterationRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ad.ContractError(
                f"iteration {record.iteration} does not follow {self.records[-1].iteration}"
            )
        self.records.append(record)

    def estimate_names(self) -> list[str]:
        return list(self.records[0].estimates) if self.records else []

    def column(self, name: str) -> ad.FloatArray:
        """Values of "model_loss", "discriminator_loss", "wall_time" or a named estimate."""
        if name in ("iteration", "model_loss", "discriminator_loss", "wall_time"):
            return np.array([getattr(r, name) for r in self.records], dtype=np.float64)
        return np.array([r.estimates[name] for r in self.records], dtype=np.float64)

    def tail_mean(self, name: str, fraction: float = TAIL_FRACTION) -> float:
        """Mean of a column over the last `fraction` of the records."""
        values = self.column(name)
        if values.size == 0:
            raise ad.ContractError("history is empty")
        count = max(1, math.ceil(fraction * values.size))
        return float(values[-count:].mean())

    def moving_average(self, name: str, window: int) -> ad.FloatArray:
        values = self.column(name)
        window = max(1, min(window, values.size))
        return np.convolve(values, np.ones(window) / window, mode="valid")

    def columns(self, include_wall_time: bool = True) -> list[str]:
        names = ["iteration", "model_loss", "discriminator_loss", *self.estimate_names()]
        return [*names, "wall_time"] if include_wall_time else names

    def to_csv(self, path: pathlib.Path, include_wall_time: bool = True) -> pathlib.Path:
        """Write the history table; without wall time the file is seed-deterministic."""
        names = self.columns(include_wall_time)
        if not self.records:
            return utils.write_csv(path, names, np.empty((0, len(names))))
        return utils.write_csv(path, names, np.column_stack([self.column(n) for n in names]))


class StoppingMonitor:
    """Signals a stop once |d - equilibrium| < threshold for `window` evaluations in a row.

    A threshold of 0 never stops.
    """

    def __init__(self, equilibrium: float, threshold: float, window: int = MONITOR_WINDOW) -> None:
        """Start with no consecutive hits."""
        self.equilibrium = equilibrium
        self.threshold = threshold
        self.window = window
        self.consecutive = 0

    def update(self, d: float) -> bool:
        if abs(d - self.equilibrium) < self.threshold:
            self.consecutive += 1
        else:
            self.consecutive = 0
        return self.consecutive >= self.window


def evaluate_discrepancy(
    disc: neural.Mlp, real_batch: Any, fake_batch: Any, loss_kind: str
) -> float:
    """Discrepancy d = L^D of `disc` on a real and a simulated batch of features."""
    if len(real_batch) == 0 or len(fake_batch) == 0:
        raise ad.ContractError("discrepancy needs nonempty batches")
    d_real = neural.mlp_forward(disc, np.asarray(real_batch, dtype=np.float64))
    d_fake = neural.mlp_forward(disc, np.asarray(fake_batch, dtype=np.float64))
    return ad.tape_value(losses.discriminator_loss(loss_kind, d_real, d_fake))


class Trainer:
    """Resumable state of one training run."""

    def __init__(  # noqa: PLR0913 [run inputs]
        self,
        cfg: TrainConfig,
        simulator: simulators.Simulator,
        observations: Any,
        est: Estimand,
        discriminator: neural.Mlp | None = None,
        checkpoint_dir: pathlib.Path | None = None,
    ) -> None:
        """Set up the discriminator, optimizers and random stream.

        Raises:
            autodiff.ShapeError: if observations and simulator widths differ.
            autodiff.ContractError: if the estimand does not fit the simulator.
        """
        self.observations = np.asarray(observations, dtype=np.float64)
        if self.observations.ndim == 1:
            self.observations = self.observations.reshape(-1, 1)
        if len(self.observations) == 0:
            raise ad.ContractError("training needs at least one observation")
        if self.observations.shape[1] != simulator.observation_dim:
            raise ad.ShapeError(
                f"observations have width {self.observations.shape[1]},"
                f" simulator produces {simulator.observation_dim}"
            )
        if list(simulator.scalar_names) != est.names:
            raise ad.ContractError(
                f"simulator expects scalars {simulator.scalar_names}, got {est.names}"
            )
        generated = est.generator.output_dim if est.generator is not None else 0
        if generated != simulator.generated_dim:
            raise ad.ContractError(
                f"simulator consumes {simulator.generated_dim} generated values,"
                f" generator emits {generated}"
            )

        self.cfg = cfg
        self.simulator = simulator
        self.est = est
        self.pair = losses.loss_pair(cfg.loss)
        self.rng = np.random.default_rng(cfg.seed)
        self.features = simulators.Standardizer.fit(self.observations)
        if discriminator is None:
            discriminator = neural.discriminator(
                simulator.observation_dim, self.rng, self.pair.output_activation
            )
        self.discriminator = discriminator
        self.generator_state = optimizers.make_optimizer(
            cfg.generator_optimizer,
            cfg.generator_learning_rate,
            est.parameter_count(),
            **cfg.optimizer_settings(cfg.generator_optimizer),
        )
        self.discriminator_state = optimizers.make_optimizer(
            cfg.discriminator_optimizer,
            cfg.discriminator_learning_rate,
            self.discriminator.parameter_count(),
        )
        self.iteration = 0
        self.history = TrainHistory()
        self.monitor = StoppingMonitor(self.pair.equilibrium_discriminator_loss, cfg.threshold)
        self.checkpoint_dir = checkpoint_dir
        self.last_checkpoint: pathlib.Path | None = None

    # batches

    def _observed_batch(self) -> ad.FloatArray:
        n = len(self.observations)
        if self.cfg.batch_size >= n:
            return self.observations
        return self.observations[self.rng.choice(n, self.cfg.batch_size, replace=False)]

    def _draw(self, batch: ad.FloatArray) -> tuple[ad.FloatArray, ad.FloatArray | None]:
        w = self.simulator.draw_inputs(batch, self.rng)
        u = self.est.noise.sample(len(batch), self.rng) if self.est.noise is not None else None
        return w, u

    def _simulate(self, w: ad.FloatArray, u: ad.FloatArray | None, tape: ad.Tape | None) -> Any:
        fake = self.simulator.simulate(self.est.estimate_values(len(w), u, tape), w)
        if isinstance(self.simulator, simulators.CirSimulator):
            negative = int(np.count_nonzero(ad.value_of(fake)[:, 1] < 0))
            if negative:
                self.history.events["negative_rate"] += negative
        return fake

    # updates

    def _discriminator_step(self) -> float:
        real = self._observed_batch()
        w, u = self._draw(real)
        fake = ad.value_of(self._simulate(w, u, None))

        tape = ad.Tape()
        d_real = neural.mlp_forward(self.discriminator, self.features(real), tape)
        d_fake = neural.mlp_forward(self.discriminator, self.features(fake), tape)
        loss = losses.discriminator_loss(
            self.cfg.loss, d_real, d_fake, self.cfg.literal_wasserstein
        )
        ad.backward(tape, loss)
        self.history.events.update(tape.events)

        grad = neural.parameter_gradient(self.discriminator, tape)
        params = optimizers.step(
            self.discriminator_state, self.discriminator.flat_parameters(), grad, self.iteration
        )
        self.discriminator.set_flat_parameters(params)
        if self.pair.requires_clipping:
            neural.clip_weights(self.discriminator, self.cfg.clip)
        return ad.tape_value(loss)

    def _generator_objective(
        self, real: ad.FloatArray, w: ad.FloatArray, u: ad.FloatArray | None
    ) -> Callable[[ad.FloatArray], tuple[float, ad.FloatArray]]:
        """Objective of the estimand parameters with the batch draws held fixed."""
        d_real = ad.value_of(neural.mlp_forward(self.discriminator, self.features(real)))

        def objective(flat: ad.FloatArray) -> tuple[float, ad.FloatArray]:
            self.est.set_flat_parameters(flat)
            tape = ad.Tape()
            fake = self._simulate(w, u, tape)
            d_fake = neural.mlp_forward(self.discriminator, self.features(fake), tape)
            root = losses.generator_objective(self.cfg.loss, d_fake, d_real)
            ad.backward(tape, root)
            self.history.events.update(tape.events)
            return ad.tape_value(root), self.est.gradient(tape)

        return objective

    def _generator_step(self) -> float:
        real = self._observed_batch()
        w, u = self._draw(real)
        objective = self._generator_objective(real, w, u)
        start = self.est.flat_parameters()

        if isinstance(self.generator_state, optimizers.LbfgsState):
            state = self.generator_state
            value, _ = objective(start)
            params, trace = optimizers.lbfgs_minimize(
                objective, start, m=state.memory, max_iter=state.max_iterations
            )
            self.history.events["line_search_fallback"] += trace.fallbacks
        else:
            value, grad = objective(start)
            params = optimizers.step(self.generator_state, start, grad, self.iteration)
        self.est.set_flat_parameters(params)
        return self.pair.generator_sign * value

    def run_iteration(self) -> IterationRecord:
        """One outer iteration: discriminator phase, then generator phase."""
        started = time.perf_counter()
        disc_loss = math.nan
        for _ in range(self.cfg.discriminator_steps):
            disc_loss = self._discriminator_step()
        model_loss = math.nan
        for _ in range(self.cfg.generator_updates):
            model_loss = self._generator_step()

        self.iteration += 1
        elapsed = time.perf_counter() - started
        record = IterationRecord(
            self.iteration, model_loss, disc_loss, self.est.estimates(), elapsed
        )
        self.history.append(record)
        return record

    def train(self) -> TrainHistory:
        """Run until `max_iterations` outer iterations are done or the monitor stops.

        Raises:
            TrainingAbortedError: on a non-finite loss or gradient.
            autodiff.DomainError: from the forward model, with the iteration in the message.
        """
        while self.iteration < self.cfg.max_iterations:
            try:
                record = self.run_iteration()
            except ad.DomainError as e:
                raise ad.DomainError(f"iteration {self.iteration + 1}: {e}", e.value) from e
            except optimizers.NonFiniteGradientError as e:
                raise TrainingAbortedError(str(e), self.iteration + 1, self.last_checkpoint) from e

            if not (math.isfinite(record.model_loss) and math.isfinite(record.discriminator_loss)):
                raise TrainingAbortedError(
                    f"non-finite loss at iteration {record.iteration}",
                    record.iteration,
                    self.last_checkpoint,
                )
            if self.cfg.log_interval and record.iteration % self.cfg.log_interval == 0:
                logging.info(
                    "iteration %d: L^F = %.6g, L^D = %.6g, estimates %s",
                    record.iteration,
                    record.model_loss,
                    record.discriminator_loss,
                    record.estimates,
                )
            if (
                self.checkpoint_dir is not None
                and self.cfg.checkpoint_interval
                and record.iteration % self.cfg.checkpoint_interval == 0
            ):
                self.checkpoint(self.checkpoint_dir)
            if self.monitor.update(record.discriminator_loss):
                logging.info(
                    "discriminator loss at equilibrium, stopping at iteration %d", record.iteration
                )
                self.history.stopped_early = True
                break
        return self.history

    def checkpoint(self, directory: pathlib.Path) -> pathlib.Path:
        """Write a restartable snapshot named after the current iteration."""
        path = utils.ensure_directory(directory) / f"checkpoint_{self.iteration:07d}.json"
        save_checkpoint(self, path)
        self.last_checkpoint = path
        logging.info("wrote checkpoint %s", path)
        return path

    def sample_generator(self, count: int, rng: np.random.Generator) -> ad.FloatArray:
        """Generated parameter samples; empty for scalar-only estimands."""
        if self.est.generator is None or self.est.noise is None:
            return np.empty((0, 0))
        return np.asarray(neural.sample_generator(self.est.generator, self.est.noise, count, rng))


def train(
    cfg: TrainConfig,
    simulator: simulators.Simulator,
    observations: Any,
    est: Estimand,
    checkpoint_dir: pathlib.Path | None = None,
) -> TrainHistory:
    """Run the adversarial optimization on `est` and return its history."""
    return Trainer(cfg, simulator, observations, est, checkpoint_dir=checkpoint_dir).train()


def _estimand_document(est: Estimand) -> dict[str, Any]:
    return {
        "names": est.names,
        "values": est.values.tolist(),
        "true_values": est.true_values,
        "generator": neural.dumps(est.generator) if est.generator is not None else None,
        "noise": dataclasses.asdict(est.noise) if est.noise is not None else None,
    }


def _estimand_from_document(doc: dict[str, Any]) -> Estimand:
    return Estimand(
        list(doc["names"]),
        np.asarray(doc["values"], dtype=np.float64),
        neural.loads(doc["generator"]) if doc["generator"] is not None else None,
        neural.NoiseSpec(**doc["noise"]) if doc["noise"] is not None else None,
        dict(doc["true_values"]),
    )


def save_checkpoint(trainer: Trainer, path: pathlib.Path) -> pathlib.Path:
    """Serialize everything needed to continue the run bit-for-bit.

    Raises:
        TrainingAbortedError: if the file cannot be written.
    """
    document = {
        "format_version": CHECKPOINT_FORMAT,
        "iteration": trainer.iteration,
        "config": dataclasses.asdict(trainer.cfg),
        "estimand": _estimand_document(trainer.est),
        "discriminator": neural.dumps(trainer.discriminator),
        "optimizers": {
            "generator": trainer.generator_state.to_dict(),
            "discriminator": trainer.discriminator_state.to_dict(),
        },
        "rng": trainer.rng.bit_generator.state,
        "monitor": trainer.monitor.consecutive,
        "history": {
            "records": [dataclasses.asdict(r) for r in trainer.history.records],
            "events": dict(trainer.history.events),
        },
    }
    try:
        path.write_text(json.dumps(document))
    except OSError as e:
        raise TrainingAbortedError(
            f"cannot write checkpoint {path}: {e}", trainer.iteration, trainer.last_checkpoint
        ) from e
    return path


def load_checkpoint(
    path: pathlib.Path,
    simulator: simulators.Simulator,
    observations: Any,
    checkpoint_dir: pathlib.Path | None = None,
) -> Trainer | CheckpointError:
    """Rebuild a `Trainer` from `save_checkpoint` output."""
    try:
        document = json.loads(path.read_text())
    except OSError as e:
        return CheckpointError(f"cannot read checkpoint: {e}", path)
    except json.JSONDecodeError as e:
        return CheckpointError(f"checkpoint is not valid JSON: {e}", path)

    if not isinstance(document, dict) or "format_version" not in document:
        return CheckpointError("not a checkpoint file", path)
    try:
        written = version.Version(str(document["format_version"]))
    except version.InvalidVersion:
        return CheckpointError(f"invalid format version '{document['format_version']}'", path)
    if written.major != version.Version(CHECKPOINT_FORMAT).major:
        return CheckpointError(f"checkpoint format {written} is not supported", path)

    try:
        cfg = TrainConfig(**document["config"])
        est = _estimand_from_document(document["estimand"])
        trainer = Trainer(
            cfg,
            simulator,
            observations,
            est,
            discriminator=neural.loads(document["discriminator"]),
            checkpoint_dir=checkpoint_dir,
        )
        states = document["optimizers"]
        trainer.generator_state = optimizers.optimizer_from_dict(states["generator"])
        trainer.discriminator_state = optimizers.optimizer_from_dict(states["discriminator"])
        trainer.rng.bit_generator.state = document["rng"]
        trainer.iteration = int(document["iteration"])
        trainer.monitor.consecutive = int(document["monitor"])
        for record in document["history"]["records"]:
            trainer.history.append(IterationRecord(**record))
        trainer.history.events.update(document["history"]["events"])
    except (KeyError, TypeError, ValueError) as e:
        return CheckpointError(f"corrupted checkpoint: {e}", path)

    trainer.last_checkpoint = path
    return trainer
