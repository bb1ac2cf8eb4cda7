"""Multilayer perceptrons used as generator G_η and discriminator D_ξ."""

from __future__ import annotations

import dataclasses
import itertools
import pathlib
from typing import Any

import numpy as np

from anakit import autodiff as ad


DISCRIMINATOR_HIDDEN = (20, 20, 20)
GENERATOR_HIDDEN = (20, 20)
DEFAULT_CLIP = 0.1

HIDDEN_ACTIVATIONS = ("tanh",)
OUTPUT_ACTIVATIONS = ("sigmoid", "linear", "identity")
NOISE_KINDS = ("normal", "uniform")

_WIDTHS_KEY = "layer_widths"
_ACTIVATIONS_KEY = "activations"


@dataclasses.dataclass
class Mlp:
    """Fully connected network with tanh hidden layers.

    Weights of layer l have shape (layer_widths[l], layer_widths[l+1]), so a batch
    of row vectors is propagated as `x @ W + b`.
    """

    layer_widths: list[int]
    weights: list[ad.FloatArray]
    biases: list[ad.FloatArray]
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self) -> None:
        """Validate layer dimensions and activation tags."""
        too_few = len(self.layer_widths) < 2  # noqa: PLR2004 [input and output layer]
        if too_few or any(w < 1 for w in self.layer_widths):
            raise ad.ContractError(f"invalid layer widths {self.layer_widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ad.ContractError(f"unknown hidden activation '{self.hidden_activation}'")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ad.ContractError(f"unknown output activation '{self.output_activation}'")
        n_layers = len(self.layer_widths) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ad.ShapeError(f"expected {n_layers} weight matrices and bias vectors")
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            shape = (self.layer_widths[i], self.layer_widths[i + 1])
            if w.shape != shape or b.shape != shape[1:]:
                raise ad.ShapeError(
                    f"layer {i}: expected weights {shape} and biases {shape[1:]},"
                    f" got {w.shape} and {b.shape}"
                )

    @classmethod
    def initialize(
        cls,
        layer_widths: list[int],
        rng: np.random.Generator,
        output_activation: str = "linear",
    ) -> Mlp:
        """Glorot-uniform weights and zero biases."""
        weights = []
        for fan_in, fan_out in itertools.pairwise(layer_widths):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases = [np.zeros(w) for w in layer_widths[1:]]
        return cls(list(layer_widths), weights, biases, output_activation=output_activation)

    @classmethod
    def zeros(cls, layer_widths: list[int], output_activation: str = "linear") -> Mlp:
        """Network with every weight and bias set to zero."""
        weights = [np.zeros(shape) for shape in itertools.pairwise(layer_widths)]
        biases = [np.zeros(w) for w in layer_widths[1:]]
        return cls(list(layer_widths), weights, biases, output_activation=output_activation)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    def parameter_count(self) -> int:
        """Sum over layers of fan_in * fan_out + fan_out."""
        return sum(a * b + b for a, b in itertools.pairwise(self.layer_widths))

    def parameters(self) -> list[ad.FloatArray]:
        """Parameter arrays in layer order: W_0, b_0, W_1, b_1, ..."""
        params: list[ad.FloatArray] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            params.extend((w, b))
        return params

    def flat_parameters(self) -> ad.FloatArray:
        """All parameters as one vector (weights row-major, then biases, per layer)."""
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat: ad.FloatArray) -> None:
        """Overwrite the parameters from a vector laid out as `flat_parameters`."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count(),):
            raise ad.ShapeError(
                f"expected {self.parameter_count()} parameters, got shape {flat.shape}"
            )
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def copy(self) -> Mlp:
        return Mlp(
            list(self.layer_widths),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    """Distribution of the generator input u: standard normal or uniform on [-1, 1]^dim."""

    kind: str = "uniform"
    dim: int = 10

    def __post_init__(self) -> None:
        """Validate kind and dimension."""
        if self.kind not in NOISE_KINDS:
            raise ad.ContractError(
                f"unknown noise kind '{self.kind}', expected one of {NOISE_KINDS}"
            )
        if self.dim < 1:
            raise ad.ContractError(f"noise dimension must be positive, got {self.dim}")

    def sample(self, count: int, rng: np.random.Generator) -> ad.FloatArray:
        """Draw `count` noise vectors as rows of a (count, dim) array."""
        if self.kind == "normal":
            return rng.standard_normal((count, self.dim))
        return rng.uniform(-1.0, 1.0, size=(count, self.dim))


def discriminator(
    input_dim: int,
    rng: np.random.Generator,
    output_activation: str = "sigmoid",
    hidden: tuple[int, ...] = DISCRIMINATOR_HIDDEN,
) -> Mlp:
    """Default discriminator: 3 tanh layers of 20 units and one score output."""
    return Mlp.initialize([input_dim, *hidden, 1], rng, output_activation=output_activation)


def generator(
    noise: NoiseSpec,
    output_dim: int,
    rng: np.random.Generator,
    hidden: tuple[int, ...] = GENERATOR_HIDDEN,
) -> Mlp:
    """Default generator: 2 tanh layers of 20 units and a linear output."""
    return Mlp.initialize([noise.dim, *hidden, output_dim], rng, output_activation="linear")


def mlp_forward(net: Mlp, x: Any, tape: ad.Tape | None = None) -> ad.GraphNode | ad.FloatArray:
    """Evaluate the network on one input vector or on a batch of row vectors.

    With a tape the parameters are bound to it as variables (once per tape), so
    the output is differentiable w.r.t. weights, biases and the input. Without a
    tape and with a plain input the network is evaluated eagerly.

    Raises:
        autodiff.ShapeError: if the trailing input dimension differs from the
            first layer width.
    """
    shape = x.shape if isinstance(x, ad.GraphNode) else np.shape(x)
    if not shape or shape[-1] != net.input_dim:
        raise ad.ShapeError(f"network expects inputs of width {net.input_dim}, got shape {shape}")

    params: list[Any] = net.parameters() if tape is None else tape.bind(net, net.parameters())
    h: Any = x
    n_layers = len(net.weights)
    for i in range(n_layers):
        h = ad.add(ad.matmul(h, params[2 * i]), params[2 * i + 1])
        if i < n_layers - 1:
            h = ad.tanh(h)
    if net.output_activation == "sigmoid":
        h = ad.sigmoid(h)
    return h  # type: ignore[no-any-return]


def parameter_gradient(net: Mlp, tape: ad.Tape) -> ad.FloatArray:
    """Adjoints of the parameters bound on `tape`, in `flat_parameters` layout."""
    nodes = tape.bound(net)
    if nodes is None:
        return np.zeros(net.parameter_count())
    return np.concatenate([node.adjoint.ravel() for node in nodes])


def sample_generator(
    net: Mlp,
    noise: NoiseSpec,
    count: int,
    rng: np.random.Generator,
    tape: ad.Tape | None = None,
) -> ad.GraphNode | ad.FloatArray:
    """Draw `count` parameter samples G_η(u) as rows of a (count, output_dim) result."""
    if noise.dim != net.input_dim:
        raise ad.ShapeError(f"noise dimension {noise.dim} != generator input width {net.input_dim}")
    if count == 0:
        return np.empty((0, net.output_dim))
    return mlp_forward(net, noise.sample(count, rng), tape)


def clip_weights(net: Mlp, c: float) -> None:
    """Clip every weight and bias entry of `net` to [-c, c] in place."""
    if not c > 0:
        raise ad.ContractError(f"clipping constant must be positive, got {c}")
    for p in net.parameters():
        np.clip(p, -c, c, out=p)


def dumps(net: Mlp) -> str:
    """Text serialization: header lines, then one parameter per line."""
    lines = [
        f"{_WIDTHS_KEY} {' '.join(str(w) for w in net.layer_widths)}",
        f"{_ACTIVATIONS_KEY} {net.hidden_activation} {net.output_activation}",
    ]
    lines.extend(repr(float(v)) for v in net.flat_parameters())
    return "\n".join(lines) + "\n"


def loads(text: str) -> Mlp:
    """Inverse of `dumps`.

    Raises:
        ValueError: (or a subclass) if the text is not a valid serialization.
    """
    lines = text.strip().splitlines()
    header = lines[:2]
    if len(header) < 2 or not (  # noqa: PLR2004 [two header lines]
        header[0].startswith(_WIDTHS_KEY) and header[1].startswith(_ACTIVATIONS_KEY)
    ):
        raise ad.ContractError("missing network serialization header")
    widths = [int(w) for w in lines[0].split()[1:]]
    activations = lines[1].split()[1:]
    if len(activations) != 2:  # noqa: PLR2004 [hidden and output]
        raise ad.ContractError("malformed activations header")
    net = dataclasses.replace(
        Mlp.zeros(widths, output_activation=activations[1]), hidden_activation=activations[0]
    )
    values = np.array([float(v) for v in lines[2:]])
    net.set_flat_parameters(values)
    return net


def save(net: Mlp, path: pathlib.Path) -> None:
    path.write_text(dumps(net))


def load(path: pathlib.Path) -> Mlp:
    return loads(path.read_text())
