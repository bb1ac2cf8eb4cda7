"""GAN loss pairs (model loss L^F, discriminator loss L^D) and their equilibria."""

from __future__ import annotations

import dataclasses
import logging
import math
from typing import Any

import numpy as np

from anakit import autodiff as ad


PROBABILITY_FLOOR = 1e-12
LOSS_KINDS = ("vanilla", "wasserstein", "kl")


@dataclasses.dataclass(frozen=True)
class LossPair:
    """One GAN variant.

    `generator_sign` is the orientation in which the generator descends on L^F:
    the Wasserstein critic and the KL discriminator both score the simulated
    samples on the opposite side from the vanilla discriminator, so their
    generators descend on -L^F.
    """

    kind: str
    equilibrium_model_loss: float
    equilibrium_discriminator_loss: float
    requires_clipping: bool
    output_activation: str
    generator_sign: float = 1.0


LOSS_PAIRS = {
    "vanilla": LossPair("vanilla", math.log(2.0), math.log(4.0), False, "sigmoid", 1.0),
    "wasserstein": LossPair("wasserstein", 0.0, 0.0, True, "linear", -1.0),
    "kl": LossPair("kl", 0.0, math.log(4.0), False, "sigmoid", -1.0),
}


def loss_pair(kind: str) -> LossPair:
    """Look up a loss pair by its config string."""
    try:
        return LOSS_PAIRS[kind]
    except KeyError:
        raise ad.ContractError(
            f"unknown loss kind '{kind}', expected one of {LOSS_KINDS}"
        ) from None


def _probabilities(d: Any) -> Any:
    """Clamp discriminator outputs to [1e-12, 1 - 1e-12] before taking logs."""
    values = ad.value_of(d)
    outside = ~((values >= 0.0) & (values <= 1.0))
    if np.any(outside):
        raise ad.DomainError(
            "probabilistic loss requires discriminator outputs in [0, 1]",
            float(values[outside].flat[0]),
        )
    near_edge = (values < PROBABILITY_FLOOR) | (values > 1.0 - PROBABILITY_FLOOR)
    saturated = int(np.count_nonzero(near_edge))
    if saturated:
        logging.debug("discriminator output saturated for %d entries", saturated)
        if isinstance(d, ad.GraphNode):
            d.tape.record_event("saturation", saturated)
    return ad.clamp(d, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)


def model_loss(kind: str, d_fake: Any, d_real: Any = None) -> Any:
    """Model loss L^F evaluated on the discriminator scores of simulated samples.

    Args:
        kind: "vanilla", "wasserstein" or "kl".
        d_fake: Discriminator outputs D(ỹ) for the simulated batch.
        d_real: Optional discriminator outputs D(y) for the observed batch. Only
            used by the Wasserstein pair, whose model loss is then reported
            relative to the mean observed score (zero at equilibrium). The shift
            does not depend on the generator.

    Returns:
        Scalar node (or value, for plain inputs).
    """
    loss_pair(kind)
    if kind == "wasserstein":
        loss = ad.reduce_mean(d_fake)
        if d_real is not None:
            loss = ad.subtract(loss, ad.reduce_mean(d_real))
        return loss

    p = _probabilities(d_fake)
    if kind == "vanilla":
        return ad.negate(ad.reduce_mean(ad.log(p)))
    return ad.reduce_mean(ad.subtract(ad.log(ad.subtract(1.0, p)), ad.log(p)))


def discriminator_loss(kind: str, d_real: Any, d_fake: Any, literal: bool = False) -> Any:
    """Discriminator loss L^D.

    The Wasserstein critic minimizes -mean D(y) + mean D(ỹ); with `literal` set,
    only the -mean D(y) term is returned.
    """
    loss_pair(kind)
    real_shape, fake_shape = np.shape(ad.value_of(d_real)), np.shape(ad.value_of(d_fake))
    if real_shape != fake_shape:
        raise ad.ShapeError(f"real and fake score batches differ: {real_shape} vs {fake_shape}")

    if kind == "wasserstein":
        loss = ad.negate(ad.reduce_mean(d_real))
        if not literal:
            loss = ad.add(loss, ad.reduce_mean(d_fake))
        return loss

    p_real = _probabilities(d_real)
    p_fake = _probabilities(d_fake)
    if kind == "vanilla":
        terms = ad.add(ad.log(p_real), ad.log(ad.subtract(1.0, p_fake)))
    else:
        terms = ad.add(ad.log(p_fake), ad.log(ad.subtract(1.0, p_real)))
    return ad.negate(ad.reduce_mean(terms))


def generator_objective(kind: str, d_fake: Any, d_real: Any = None) -> Any:
    """The quantity the generator update descends on: generator_sign * L^F."""
    pair = loss_pair(kind)
    loss = model_loss(kind, d_fake, d_real)
    if pair.generator_sign < 0:
        return ad.negate(loss)
    return loss
