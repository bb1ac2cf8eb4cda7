"""Tests for losses.py module."""

from __future__ import annotations

import math

import numpy as np
import pytest

from anakit import autodiff as ad, losses


@pytest.mark.parametrize(
    ("kind", "model", "disc"),
    [
        ("vanilla", math.log(2.0), math.log(4.0)),
        ("wasserstein", 0.0, 0.0),
        ("kl", 0.0, math.log(4.0)),
    ],
)
def test_equilibrium_values(kind: str, model: float, disc: float) -> None:
    """Unit tests for method."""
    pair = losses.loss_pair(kind)
    assert pair.equilibrium_model_loss == pytest.approx(model, abs=1e-12)
    assert pair.equilibrium_discriminator_loss == pytest.approx(disc, abs=1e-12)

    # an uninformative discriminator attains the equilibrium values
    half = np.full(8, 0.5) if kind != "wasserstein" else np.full(8, 0.3)
    assert float(losses.model_loss(kind, half, half)) == pytest.approx(model, abs=1e-12)
    assert float(losses.discriminator_loss(kind, half, half)) == pytest.approx(disc, abs=1e-12)


def test_pair_properties() -> None:
    """Unit tests for method."""
    assert losses.loss_pair("wasserstein").requires_clipping
    assert losses.loss_pair("wasserstein").output_activation == "linear"
    assert not losses.loss_pair("vanilla").requires_clipping
    assert losses.loss_pair("kl").output_activation == "sigmoid"
    with pytest.raises(ad.ContractError):
        losses.loss_pair("hinge")


@pytest.mark.parametrize(
    ("kind", "toward_real"), [("vanilla", 1.0), ("wasserstein", 1.0), ("kl", -1.0)]
)
def test_generator_descends_toward_real_scores(kind: str, toward_real: float) -> None:
    """Descending on the generator objective moves D(fake) toward the real-data side."""
    tape = ad.Tape()
    d_fake = tape.variable(np.full(4, 0.3))
    d_real = tape.constant(np.full(4, 0.6))
    ad.backward(tape, losses.generator_objective(kind, d_fake, d_real))
    assert np.all(-d_fake.adjoint * toward_real > 0)


def test_wasserstein_literal_loss() -> None:
    """Unit tests for method."""
    real = np.array([1.0, 3.0])
    fake = np.array([0.5, 0.5])
    assert float(losses.discriminator_loss("wasserstein", real, fake)) == pytest.approx(-1.5)
    literal = losses.discriminator_loss("wasserstein", real, fake, literal=True)
    assert float(literal) == pytest.approx(-2.0)
    assert float(losses.model_loss("wasserstein", fake)) == pytest.approx(0.5)
    assert float(losses.model_loss("wasserstein", fake, real)) == pytest.approx(-1.5)


def test_probabilistic_losses_need_probabilities() -> None:
    """Unit tests for method."""
    with pytest.raises(ad.DomainError):
        losses.model_loss("vanilla", np.array([0.5, 1.5]))
    with pytest.raises(ad.DomainError):
        losses.discriminator_loss("kl", np.array([-0.1]), np.array([0.5]))


def test_shape_mismatch() -> None:
    """Unit tests for method."""
    with pytest.raises(ad.ShapeError):
        losses.discriminator_loss("vanilla", np.full(3, 0.5), np.full(4, 0.5))


def test_saturated_outputs_are_clamped() -> None:
    """Unit tests for method."""
    tape = ad.Tape()
    d_fake = tape.variable(np.array([0.0, 0.5]))
    loss = losses.model_loss("vanilla", d_fake)
    assert np.isfinite(ad.tape_value(loss))
    assert tape.events["saturation"] == 1

    value = losses.discriminator_loss("vanilla", np.array([1.0]), np.array([1.0]))
    assert float(value) == pytest.approx(-math.log(losses.PROBABILITY_FLOOR), rel=1e-4)


def test_loss_examples() -> None:
    """Unit tests for method."""
    assert float(losses.model_loss("wasserstein", np.array([1.0, 2.0, 3.0]))) == pytest.approx(2.0)

    eps = 1e-12
    perfect = losses.discriminator_loss("vanilla", np.full(3, 1.0 - eps), np.full(3, eps))
    assert float(perfect) == pytest.approx(0.0, abs=1e-9)


def test_vanilla_model_loss_decreases_with_fake_scores() -> None:
    """Unit tests for method."""
    scores = np.linspace(0.05, 0.95, 19)
    values = [float(losses.model_loss("vanilla", np.full(6, s))) for s in scores]
    assert np.all(np.diff(values) < 0)

    base = np.array([0.2, 0.4, 0.6])
    for i in range(3):
        raised = base.copy()
        raised[i] += 0.1
        assert float(losses.model_loss("vanilla", raised)) < float(
            losses.model_loss("vanilla", base)
        )


def test_vanilla_model_loss_gradient() -> None:
    """Unit tests for method."""
    scores = np.array([0.1, 0.35, 0.5, 0.8, 0.97])
    tape = ad.Tape()
    d_fake = tape.variable(scores)
    ad.backward(tape, losses.model_loss("vanilla", d_fake))
    np.testing.assert_allclose(d_fake.adjoint, -1.0 / (len(scores) * scores), rtol=1e-12)


def test_wasserstein_critic_prefers_separation() -> None:
    """Unit tests for method."""
    fake = np.array([0.1, 0.2, 0.3])

    def critic_objective(real: np.ndarray, fake: np.ndarray) -> float:
        literal = losses.discriminator_loss("wasserstein", real, fake, literal=True)
        return float(literal) + float(np.mean(fake))

    mixed = critic_objective(np.array([0.1, 0.2, 0.3]), fake)
    separated = critic_objective(np.array([0.6, 0.7, 0.8]), fake)
    wider = critic_objective(np.array([0.6, 0.7, 0.8]), fake - 0.5)
    assert separated < mixed
    assert wider < separated
    assert float(losses.discriminator_loss("wasserstein", np.array([0.6, 0.7, 0.8]), fake)) == (
        pytest.approx(separated)
    )

    tape = ad.Tape()
    real_node = tape.variable(np.array([0.4, 0.5]))
    fake_node = tape.variable(np.array([0.4, 0.5]))
    ad.backward(tape, losses.discriminator_loss("wasserstein", real_node, fake_node))
    # raising real scores and lowering fake scores both decrease the loss
    assert np.all(real_node.adjoint < 0)
    assert np.all(fake_node.adjoint > 0)
