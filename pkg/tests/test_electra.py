import json
import math

import pytest

from legalner.electra import (
    ElectraBatch,
    combined_loss,
    discriminator_loss,
    generator_loss,
)

# frozen hand computations (full precision, from the stated log expressions)
MINUS_LOG_HALF = 0.6931471805599453          # -ln 0.5
DISC_EXAMPLE = 0.328504066972036             # -(ln 0.8 + ln 0.9)
GEN_TWO_MASKS = 2.0794415416798357           # -(ln 0.5 + ln 0.25) = ln 8


def test_generator_loss_single_mask():
    batch = ElectraBatch(replaced=(1,), disc_probs=(0.5,), masked=(0,), gen_probs={0: 0.5})
    assert generator_loss(batch) == pytest.approx(MINUS_LOG_HALF, abs=1e-9)


def test_generator_loss_perfect_generator():
    batch = ElectraBatch(replaced=(1, 1), disc_probs=(0.5, 0.5), masked=(0, 1),
                         gen_probs={0: 1.0, 1: 1.0})
    assert generator_loss(batch) == pytest.approx(0.0, abs=1e-9)


def test_generator_loss_two_masks():
    batch = ElectraBatch(replaced=(1, 1), disc_probs=(0.5, 0.5), masked=(0, 1),
                         gen_probs={0: 0.5, 1: 0.25})
    assert generator_loss(batch) == pytest.approx(GEN_TWO_MASKS, abs=1e-9)


def test_discriminator_loss_hand_example():
    batch = ElectraBatch(replaced=(1, 0), disc_probs=(0.8, 0.1))
    assert discriminator_loss(batch) == pytest.approx(DISC_EXAMPLE, abs=1e-9)


def test_discriminator_loss_runs_over_all_positions():
    # adding an unmasked, well-classified position still contributes
    short = ElectraBatch(replaced=(1,), disc_probs=(0.8,))
    longer = ElectraBatch(replaced=(1, 0), disc_probs=(0.8, 0.3))
    assert discriminator_loss(longer) > discriminator_loss(short)


def test_discriminator_loss_single_coin_flip():
    batch = ElectraBatch(replaced=(1,), disc_probs=(0.5,))
    assert discriminator_loss(batch) == pytest.approx(math.log(2), abs=1e-9)


def test_perfect_discriminator_goes_to_zero():
    batch = ElectraBatch(replaced=(1, 0), disc_probs=(1.0, 0.0))
    assert discriminator_loss(batch) == pytest.approx(0.0, abs=1e-9)
    assert discriminator_loss(batch) >= 0.0


def test_combined_loss_weight_zero_is_generator_loss():
    batch = ElectraBatch(replaced=(1, 0), disc_probs=(0.8, 0.1), masked=(0,),
                         gen_probs={0: 0.5}, weight=0.0)
    assert combined_loss(batch) == generator_loss(batch)


def test_combined_loss_weight_one_adds_components():
    batch = ElectraBatch(replaced=(1, 0), disc_probs=(0.8, 0.1), masked=(0,),
                         gen_probs={0: 0.5}, weight=1.0)
    assert combined_loss(batch) == pytest.approx(
        MINUS_LOG_HALF + DISC_EXAMPLE, abs=1e-9
    )


def test_combined_loss_monotone_in_weight():
    losses = []
    for weight in (0.0, 0.5, 1.0, 5.0, 50.0):
        batch = ElectraBatch(replaced=(1, 0), disc_probs=(0.8, 0.1), masked=(0,),
                             gen_probs={0: 0.5}, weight=weight)
        losses.append(combined_loss(batch))
    assert losses == sorted(losses)


def test_additive_decomposition():
    a = ElectraBatch(replaced=(1,), disc_probs=(0.8,))
    b = ElectraBatch(replaced=(0,), disc_probs=(0.1,))
    ab = ElectraBatch(replaced=(1, 0), disc_probs=(0.8, 0.1))
    assert discriminator_loss(ab) == pytest.approx(
        discriminator_loss(a) + discriminator_loss(b), abs=1e-12
    )


def test_validation_errors():
    with pytest.raises(ValueError, match="length"):
        ElectraBatch(replaced=(1, 0), disc_probs=(0.5,))
    with pytest.raises(ValueError, match="indicator 0"):
        ElectraBatch(replaced=(0,), disc_probs=(0.5,), masked=(0,), gen_probs={0: 0.5})
    with pytest.raises(ValueError, match="outside sequence"):
        ElectraBatch(replaced=(1,), disc_probs=(0.5,), masked=(9,), gen_probs={9: 0.5})
    with pytest.raises(ValueError, match="weight"):
        ElectraBatch(replaced=(1,), disc_probs=(0.5,), weight=-1.0)
    with pytest.raises(ValueError, match="generator probability"):
        ElectraBatch(replaced=(1,), disc_probs=(0.5,), masked=(0,), gen_probs={0: 0.0})


def test_missing_generator_probability_is_an_error():
    batch = ElectraBatch(replaced=(1, 1), disc_probs=(0.5, 0.5), masked=(0, 1),
                         gen_probs={0: 0.5, 1: 0.5})
    object.__setattr__(batch, "gen_probs", {0: 0.5})
    with pytest.raises(ValueError, match="no generator probability"):
        generator_loss(batch)


def test_boundary_probabilities_stay_finite():
    batch = ElectraBatch(replaced=(1, 0), disc_probs=(0.0, 1.0))
    assert math.isfinite(discriminator_loss(batch))


def test_json_batch_loading():
    payload = {
        "replaced": [1, 0],
        "disc_probs": [0.8, 0.1],
        "masked": [0],
        "gen_probs": [0.5],
        "lambda": 1.0,
    }
    batch = ElectraBatch.from_json(json.dumps(payload))
    assert generator_loss(batch) == pytest.approx(MINUS_LOG_HALF, abs=1e-9)
    assert discriminator_loss(batch) == pytest.approx(DISC_EXAMPLE, abs=1e-9)
    with pytest.raises(ValueError, match="generator probabilities"):
        ElectraBatch.from_json(json.dumps({**payload, "gen_probs": []}))
