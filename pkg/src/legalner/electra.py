"""Desk-scale calculator for replaced-token-detection pre-training losses.

The combined objective is  L = L_gen + weight * L_disc  where

    L_gen  = - sum over masked positions t of log p_gen[t]
    L_disc = - sum over all positions t of
               [ y[t] * log p_disc[t] + (1 - y[t]) * log(1 - p_disc[t]) ]

The generator term runs over the masked positions only; the discriminator
term runs over every position of the sequence, which is the point of the
objective (the model learns from all tokens, not just the masked ones).
No training happens here: the module only evaluates the formulas on given
probabilities, for study and unit verification.

Probabilities are clamped to [1e-12, 1 - 1e-12] before taking logs, so
boundary inputs stay finite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

EPSILON = 1e-12


def _clamp(p: float) -> float:
    return min(max(p, EPSILON), 1.0 - EPSILON)


@dataclass(frozen=True)
class ElectraBatch:
    """One scored sequence.

    ``masked`` holds the 0-based masked positions; ``gen_probs[t]`` is the
    generator's probability of restoring the original token at masked
    position t; ``replaced`` is the per-position 0/1 indicator of a
    replacement or masking operation (it must be 1 on every masked
    position, which is validated, not assumed); ``disc_probs[t]`` is the
    discriminator's probability that position t was replaced.
    """

    replaced: tuple[int, ...]
    disc_probs: tuple[float, ...]
    masked: tuple[int, ...] = ()
    gen_probs: Mapping[int, float] = field(default_factory=dict)
    weight: float = 1.0

    def __post_init__(self) -> None:
        t = len(self.replaced)
        if len(self.disc_probs) != t:
            raise ValueError(
                f"got {len(self.disc_probs)} discriminator probabilities for "
                f"sequence length {t}"
            )
        if any(y not in (0, 1) for y in self.replaced):
            raise ValueError("replacement indicators must be 0 or 1")
        for pos in self.masked:
            if not 0 <= pos < t:
                raise ValueError(f"masked position {pos} outside sequence of length {t}")
            if self.replaced[pos] != 1:
                raise ValueError(
                    f"masked position {pos} carries replacement indicator 0; "
                    "masking implies indicator 1"
                )
        for pos, p in self.gen_probs.items():
            if not 0.0 < p <= 1.0:
                raise ValueError(f"generator probability at {pos} outside (0, 1]: {p}")
        for i, p in enumerate(self.disc_probs):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"discriminator probability at {i} outside [0, 1]: {p}")
        if self.weight < 0:
            raise ValueError(f"discriminator weight must be >= 0, got {self.weight}")

    @classmethod
    def from_json(cls, data: str | bytes) -> "ElectraBatch":
        """Schema: {"replaced": [0/1...], "disc_probs": [...],
        "masked": [...], "gen_probs": [...], "lambda": float}.
        ``gen_probs`` is parallel to ``masked``."""
        payload = json.loads(data)
        masked = tuple(int(t) for t in payload.get("masked", ()))
        gen_list = payload.get("gen_probs", ())
        if len(gen_list) != len(masked):
            raise ValueError(
                f"{len(gen_list)} generator probabilities for {len(masked)} masked positions"
            )
        return cls(
            replaced=tuple(int(y) for y in payload["replaced"]),
            disc_probs=tuple(float(p) for p in payload["disc_probs"]),
            masked=masked,
            gen_probs=dict(zip(masked, (float(p) for p in gen_list))),
            weight=float(payload.get("lambda", 1.0)),
        )


def generator_loss(batch: ElectraBatch) -> float:
    """Negative log-likelihood of the generator over the masked positions."""
    total = 0.0
    for pos in batch.masked:
        if pos not in batch.gen_probs:
            raise ValueError(f"no generator probability for masked position {pos}")
        total -= math.log(_clamp(batch.gen_probs[pos]))
    return total


def discriminator_loss(batch: ElectraBatch) -> float:
    """Binary cross-entropy of the replacement detector over all positions."""
    total = 0.0
    for y, p in zip(batch.replaced, batch.disc_probs):
        p = _clamp(p)
        total -= y * math.log(p) + (1 - y) * math.log(1.0 - p)
    return total


def combined_loss(batch: ElectraBatch) -> float:
    return generator_loss(batch) + batch.weight * discriminator_loss(batch)
