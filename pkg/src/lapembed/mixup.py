"""Hidden-state interpolation for training: mixing-coefficient sampling,
split-point selection, and the mixed forward pipeline.

One mixing coefficient, one split layer, and one batch permutation are drawn
per batch. Mixing applies to the positive views only; anchors pass through
the encoder unmixed. The regression target for a mixed positive is the
matching convex combination of the anchors' embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import encoder as enc_mod
from .encoder import MlpEncoder


class MixupError(ValueError):
    """Invalid mixing parameters."""


@dataclass(frozen=True)
class MixPlan:
    lam: float  # mixing coefficient in [0, 1]
    split: int  # number of leading blocks in the mixed prefix
    permutation: np.ndarray  # length-B bijection

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise MixupError(f"lambda must be in [0, 1], got {self.lam}")
        perm = np.asarray(self.permutation, dtype=int)
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise MixupError("permutation must be a bijection on 0..B-1")
        object.__setattr__(self, "permutation", perm)


def identity_plan(batch_size: int) -> MixPlan:
    """Degenerate plan that reproduces the unmixed pipeline exactly."""
    return MixPlan(lam=1.0, split=0, permutation=np.arange(batch_size))


def sample_mix_plan(alpha: float, eligible_layers, batch_size: int,
                    rng: np.random.Generator) -> MixPlan:
    """lambda ~ Beta(alpha, alpha), split uniform over the eligible set,
    permutation uniform over S_B."""
    if alpha <= 0:
        raise MixupError("alpha must be > 0")
    if batch_size < 2:
        raise MixupError("batch size must be >= 2")
    eligible = list(eligible_layers)
    if not eligible:
        raise MixupError("eligible layer set must be nonempty")
    lam = float(rng.beta(alpha, alpha))
    split = int(eligible[rng.integers(len(eligible))])
    perm = rng.permutation(batch_size)
    return MixPlan(lam=lam, split=split, permutation=perm)


def mix_hidden(h_a: np.ndarray, h_b: np.ndarray, lam: float) -> np.ndarray:
    """Elementwise convex combination lam * h_a + (1 - lam) * h_b."""
    h_a = np.asarray(h_a, dtype=float)
    h_b = np.asarray(h_b, dtype=float)
    if h_a.shape != h_b.shape:
        raise MixupError(f"shape mismatch: {h_a.shape} vs {h_b.shape}")
    if not 0.0 <= lam <= 1.0:
        raise MixupError(f"lambda must be in [0, 1], got {lam}")
    return lam * h_a + (1.0 - lam) * h_b


def mixed_step_targets(enc: MlpEncoder, x: np.ndarray, x_pos: np.ndarray,
                       plan: MixPlan):
    """Forward pass of one mixed training step.

    Returns (z, z_pos_mix, z_mix):
      z          full embedding of the anchors,
      z_pos_mix  suffix applied to the interpolated prefix states of the
                 positive views and their permuted partners,
      z_mix      the same interpolation applied directly to z.
    The trace term compares z_mix with z_pos_mix; decorrelation acts on z.
    """
    x = np.asarray(x, dtype=float)
    x_pos = np.asarray(x_pos, dtype=float)
    if x.shape != x_pos.shape:
        raise MixupError(f"anchor/positive shape mismatch: {x.shape} vs {x_pos.shape}")
    if len(plan.permutation) != x.shape[0]:
        raise MixupError("plan permutation length does not match batch size")
    z = enc_mod.forward(enc, x)
    h = enc_mod.forward_split(enc, x_pos, plan.split)
    h_mix = mix_hidden(h, h[plan.permutation], plan.lam)
    z_pos_mix = enc_mod.forward_from(enc, h_mix, plan.split)
    z_mix = plan.lam * z + (1.0 - plan.lam) * z[plan.permutation]
    return z, z_pos_mix, z_mix
