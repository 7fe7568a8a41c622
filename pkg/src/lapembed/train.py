"""SGD training loop: momentum, weight decay, cosine learning-rate schedule,
mixed-step gradients, checkpointing, and collapse instrumentation.

A full run is a pure function of (dataset, config, seed): all randomness is
drawn from generators seeded by the config, and every numerical step is
deterministic, so repeated runs produce byte-identical checkpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import encoder as enc_mod
from .data import AugmentationPolicy, Dataset, paired_batches
from .encoder import MlpEncoder, load_encoder, save_encoder
from .losses import (LossBreakdown, decorrelation_loss, decorrelation_loss_grad,
                     trace_loss)
from .mixup import MixPlan, identity_plan, mix_hidden, sample_mix_plan

save_checkpoint = save_encoder
load_checkpoint = load_encoder


class ConfigError(ValueError):
    """Invalid training configuration."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss encountered; training aborted."""

    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step


@dataclass(frozen=True)
class MixupConfig:
    enabled: bool = True
    alpha: float = 2.0
    eligible_layers: tuple[int, ...] = (0, 1, 2)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr0: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    gamma: float = 0.005
    seed: int = 0
    mixup: MixupConfig = field(default_factory=MixupConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0 (0 is the trace-only ablation)")


@dataclass
class EpochRecord:
    epoch: int
    trace_term: float
    decorrelation_term: float
    total: float
    learning_rate: float
    effective_rank: float
    min_dim_std: float
    mean_dim_std: float


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self, path) -> None:
        cols = ("epoch", "trace_term", "decorrelation_term", "total",
                "learning_rate", "effective_rank", "min_dim_std", "mean_dim_std")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.records:
                cells = [str(r.epoch)]
                cells += [repr(float(getattr(r, c))) for c in cols[1:]]
                fh.write(",".join(cells) + "\n")


def cosine_lr(lr0: float, step: int, total_steps: int) -> float:
    """lr0 * (1 + cos(pi * t / T)) / 2; anneals to exactly 0 at t = T."""
    if total_steps < 1:
        raise ConfigError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ConfigError(f"step {step} outside 0..{total_steps}")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def sgd_step(params, grads, velocity, lr, momentum, weight_decay,
             decay_mask=None):
    """In-place momentum SGD update.

    v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
    ``decay_mask`` marks the parameters that receive weight decay (affine
    weights); others (biases) are updated without decay.
    """
    if not (len(params) == len(grads) == len(velocity)):
        raise ConfigError("params/grads/velocity length mismatch")
    if decay_mask is None:
        decay_mask = [True] * len(params)
    for p, g, v, decayed in zip(params, grads, velocity, decay_mask):
        if p.shape != g.shape or p.shape != v.shape:
            raise ConfigError("parameter/gradient shape mismatch")
        eff = g + weight_decay * p if decayed else g
        v *= momentum
        v += eff
        p -= lr * v
    return params, velocity


def collapse_metrics(z: np.ndarray) -> tuple[float, float]:
    """(effective rank, minimum per-dimension std) of an embedding matrix.

    Effective rank counts singular values above 1% of the largest.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ConfigError("need an N x K matrix with N >= 2")
    sv = np.linalg.svd(z, compute_uv=False)
    if sv[0] == 0.0:
        rank = 0
    else:
        rank = int((sv > 0.01 * sv[0]).sum())
    return float(rank), float(z.std(axis=0).min())


def mixed_step_loss_and_grads(enc: MlpEncoder, x: np.ndarray, x_pos: np.ndarray,
                              plan: MixPlan, gamma: float):
    """One training step's loss breakdown and exact parameter gradients.

    Pipeline: z = f(x); the positive views are run through the prefix,
    interpolated according to the plan, and finished by the suffix; the
    trace term compares the interpolated z against the mixed positives and
    the decorrelation term acts on z. Gradients flow through every branch,
    including the batch statistics of standardization layers.
    """
    perm = plan.permutation
    lam = plan.lam

    cache_anchor = enc_mod.forward_with_cache(enc, x)
    z = cache_anchor.out
    cache_prefix = enc_mod.forward_with_cache(enc, x_pos, 0, plan.split)
    h = cache_prefix.out
    h_mix = mix_hidden(h, h[perm], lam)
    cache_suffix = enc_mod.forward_with_cache(enc, h_mix, plan.split, None)
    z_pos_mix = cache_suffix.out
    z_mix = lam * z + (1.0 - lam) * z[perm]

    t = trace_loss(z_mix, z_pos_mix)
    d = decorrelation_loss(z)
    breakdown = LossBreakdown(t, d, gamma, t + gamma * d)

    g_pair = 2.0 * (z_mix - z_pos_mix) / z.size
    dz = lam * g_pair
    np.add.at(dz, perm, (1.0 - lam) * g_pair)
    dz += gamma * decorrelation_loss_grad(z)
    grads, _ = enc_mod.backward(enc, cache_anchor, dz)

    grads_suffix, dh_mix = enc_mod.backward(enc, cache_suffix, -g_pair)
    enc_mod.accumulate_grads(grads, grads_suffix)
    dh = lam * dh_mix
    np.add.at(dh, perm, (1.0 - lam) * dh_mix)
    grads_prefix, _ = enc_mod.backward(enc, cache_prefix, dh)
    enc_mod.accumulate_grads(grads, grads_prefix)
    return breakdown, grads


def _flatten_grads(enc: MlpEncoder, grads):
    flat = []
    for dw, db in grads:
        flat.append(dw)
        flat.append(db)
    return flat


def train(enc: MlpEncoder, ds: Dataset, cfg: TrainConfig,
          policy: AugmentationPolicy | None = None):
    """Run the full training loop; returns (encoder, TrainReport).

    The encoder is updated in place. Aborts with TrainingDiverged on the
    first non-finite loss.
    """
    if ds.n < cfg.batch_size:
        raise ConfigError(
            f"dataset size {ds.n} smaller than batch size {cfg.batch_size}"
        )
    if policy is None:
        from .data import default_policy
        policy = default_policy(ds)

    params = enc.parameters()
    velocity = [np.zeros_like(p) for p in params]
    # Weight decay on affine weights only (even indices), never biases.
    decay_mask = [i % 2 == 0 for i in range(len(params))]
    eligible = tuple(s for s in cfg.mixup.eligible_layers if s in enc.eligible_splits)
    if cfg.mixup.enabled and not eligible:
        raise ConfigError("no eligible mixup split layers for this encoder")
    mix_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    steps_per_epoch = ds.n // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    report = TrainReport()
    step = 0
    batches = paired_batches(ds, policy, cfg.batch_size,
                             seed=np.random.SeedSequence([cfg.seed, 0]),
                             epochs=cfg.epochs)
    for epoch in range(cfg.epochs):
        trace_sum = decorr_sum = total_sum = 0.0
        lr = cfg.lr0
        for _ in range(steps_per_epoch):
            x, x_pos, _ids = next(batches)
            if cfg.mixup.enabled:
                plan = sample_mix_plan(cfg.mixup.alpha, eligible,
                                       cfg.batch_size, mix_rng)
            else:
                plan = identity_plan(cfg.batch_size)
            breakdown, grads = mixed_step_loss_and_grads(enc, x, x_pos, plan,
                                                         cfg.gamma)
            if not math.isfinite(breakdown.total):
                raise TrainingDiverged(step, breakdown.total)
            lr = cosine_lr(cfg.lr0, step, total_steps)
            sgd_step(params, _flatten_grads(enc, grads), velocity, lr,
                     cfg.momentum, cfg.weight_decay, decay_mask)
            trace_sum += breakdown.trace_term
            decorr_sum += breakdown.decorrelation_term
            total_sum += breakdown.total
            step += 1
        z_full = enc_mod.forward(enc, ds.features)
        rank, min_std = collapse_metrics(z_full)
        report.records.append(EpochRecord(
            epoch=epoch,
            trace_term=trace_sum / steps_per_epoch,
            decorrelation_term=decorr_sum / steps_per_epoch,
            total=total_sum / steps_per_epoch,
            learning_rate=lr,
            effective_rank=rank,
            min_dim_std=min_std,
            mean_dim_std=float(z_full.std(axis=0).mean()),
        ))
    return enc, report
