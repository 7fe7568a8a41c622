"""Positive-pair trace loss, feature-decorrelation loss, and the analytic
identities used as cross-checks.

Reduction conventions follow the executable pseudocode form of the method:
the trace term is the mean of squared differences over all B*K elements, and
the decorrelation term is the sum of squared off-diagonal entries of the
uncentered second-moment matrix c = z^T z / B (equal to the covariance when
the encoder's final standardization has zeroed the column means).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LossError(ValueError):
    """Invalid loss inputs."""


@dataclass(frozen=True)
class LossBreakdown:
    trace_term: float
    decorrelation_term: float
    gamma: float
    total: float


def _check_batch(z, name="z"):
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise LossError(f"{name} must be a 2-D batch")
    return z


def trace_loss(z: np.ndarray, z_pos: np.ndarray) -> float:
    """Mean over all elements of (z - z_pos)^2."""
    z = _check_batch(z)
    z_pos = _check_batch(z_pos, "z_pos")
    if z.shape != z_pos.shape:
        raise LossError(f"shape mismatch: {z.shape} vs {z_pos.shape}")
    return float(((z - z_pos) ** 2).mean())


def second_moment(z: np.ndarray) -> np.ndarray:
    """c = z^T z / B (uncentered)."""
    z = _check_batch(z)
    if z.shape[0] < 2:
        raise LossError("batch size must be >= 2")
    return z.T @ z / z.shape[0]


def decorrelation_loss(z: np.ndarray) -> float:
    """Sum of squared off-diagonal entries of z^T z / B."""
    c = second_moment(z)
    off = c - np.diag(np.diag(c))
    return float((off**2).sum())


def total_loss(z: np.ndarray, z_pos: np.ndarray, gamma: float,
               allow_zero_gamma: bool = False) -> LossBreakdown:
    """trace + gamma * decorrelation; decorrelation is computed on the
    anchor batch z only. gamma = 0 is admitted only for the trace-only
    ablation (``allow_zero_gamma``)."""
    if gamma < 0 or (gamma == 0 and not allow_zero_gamma):
        raise LossError("gamma must be > 0 (0 only in ablation mode)")
    t = trace_loss(z, z_pos)
    d = decorrelation_loss(z)
    return LossBreakdown(
        trace_term=t,
        decorrelation_term=d,
        gamma=gamma,
        total=t + gamma * d,
    )


def trace_loss_grad(z: np.ndarray, z_pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d trace_loss / dz and / dz_pos."""
    z = _check_batch(z)
    z_pos = _check_batch(z_pos, "z_pos")
    if z.shape != z_pos.shape:
        raise LossError(f"shape mismatch: {z.shape} vs {z_pos.shape}")
    g = 2.0 * (z - z_pos) / z.size
    return g, -g


def decorrelation_loss_grad(z: np.ndarray) -> np.ndarray:
    """d decorrelation_loss / dz = (4/B) z (c - diag c)."""
    z = _check_batch(z)
    c = second_moment(z)
    off = c - np.diag(np.diag(c))
    return (4.0 / z.shape[0]) * z @ off


def total_loss_grad(z: np.ndarray, z_pos: np.ndarray, gamma: float):
    """Gradients of the total loss with respect to both batches."""
    gz, gzp = trace_loss_grad(z, z_pos)
    return gz + gamma * decorrelation_loss_grad(z), gzp


def frobenius_identity_gap(z: np.ndarray) -> float:
    """|  ||z^T z / B||_F^2  -  (1/B^2) sum_ij (z_i . z_j)^2  |.

    The two sides are algebraically identical (cyclic trace plus symmetry of
    the Gram matrix); the gap is floating-point noise only.
    """
    z = _check_batch(z)
    if z.shape[0] < 2:
        raise LossError("batch size must be >= 2")
    b = z.shape[0]
    lhs = np.linalg.norm(z.T @ z / b, "fro") ** 2
    gram = z @ z.T
    rhs = (gram**2).sum() / b**2
    return float(abs(lhs - rhs))


def analytic_anchor_gradient(z: np.ndarray, z_pos: np.ndarray, gamma: float,
                             i: int) -> np.ndarray:
    """Closed-form per-anchor gradient: (2/B)((1-gamma) z_i - z_i+ +
    gamma * sum_j (z_i . z_j / B) z_j).

    Diagnostic comparator only; training uses the exact gradient of the
    implemented loss. The two differ by a constant factor on the
    decorrelation part (see diagnostics.anchor_gradient_report).
    """
    z = _check_batch(z)
    z_pos = _check_batch(z_pos, "z_pos")
    b = z.shape[0]
    if not 0 <= i < b:
        raise LossError(f"row index {i} out of range for batch of {b}")
    weights = z @ z[i] / b  # z_i . z_j / B for each j
    push = weights @ z
    return (2.0 / b) * ((1.0 - gamma) * z[i] - z_pos[i] + gamma * push)
