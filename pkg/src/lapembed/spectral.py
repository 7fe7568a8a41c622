"""Exact spectral solutions of the relaxed cut problem.

Solves L z = lambda D z by reducing to the symmetric problem
D^-1/2 L D^-1/2 v = lambda v, diagonalized with a cyclic Jacobi rotation
scheme, then mapping v -> D^-1/2 v. Also provides a brute-force enumeration
baseline for the discrete partition problem on small graphs.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .graph import GraphError, Partition, WeightedGraph, indicator_matrix

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigensolverError(RuntimeError):
    """Jacobi iteration failed to reach the off-diagonal tolerance."""

    def __init__(self, off_norm: float):
        super().__init__(
            f"Jacobi sweep cap reached; off-diagonal Frobenius norm {off_norm:.3e}"
        )
        self.off_norm = off_norm


@dataclass(frozen=True)
class EigenmapResult:
    """k smallest generalized eigenpairs of L z = lambda D z."""

    eigenvalues: np.ndarray  # ascending, length k
    embedding: np.ndarray  # n x k, D-orthonormal columns
    residual: float  # max_k ||L z_k - lambda_k D z_k||_inf


def jacobi_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of a dense symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns). Stops when the
    off-diagonal Frobenius norm drops below JACOBI_TOL (scaled by the matrix
    norm), or raises after JACOBI_MAX_SWEEPS sweeps.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1.0)

    def off_norm(m):
        off = m - np.diag(np.diag(m))
        return np.linalg.norm(off)

    for _ in range(JACOBI_MAX_SWEEPS):
        if off_norm(a) < JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                # Classic stable rotation angle choice
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:  # tau*tau would overflow; use the limit
                    t = 0.5 / tau
                elif tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise EigensolverError(off_norm(a))

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, k])))
        if out[i, k] < 0:
            out[:, k] = -out[:, k]
    return out


def generalized_eigenmaps(g: WeightedGraph, k: int) -> EigenmapResult:
    """k smallest generalized eigenpairs of L z = lambda D z."""
    if not 1 <= k <= g.n:
        raise GraphError(f"k must be in 1..{g.n}, got {k}")
    d = g.degrees
    d_isqrt = 1.0 / np.sqrt(d)
    lap = g.laplacian()
    sym = d_isqrt[:, None] * lap * d_isqrt[None, :]
    sym = 0.5 * (sym + sym.T)
    w, v = jacobi_eigh(sym)
    w = w[:k]
    z = d_isqrt[:, None] * v[:, :k]
    z = _fix_signs(z)
    # Residual of the generalized problem
    dz = d[:, None] * z
    res = np.abs(lap @ z - dz * w[None, :]).max()
    return EigenmapResult(eigenvalues=w, embedding=z, residual=float(res))


def trace_objective(g: WeightedGraph, z: np.ndarray) -> float:
    """Tr(Z^T L Z) for an arbitrary embedding matrix."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] != g.n:
        raise GraphError(f"embedding must be {g.n} x K, got shape {z.shape}")
    return float(np.trace(z.T @ g.laplacian() @ z))


def brute_force_optimal_partition(g: WeightedGraph, k: int) -> tuple[Partition, float]:
    """Exhaustive search for the partition minimizing Tr(Z^T L Z).

    Enumerates all surjective assignments of n vertices to k clusters;
    bounded to n <= 12, k <= 3.
    """
    if g.n > 12 or k > 3:
        raise GraphError("brute force bounded to n <= 12, k <= 3")
    if k < 1 or k > g.n:
        raise GraphError(f"k must be in 1..{g.n}")
    best = None
    best_obj = np.inf
    lap = g.laplacian()
    for assign in product(range(k), repeat=g.n):
        if len(set(assign)) != k:
            continue
        p = Partition(np.array(assign), k)
        z = indicator_matrix(g, p)
        obj = float(np.trace(z.T @ lap @ z))
        if obj < best_obj:
            best_obj, best = obj, p
    return best, best_obj


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between the column spaces of a and b (radians).

    Used to compare eigenspaces with repeated eigenvalues, where individual
    eigenvectors are only defined up to rotation within the eigenspace.
    """
    qa, _ = np.linalg.qr(np.asarray(a, dtype=float))
    qb, _ = np.linalg.qr(np.asarray(b, dtype=float))
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))
