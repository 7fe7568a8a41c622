"""Identity and cross-check suites: the cut/Laplacian trace identity, the
discrete-vs-relaxed bound, the covariance Frobenius identity, training
gradient checks against finite differences, and the closed-form anchor
gradient diagnostic.

Each check returns (name, passed, detail) so the CLI can report per-identity
results; the functions are also exercised directly by the acceptance tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import encoder as enc_mod
from .graph import WeightedGraph
from .losses import decorrelation_loss, frobenius_identity_gap, analytic_anchor_gradient
from .mixup import MixPlan
from .spectral import brute_force_optimal_partition, generalized_eigenmaps
from .train import mixed_step_loss_and_grads


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_graph(rng: np.random.Generator, n: int) -> WeightedGraph:
    """Dense random similarity graph with strictly positive degrees."""
    s = rng.uniform(0.0, 1.0, size=(n, n))
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 0.0)
    # Random sparsification that keeps every vertex connected
    mask = rng.uniform(size=(n, n)) < 0.7
    mask = np.triu(mask, 1)
    mask = mask | mask.T
    s = s * mask
    s[s.sum(axis=1) == 0, :] = 0.0  # will be repaired below
    for i in range(n):
        if s[i].sum() == 0.0:
            j = (i + 1) % n
            s[i, j] = s[j, i] = rng.uniform(0.1, 1.0)
    return WeightedGraph(s)


def _all_surjective_assignments(n: int, k: int) -> np.ndarray:
    rows = [a for a in product(range(k), repeat=n) if len(set(a)) == k]
    return np.array(rows, dtype=int)


def check_cut_identity(graphs: int = 200, max_n: int = 10, seed: int = 0,
                       tol: float = 1e-10) -> CheckResult:
    """Tr(Z^T L Z) as a quadratic form vs half the summed leave-cluster
    transition probabilities, over all partitions of random graphs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(graphs):
        n = int(rng.integers(4, max_n + 1))
        k = int(rng.integers(2, 4))
        g = random_graph(rng, n)
        assigns = _all_surjective_assignments(n, k)
        onehot = np.eye(k)[assigns]  # M x n x k
        d = g.degrees
        vols = np.einsum("mnk,n->mk", onehot, d)
        z = onehot / np.sqrt(vols)[:, None, :]
        # Side A: quadratic form with the explicit Laplacian
        lap = g.laplacian()
        lz = np.einsum("ij,mjk->mik", lap, z)
        side_a = np.einsum("mik,mik->m", z, lz)
        # Side B: inter-cluster transition probabilities from S and volumes
        se = np.einsum("ij,mjk->mik", g.similarity, onehot)
        within = np.einsum("mik,mik->mk", onehot, se)
        cross = vols - within
        side_b = (cross / vols).sum(axis=1)
        worst = max(worst, float(np.abs(side_a - side_b).max()))
    return CheckResult("cut_trace_identity", worst < tol,
                       f"max gap {worst:.3e} over {graphs} graphs (tol {tol:g})")


def check_relaxation_bound(graphs: int = 100, max_n: int = 12, k: int = 2,
                           seed: int = 1, slack: float = 1e-9) -> CheckResult:
    """Sum of the k smallest generalized eigenvalues never exceeds the
    brute-force discrete optimum."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(graphs):
        n = int(rng.integers(4, max_n + 1))
        g = random_graph(rng, n)
        relaxed = float(generalized_eigenmaps(g, k).eigenvalues.sum())
        _, discrete = brute_force_optimal_partition(g, k)
        worst = max(worst, relaxed - discrete)
    return CheckResult("relaxation_lower_bound", worst <= slack,
                       f"max (relaxed - discrete) = {worst:.3e} (slack {slack:g})")


def check_frobenius_identity(trials: int = 100, seed: int = 2,
                             tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        b = int(rng.integers(2, 17))
        k = int(rng.integers(1, 17))
        z = rng.normal(scale=2.0, size=(b, k))
        worst = max(worst, frobenius_identity_gap(z))
    return CheckResult("covariance_frobenius_identity", worst < tol,
                       f"max gap {worst:.3e} over {trials} matrices (tol {tol:g})")


def _fd_param_gradient(loss_fn, params, eps: float = 1e-4):
    """Central finite differences of loss_fn() with respect to each entry of
    the given parameter arrays (perturbed in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_fn()
            flat[i] = orig - eps
            lo = loss_fn()
            flat[i] = orig
            gf[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def check_training_gradients(instances: int = 20, seed: int = 3,
                             rel_tol: float = 1e-5) -> CheckResult:
    """Backprop gradients of the mixed total loss vs central finite
    differences, over random small encoders, batches, and mix plans."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        depth = int(rng.integers(1, 4))
        dims = [int(rng.integers(2, 9)) for _ in range(depth + 1)]
        enc = enc_mod.init_encoder(dims, seed=int(rng.integers(1 << 30)))
        b = int(rng.integers(3, 7))
        x = rng.normal(size=(b, dims[0]))
        x_pos = x + 0.3 * rng.normal(size=(b, dims[0]))
        plan = MixPlan(
            lam=float(rng.uniform()),
            split=int(rng.choice(enc.eligible_splits)),
            permutation=rng.permutation(b),
        )
        gamma = float(rng.uniform(0.001, 0.05))
        _, grads = mixed_step_loss_and_grads(enc, x, x_pos, plan, gamma)
        analytic = []
        for dw, db in grads:
            analytic.extend([dw, db])

        def loss_fn():
            breakdown, _ = mixed_step_loss_and_grads(enc, x, x_pos, plan, gamma)
            return breakdown.total

        numeric = _fd_param_gradient(loss_fn, enc.parameters())
        a = np.concatenate([g.ravel() for g in analytic])
        f = np.concatenate([g.ravel() for g in numeric])
        denom = max(np.linalg.norm(f), 1e-8)
        worst = max(worst, float(np.linalg.norm(a - f) / denom))
    return CheckResult("training_gradients_vs_fd", worst <= rel_tol,
                       f"max relative error {worst:.3e} over {instances} instances "
                       f"(tol {rel_tol:g})")


def anchor_gradient_report(batches: int = 10, batch_size: int = 8, k: int = 6,
                           gamma: float = 0.01, seed: int = 4):
    """Cosine similarity and magnitude ratio between the closed-form anchor
    gradient and finite differences of the norm-based loss
    (1/B) sum_i ||z_i - z_i+||^2 + gamma * decorrelation(z).

    The magnitude ratio is reported, not asserted: the closed form and the
    exact gradient differ by a constant factor on the decorrelation part.
    """
    rng = np.random.default_rng(seed)
    eps = 1e-5
    cosines, ratios = [], []
    for _ in range(batches):
        z = rng.normal(size=(batch_size, k))
        # Standardize so the closed form's unit-diagonal assumption holds
        z = (z - z.mean(axis=0)) / z.std(axis=0)
        z_pos = z + 0.5 * rng.normal(size=(batch_size, k))

        def norm_loss(zz):
            pair = ((zz - z_pos) ** 2).sum(axis=1).mean()
            return pair + gamma * decorrelation_loss(zz)

        i = int(rng.integers(batch_size))
        fd = np.zeros(k)
        for c in range(k):
            zp = z.copy()
            zp[i, c] += eps
            zm = z.copy()
            zm[i, c] -= eps
            fd[c] = (norm_loss(zp) - norm_loss(zm)) / (2.0 * eps)
        closed = analytic_anchor_gradient(z, z_pos, gamma, i)
        cos = float(closed @ fd / (np.linalg.norm(closed) * np.linalg.norm(fd)))
        cosines.append(cos)
        ratios.append(float(np.linalg.norm(closed) / np.linalg.norm(fd)))
    return {
        "min_cosine": min(cosines),
        "mean_cosine": float(np.mean(cosines)),
        "mean_magnitude_ratio": float(np.mean(ratios)),
        "min_magnitude_ratio": min(ratios),
        "max_magnitude_ratio": max(ratios),
    }


def check_anchor_gradient(min_cosine: float = 0.99, **kwargs) -> CheckResult:
    rep = anchor_gradient_report(**kwargs)
    return CheckResult(
        "closed_form_anchor_gradient",
        rep["min_cosine"] >= min_cosine,
        f"min cosine {rep['min_cosine']:.6f} (threshold {min_cosine}), "
        f"mean magnitude ratio {rep['mean_magnitude_ratio']:.4f}",
    )


def run_all_checks(fast: bool = False) -> list[CheckResult]:
    """The full identity suite in acceptance order."""
    scale = 0.1 if fast else 1.0
    return [
        check_cut_identity(graphs=max(int(200 * scale), 10)),
        check_relaxation_bound(graphs=max(int(100 * scale), 10)),
        check_frobenius_identity(trials=max(int(100 * scale), 10)),
        check_training_gradients(instances=max(int(20 * scale), 3)),
        check_anchor_gradient(),
    ]
