"""Few-shot and linear evaluation of frozen encoders.

Episodes are N-way K-shot tasks with disjoint support/query rows; each
episode fits an L2-regularized multinomial logistic probe on the support
embeddings and scores the query rows. Embeddings come from a single
full-set forward pass so standardization statistics are stable, and the
encoder is never modified (checksummed before and after).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import encoder as enc_mod
from .data import Dataset
from .encoder import MlpEncoder


class EvalError(ValueError):
    """Invalid evaluation inputs."""


@dataclass(frozen=True)
class Episode:
    n_way: int
    k_shot: int
    q_query: int
    support_x: np.ndarray
    support_y: np.ndarray  # remapped to 0..n_way-1
    query_x: np.ndarray
    query_y: np.ndarray


@dataclass(frozen=True)
class ProbeModel:
    weight: np.ndarray  # n_way x K
    bias: np.ndarray  # n_way
    reg_strength: float

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.logits(x).argmax(axis=1)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(x))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def embed(enc: MlpEncoder, features: np.ndarray, probe_point: str = "backbone"
          ) -> np.ndarray:
    """Frozen-encoder features for probing, one full-set forward pass.

    probe_point "backbone" stops before the last two blocks (the projector);
    "embedding" uses the full encoder output.
    """
    features = np.asarray(features, dtype=float)
    if probe_point == "embedding":
        return enc_mod.forward(enc, features)
    if probe_point == "backbone":
        cut = max(len(enc.layers) - 2, 1)
        out, _ = enc_mod._forward_layers(enc.layers[:cut], features, with_cache=False)
        return out
    raise EvalError(f"unknown probe point {probe_point!r}")


def sample_episode(ds: Dataset, n_way: int, k_shot: int, q_query: int,
                   rng: np.random.Generator) -> Episode:
    """N classes without replacement, then k_shot + q_query disjoint rows
    per class; labels remapped to 0..n_way-1."""
    if ds.labels is None:
        raise EvalError("episode sampling requires a labeled dataset")
    if ds.class_count < n_way:
        raise EvalError(f"need >= {n_way} classes, dataset has {ds.class_count}")
    classes = rng.choice(ds.class_count, size=n_way, replace=False)
    sx, sy, qx, qy = [], [], [], []
    for new_label, cls in enumerate(classes):
        rows = np.flatnonzero(ds.labels == cls)
        need = k_shot + q_query
        if rows.size < need:
            raise EvalError(
                f"class {int(cls)} has {rows.size} samples, needs {need}"
            )
        picked = rng.choice(rows, size=need, replace=False)
        sx.append(ds.features[picked[:k_shot]])
        sy.extend([new_label] * k_shot)
        qx.append(ds.features[picked[k_shot:]])
        qy.extend([new_label] * q_query)
    return Episode(
        n_way=n_way, k_shot=k_shot, q_query=q_query,
        support_x=np.vstack(sx), support_y=np.array(sy),
        query_x=np.vstack(qx), query_y=np.array(qy),
    )


def _probe_objective(w, b, x, y_onehot, reg):
    logits = x @ w.T + b
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    ce = (log_norm - (z * y_onehot).sum(axis=1)).mean()
    return ce + 0.5 * reg * (w**2).sum()


def fit_probe(features: np.ndarray, labels: np.ndarray,
              reg_strength: float = 1.0, max_iter: int = 1000,
              grad_tol: float = 1e-5) -> ProbeModel:
    """L2-regularized multinomial logistic regression by full-batch gradient
    descent with Armijo backtracking. The objective is convex, so descent to
    the gradient tolerance reaches the unique optimum."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if reg_strength <= 0:
        raise EvalError("reg_strength must be > 0")
    if not np.isfinite(x).all():
        raise EvalError("non-finite features")
    classes = int(y.max()) + 1
    if classes < 2:
        raise EvalError("need at least 2 classes")
    n, k = x.shape
    y_onehot = np.eye(classes)[y]
    w = np.zeros((classes, k))
    b = np.zeros(classes)
    step = 1.0
    obj = _probe_objective(w, b, x, y_onehot, reg_strength)
    for _ in range(max_iter):
        p = _softmax(x @ w.T + b)
        diff = (p - y_onehot) / n
        gw = diff.T @ x + reg_strength * w
        gb = diff.sum(axis=0)
        gmax = max(np.abs(gw).max(), np.abs(gb).max())
        if gmax < grad_tol:
            break
        gnorm2 = (gw**2).sum() + (gb**2).sum()
        step = min(step * 2.0, 1e4)  # allow growth after conservative steps
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            obj_new = _probe_objective(w_new, b_new, x, y_onehot, reg_strength)
            if obj_new <= obj - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-16:
                w_new, b_new, obj_new = w, b, obj
                break
        w, b, obj = w_new, b_new, obj_new
    return ProbeModel(weight=w, bias=b, reg_strength=reg_strength)


def _encoder_digest(enc: MlpEncoder) -> str:
    h = hashlib.sha256()
    for p in enc.parameters():
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()


def evaluate_fewshot(enc: MlpEncoder, ds: Dataset, n_way: int, k_shot: int,
                     q_query: int, episodes: int, seed: int = 0,
                     reg_strength: float = 1.0, probe_point: str = "backbone",
                     precomputed: np.ndarray | None = None
                     ) -> tuple[float, float]:
    """Mean episode accuracy and 95% CI half-width (1.96 * std / sqrt(E)).

    ``precomputed`` bypasses the encoder with fixed features of the same
    row count (used for chance calibration and feature-quality baselines).
    """
    if episodes < 2:
        raise EvalError("need at least 2 episodes for a confidence interval")
    if ds.labels is None:
        raise EvalError("few-shot evaluation requires labels")
    digest_before = _encoder_digest(enc)
    if precomputed is not None:
        feats = np.asarray(precomputed, dtype=float)
        if feats.shape[0] != ds.n:
            raise EvalError("precomputed features row count mismatch")
    else:
        feats = embed(enc, ds.features, probe_point)
    embedded = Dataset(feats, ds.labels, ds.class_count)
    accs = []
    for e in range(episodes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, e]))
        ep = sample_episode(embedded, n_way, k_shot, q_query, rng)
        probe = fit_probe(ep.support_x, ep.support_y, reg_strength)
        accs.append(float((probe.predict(ep.query_x) == ep.query_y).mean()))
    accs = np.array(accs)
    if _encoder_digest(enc) != digest_before:
        raise RuntimeError("encoder parameters changed during evaluation")
    ci = 1.96 * accs.std(ddof=0) / np.sqrt(episodes)
    return float(accs.mean()), float(ci)


def linear_evaluation(enc: MlpEncoder, train_ds: Dataset, test_ds: Dataset,
                      epochs: int = 100, lr0: float = 0.3,
                      decay_epochs: tuple[int, ...] = (60, 80),
                      batch_size: int = 64, seed: int = 0,
                      probe_point: str = "backbone") -> float:
    """Train a multinomial linear classifier on frozen embeddings with SGD
    (step decay x0.1 at the given epochs) and report test accuracy."""
    if train_ds.labels is None or test_ds.labels is None:
        raise EvalError("linear evaluation requires labeled datasets")
    if train_ds.class_count != test_ds.class_count:
        raise EvalError("train/test class sets differ")
    x_train = embed(enc, train_ds.features, probe_point)
    x_test = embed(enc, test_ds.features, probe_point)
    classes = train_ds.class_count
    n, k = x_train.shape
    y_onehot = np.eye(classes)[train_ds.labels]
    w = np.zeros((classes, k))
    b = np.zeros(classes)
    rng = np.random.default_rng(seed)
    bsz = min(batch_size, n)
    lr = lr0
    for epoch in range(epochs):
        if epoch in decay_epochs:
            lr *= 0.1
        order = rng.permutation(n)
        for start in range(0, n - bsz + 1, bsz):
            ids = order[start:start + bsz]
            xb, yb = x_train[ids], y_onehot[ids]
            p = _softmax(xb @ w.T + b)
            diff = (p - yb) / xb.shape[0]
            w -= lr * (diff.T @ xb)
            b -= lr * diff.sum(axis=0)
    pred = (x_test @ w.T + b).argmax(axis=1)
    return float((pred == test_ds.labels).mean())
