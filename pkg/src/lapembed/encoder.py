"""MLP feature extractor with batch standardization, exact reverse-mode
gradients, and a split point for hidden-state interpolation.

Each block is affine -> optional batch standardization -> optional rectifier.
Standardization uses per-batch statistics with biased variance and
eps = 1e-5; there is no running-average inference mode, so batches of size 1
are rejected whenever a standardization layer is active. The default network
ends with a standardization-only block, which pins every output dimension to
mean 0 / variance 1 over the batch.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

BN_EPS = 1e-5
CHECKPOINT_MAGIC = b"DLEM"
CHECKPOINT_VERSION = 1


class EncoderError(ValueError):
    """Invalid encoder construction or use."""


class CheckpointError(RuntimeError):
    """Corrupt or incompatible checkpoint file."""


@dataclass
class Layer:
    weight: np.ndarray  # in_dim x out_dim
    bias: np.ndarray  # out_dim
    standardize: bool
    relu: bool

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class MlpEncoder:
    layers: list[Layer]
    eligible_splits: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        if not self.layers:
            raise EncoderError("encoder needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise EncoderError("adjacent layer dimensions do not match")
        if self.eligible_splits is None:
            # Input and early hidden boundaries; never after the last block.
            self.eligible_splits = tuple(
                i for i in (0, 1, 2) if i < len(self.layers)
            )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out

    def has_standardization(self) -> bool:
        return any(l.standardize for l in self.layers)


def init_encoder(layer_dims, seed: int = 0, final_standardize: bool = True) -> MlpEncoder:
    """Glorot-uniform weights, zero biases; hidden blocks get
    standardization + rectifier, the output block standardization only.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise EncoderError("need at least [d_in, d_out]")
    if any(d <= 0 for d in dims):
        raise EncoderError("layer dims must be positive")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (din, dout) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        bound = np.sqrt(6.0 / (din + dout))
        w = rng.uniform(-bound, bound, size=(din, dout))
        b = np.zeros(dout)
        if last:
            layers.append(Layer(w, b, standardize=final_standardize, relu=False))
        else:
            layers.append(Layer(w, b, standardize=True, relu=True))
    return MlpEncoder(layers)


def _forward_layers(layers, x, with_cache):
    h = np.asarray(x, dtype=float)
    if h.ndim != 2:
        raise EncoderError(f"batch must be 2-D, got shape {h.shape}")
    caches = [] if with_cache else None
    for layer in layers:
        if h.shape[1] != layer.in_dim:
            raise EncoderError(
                f"batch width {h.shape[1]} does not match layer input {layer.in_dim}"
            )
        x_in = h
        a = h @ layer.weight + layer.bias
        if layer.standardize:
            if a.shape[0] < 2:
                raise EncoderError("batch size must be >= 2 with standardization active")
            mu = a.mean(axis=0)
            var = a.var(axis=0)  # biased
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (a - mu) * inv_std
            y = xhat
        else:
            xhat = None
            inv_std = None
            y = a
        h = np.maximum(y, 0.0) if layer.relu else y
        if with_cache:
            caches.append((x_in, xhat, inv_std, y))
    return h, caches


def _backward_layers(layers, caches, dout):
    """Gradients of sum(loss) given d loss / d output. Returns per-layer
    (dW, db) and the gradient at the block input."""
    grads = [None] * len(layers)
    dh = np.asarray(dout, dtype=float)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        x_in, xhat, inv_std, y = caches[i]
        if layer.relu:
            dh = dh * (y > 0)
        if layer.standardize:
            b = xhat.shape[0]
            # d/da of (a - mean)/sqrt(var + eps), biased variance
            dh = inv_std * (
                dh - dh.mean(axis=0) - xhat * (dh * xhat).mean(axis=0)
            )
        dw = x_in.T @ dh
        db = dh.sum(axis=0)
        grads[i] = (dw, db)
        dh = dh @ layer.weight.T
    return grads, dh


def forward(enc: MlpEncoder, batch: np.ndarray) -> np.ndarray:
    """Full forward pass; per-batch standardization statistics."""
    out, _ = _forward_layers(enc.layers, batch, with_cache=False)
    return out


def forward_raw(enc: MlpEncoder, batch: np.ndarray) -> np.ndarray:
    """Forward pass that stops before the final block's standardization.

    Used for collapse diagnostics: the final standardization forces unit
    per-dimension variance, which would mask variance collapse.
    """
    last = enc.layers[-1]
    stripped = enc.layers[:-1] + [Layer(last.weight, last.bias, False, last.relu)]
    out, _ = _forward_layers(stripped, batch, with_cache=False)
    return out


def forward_split(enc: MlpEncoder, batch: np.ndarray, split: int) -> np.ndarray:
    """Output of the first ``split`` blocks (split 0 returns the input)."""
    if split not in enc.eligible_splits:
        raise EncoderError(f"split {split} not in eligible set {enc.eligible_splits}")
    out, _ = _forward_layers(enc.layers[:split], batch, with_cache=False)
    return out


def forward_from(enc: MlpEncoder, hidden: np.ndarray, split: int) -> np.ndarray:
    """Run the blocks after ``split`` on a (possibly mixed) hidden state."""
    if split not in enc.eligible_splits:
        raise EncoderError(f"split {split} not in eligible set {enc.eligible_splits}")
    hidden = np.asarray(hidden, dtype=float)
    expect = enc.in_dim if split == 0 else enc.layers[split - 1].out_dim
    if hidden.ndim != 2 or hidden.shape[1] != expect:
        raise EncoderError(f"hidden width must be {expect}")
    out, _ = _forward_layers(enc.layers[split:], hidden, with_cache=False)
    return out


class ForwardCache:
    """Workspace tying a backward pass to its matching forward pass."""

    def __init__(self, layers, caches, out, start):
        self._layers = layers
        self._caches = caches
        self.out = out
        self.start = start
        self._used = False


def forward_with_cache(enc: MlpEncoder, batch: np.ndarray,
                       start: int = 0, stop: int | None = None) -> ForwardCache:
    """Forward through blocks [start, stop) retaining backward workspace."""
    layers = enc.layers[start:stop]
    out, caches = _forward_layers(layers, batch, with_cache=True)
    return ForwardCache(layers, caches, out, start)


def backward(enc: MlpEncoder, cache: ForwardCache, upstream: np.ndarray):
    """Exact reverse-mode gradients through a cached forward pass.

    Returns (grads, dx) where grads is a full-length per-layer list of
    (dW, db) pairs, zero-filled outside the cached block range, and dx is
    the gradient at the cached blocks' input.
    """
    if cache._used:
        raise EncoderError("backward called twice on the same forward cache")
    cache._used = True
    if np.asarray(upstream).shape != cache.out.shape:
        raise EncoderError("upstream gradient shape does not match forward output")
    seg_grads, dx = _backward_layers(cache._layers, cache._caches, upstream)
    grads = zero_grads(enc)
    for i, g in enumerate(seg_grads):
        grads[cache.start + i] = g
    return grads, dx


def accumulate_grads(total, extra):
    for (tw, tb), (ew, eb) in zip(total, extra):
        tw += ew
        tb += eb
    return total


def zero_grads(enc: MlpEncoder):
    return [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in enc.layers]


def save_encoder(enc: MlpEncoder, path) -> None:
    """Little-endian binary checkpoint with trailing CRC32.

    Layout: magic "DLEM", version u32, layer count u32, then per layer
    in-dim u32, out-dim u32, flags u32 (bit0 standardize, bit1 rectifier),
    weights row-major f32, biases f32; finally CRC32 over everything after
    the magic. Parameters are stored in f32.
    """
    payload = bytearray()
    payload += struct.pack("<II", CHECKPOINT_VERSION, len(enc.layers))
    for layer in enc.layers:
        flags = (1 if layer.standardize else 0) | (2 if layer.relu else 0)
        payload += struct.pack("<III", layer.in_dim, layer.out_dim, flags)
        payload += layer.weight.astype("<f4").tobytes(order="C")
        payload += layer.bias.astype("<f4").tobytes()
    crc = zlib.crc32(bytes(payload)) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load_encoder(path) -> MlpEncoder:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic bytes")
    payload, (crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CheckpointError("CRC mismatch: checkpoint is corrupt")
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(payload):
            raise CheckpointError("truncated checkpoint")
        vals = struct.unpack_from(fmt, payload, off)
        off += size
        return vals

    version, count = take("<II")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    layers = []
    for _ in range(count):
        din, dout, flags = take("<III")
        nw = din * dout
        w = np.frombuffer(payload, dtype="<f4", count=nw, offset=off)
        off += 4 * nw
        b = np.frombuffer(payload, dtype="<f4", count=dout, offset=off)
        off += 4 * dout
        layers.append(
            Layer(
                w.astype(float).reshape(din, dout),
                b.astype(float),
                standardize=bool(flags & 1),
                relu=bool(flags & 2),
            )
        )
    if off != len(payload):
        raise CheckpointError("trailing bytes in checkpoint payload")
    return MlpEncoder(layers)
