"""Cross-plane feature fusion with stacked multi-head attention.

Horizontal and vertical RoI features (C x H x W each) are flattened per
width position into vectors of length C*H, concatenated into one sequence
of W_hor + W_ver tokens, and run through a stack of attention layers.  The
head-averaged attention of the last layer is an (N x N) correlation matrix;
its lower-left block -- vertical positions attending to horizontal ones --
is the fused map that seeds the silhouette.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interp import bilinear_resize

FEATURE_ORIGINS = ("horizontal", "vertical")


@dataclass
class FeatureBlock:
    """RoI feature grid of shape (C, H, W) tagged with its source plane."""

    values: np.ndarray
    origin: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError("feature values must be (C, H, W) with positive dims")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")
        if self.origin not in FEATURE_ORIGINS:
            raise ValueError(f"origin must be one of {FEATURE_ORIGINS}")

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass
class LayerWeights:
    """Query/key/value/output projections of one attention layer."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray

    def __post_init__(self):
        for name in ("wq", "wk", "wv", "wo"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            setattr(self, name, m)
        d = self.wq.shape[0]
        for name in ("bq", "bk", "bv", "bo"):
            b = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if b.shape != (d,):
                raise ValueError(f"{name} must have length {d}")
            setattr(self, name, b)
        if not all(getattr(self, n).shape == (d, d) for n in ("wk", "wv", "wo")):
            raise ValueError("all projection matrices must share one dimension")


@dataclass
class AttentionWeights:
    """Full fusion stack: L layers of h-headed attention over dimension D."""

    layers: list
    num_heads: int = 4
    model_dim: int = 0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("need at least one layer")
        d = self.layers[0].wq.shape[0]
        if self.model_dim == 0:
            self.model_dim = d
        if self.model_dim != d or any(l.wq.shape[0] != d for l in self.layers):
            raise ValueError("layer dimensions disagree with model_dim")
        if self.num_heads < 1 or d % self.num_heads != 0:
            raise ValueError(f"model dimension {d} must divide into {self.num_heads} heads")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @classmethod
    def random(cls, model_dim, num_heads=4, num_layers=4, seed=0, scale=None):
        """Seeded Gaussian projections (std 1/sqrt(D) by default), zero biases."""
        if scale is None:
            scale = 1.0 / np.sqrt(model_dim)
        rng = np.random.default_rng(seed)
        layers = []
        for _ in range(num_layers):
            mats = [rng.normal(0.0, scale, (model_dim, model_dim)) for _ in range(4)]
            zeros = np.zeros(model_dim)
            layers.append(LayerWeights(mats[0], zeros.copy(), mats[1], zeros.copy(),
                                       mats[2], zeros.copy(), mats[3], zeros.copy()))
        return cls(layers, num_heads, model_dim)


def reshape_concat(hor, ver):
    """Flatten both feature blocks per width position and concatenate.

    Column j of a (C, H, W) block becomes one vector of length C*H (channel
    varying slowest); horizontal columns come first, vertical after.
    Returns an (W_hor + W_ver, C*H) sequence.
    """
    if hor.origin != "horizontal" or ver.origin != "vertical":
        raise ValueError("expected a horizontal block then a vertical block")
    ch, hh = hor.values.shape[:2]
    cv, hv = ver.values.shape[:2]
    if (ch, hh) != (cv, hv):
        raise ValueError(f"channel/height mismatch: {(ch, hh)} vs {(cv, hv)}")
    hor_vecs = np.transpose(hor.values, (2, 0, 1)).reshape(hor.width, ch * hh)
    ver_vecs = np.transpose(ver.values, (2, 0, 1)).reshape(ver.width, ch * hh)
    return np.concatenate([hor_vecs, ver_vecs], axis=0)


def _split_heads(x, num_heads):
    n, d = x.shape
    return x.reshape(n, num_heads, d // num_heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def _softmax_rows(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def multi_head_attention(seq, layer, num_heads):
    """One attention layer: per-head scaled dot-product, concat, project, residual.

    Returns (output sequence (N, D), attention (num_heads, N, N)); every
    attention row is a probability distribution over the keys.
    """
    x = np.asarray(seq, dtype=float)
    if x.ndim != 2:
        raise ValueError("sequence must be (N, D)")
    n, d = x.shape
    if d != layer.wq.shape[0]:
        raise ValueError(f"sequence dim {d} does not match weights dim {layer.wq.shape[0]}")
    if d % num_heads != 0:
        raise ValueError(f"dim {d} not divisible by {num_heads} heads")
    q = _split_heads(x @ layer.wq + layer.bq, num_heads)
    k = _split_heads(x @ layer.wk + layer.bk, num_heads)
    v = _split_heads(x @ layer.wv + layer.bv, num_heads)
    scale = 1.0 / np.sqrt(d // num_heads)
    attn = _softmax_rows(q @ k.transpose(0, 2, 1) * scale)
    ctx = attn @ v
    out = x + _merge_heads(ctx) @ layer.wo + layer.bo
    return out, attn


def _forward_trace(hor, ver, weights):
    """Run the full stack, keeping per-layer intermediates for the backward pass."""
    x = reshape_concat(hor, ver)
    trace = []
    attn = None
    for layer in weights.layers:
        q = _split_heads(x @ layer.wq + layer.bq, weights.num_heads)
        k = _split_heads(x @ layer.wk + layer.bk, weights.num_heads)
        v = _split_heads(x @ layer.wv + layer.bv, weights.num_heads)
        scale = 1.0 / np.sqrt(x.shape[1] // weights.num_heads)
        attn = _softmax_rows(q @ k.transpose(0, 2, 1) * scale)
        ctx = attn @ v
        y = x + _merge_heads(ctx) @ layer.wo + layer.bo
        trace.append({"x": x, "q": q, "k": k, "v": v, "attn": attn,
                      "scale": scale})
        x = y
    return x, attn, trace


def fuse(hor, ver, weights):
    """Cross-plane correlation block of shape (W_ver, W_hor).

    Runs reshape_concat and the attention stack, head-averages the final
    layer's attention matrix, and crops the rows belonging to vertical
    positions against the columns belonging to horizontal ones.
    """
    if weights.model_dim != hor.values.shape[0] * hor.values.shape[1]:
        raise ValueError(f"weights dim {weights.model_dim} does not match feature "
                         f"dim {hor.values.shape[0] * hor.values.shape[1]}")
    _, attn, _ = _forward_trace(hor, ver, weights)
    w_hor = hor.width
    return attn.mean(axis=0)[w_hor:, :w_hor]


def fuse_input_grad(hor, ver, weights):
    """Fused block plus the gradient of its sum w.r.t. both feature blocks.

    Backpropagates the scalar sum(fused block) through the attention stack.
    Returns (block, d_hor, d_ver) with gradients shaped like the inputs.
    """
    if weights.model_dim != hor.values.shape[0] * hor.values.shape[1]:
        raise ValueError("weights dim does not match feature dim")
    _, attn_last, trace = _forward_trace(hor, ver, weights)
    h = weights.num_heads
    n = trace[0]["x"].shape[0]
    w_hor = hor.width

    readout = np.zeros((n, n))
    readout[w_hor:, :w_hor] = 1.0 / h  # d(sum of head-averaged crop)/d(attn per head)

    d_x = np.zeros_like(trace[-1]["x"])  # gradient w.r.t. the layer output
    for li in reversed(range(len(trace))):
        t = trace[li]
        layer = weights.layers[li]
        d_y = d_x
        d_x = d_y.copy()  # residual path
        d_ctx = _split_heads(d_y @ layer.wo.T, h)
        d_attn = d_ctx @ t["v"].transpose(0, 2, 1)
        if li == len(trace) - 1:
            d_attn = d_attn + readout[None, :, :]
        d_v = t["attn"].transpose(0, 2, 1) @ d_ctx
        # softmax backward, rows independent
        inner = (d_attn * t["attn"]).sum(axis=-1, keepdims=True)
        d_logits = t["attn"] * (d_attn - inner)
        d_q = d_logits @ t["k"] * t["scale"]
        d_k = d_logits.transpose(0, 2, 1) @ t["q"] * t["scale"]
        d_x = d_x + (_merge_heads(d_q) @ layer.wq.T
                     + _merge_heads(d_k) @ layer.wk.T
                     + _merge_heads(d_v) @ layer.wv.T)

    block = attn_last.mean(axis=0)[w_hor:, :w_hor]
    c, hh = hor.values.shape[:2]
    d_hor = d_x[:w_hor].reshape(hor.width, c, hh).transpose(1, 2, 0)
    d_ver = d_x[w_hor:].reshape(ver.width, c, hh).transpose(1, 2, 0)
    return block, d_hor, d_ver


def mask_probabilities(block, resolution):
    """Upsample a fused block to a square mask and normalize into [0, 1].

    Stands in for a learned mask decoder: bilinear upsampling to the mask
    resolution, then division by the block's peak so that a later 0.5
    threshold keeps the strongly-correlated region.
    """
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or min(block.shape) < 1:
        raise ValueError("fused block must be 2D")
    if resolution < 1:
        raise ValueError("mask resolution must be positive")
    up = bilinear_resize(block, (resolution, resolution))
    peak = up.max()
    if peak <= 0.0:
        return np.zeros((resolution, resolution))
    return np.clip(up / peak, 0.0, 1.0)
