"""Spatial attention stack over per-agent feature grids, forward pass only.

The model alternates two encoders: one runs self-attention over each agent's
own G x G grid of feature vectors (no cross-agent term), the other runs
self-attention over the N agent vectors at each grid cell (no cross-grid
term). Two such blocks feed a spatial-softmax region head and a sigmoid
point head. Weights are randomly initialized from a seed; there is no
training here, the stack exists to make the structural properties testable:
agent-permutation equivariance, per-encoder locality, and independence from
the team size.

Encoder sublayers use pre-residual layer normalization:
x + Attn(LN(x)), then x + FFN(LN(x)), with an exact erf-based GELU.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import erf

GRID = 8
DIM = 32
N_HEADS = 4
HEAD_DIM = 32
ATTN_INNER = N_HEADS * HEAD_DIM     # 128
FFN_HIDDEN = 128
N_BLOCKS = 2


class ShapeMismatch(Exception):
    pass


class IndexOutOfRange(Exception):
    pass


# ------------------------------------------------------------------ weights

@dataclass(frozen=True)
class EncoderWeights:
    """One attention encoder layer. Field order is the serialization order."""

    ln1_gamma: np.ndarray   # (D,)
    ln1_beta: np.ndarray    # (D,)
    wq: np.ndarray          # (D, ATTN_INNER)
    bq: np.ndarray          # (ATTN_INNER,)
    wk: np.ndarray          # (D, ATTN_INNER)
    bk: np.ndarray          # (ATTN_INNER,)
    wv: np.ndarray          # (D, ATTN_INNER)
    bv: np.ndarray          # (ATTN_INNER,)
    wo: np.ndarray          # (ATTN_INNER, D)
    bo: np.ndarray          # (D,)
    ln2_gamma: np.ndarray   # (D,)
    ln2_beta: np.ndarray    # (D,)
    w1: np.ndarray          # (D, FFN_HIDDEN)
    b1: np.ndarray          # (FFN_HIDDEN,)
    w2: np.ndarray          # (FFN_HIDDEN, D)
    b2: np.ndarray          # (D,)

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass(frozen=True)
class ModelWeights:
    """Full stack: per block one grid encoder and one team encoder, plus heads.

    Serialized flat as float64 in this order: for each block, the grid
    encoder then the team encoder (each as the EncoderWeights field order,
    matrices row-major), then region_w, region_b, point_w, point_b.
    """

    blocks: tuple          # ((ise, tre), ...) of EncoderWeights pairs
    region_w: np.ndarray   # (D, 1)
    region_b: np.ndarray   # (1,)
    point_w: np.ndarray    # (D, 2)
    point_b: np.ndarray    # (2,)

    @property
    def dim(self) -> int:
        return self.region_w.shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for ise, tre in self.blocks:
            out.extend(ise.arrays())
            out.extend(tre.arrays())
        out.extend([self.region_w, self.region_b, self.point_w, self.point_b])
        return out

    def save(self, path) -> None:
        np.concatenate([a.reshape(-1) for a in self.arrays()]).astype(
            np.float64).tofile(path)

    @classmethod
    def load(cls, path, dim: int = DIM, n_blocks: int = N_BLOCKS) -> "ModelWeights":
        flat = np.fromfile(path, dtype=np.float64)
        template = init_weights(0, dim=dim, n_blocks=n_blocks)
        need = sum(a.size for a in template.arrays())
        if flat.size != need:
            raise ShapeMismatch(f"weight file holds {flat.size} floats, need {need}")
        pos = 0

        def take(like: np.ndarray) -> np.ndarray:
            nonlocal pos
            out = flat[pos:pos + like.size].reshape(like.shape).copy()
            pos += like.size
            return out

        def enc(like: EncoderWeights) -> EncoderWeights:
            return EncoderWeights(*[take(a) for a in like.arrays()])

        blocks = tuple((enc(ise), enc(tre)) for ise, tre in template.blocks)
        return cls(blocks=blocks,
                   region_w=take(template.region_w),
                   region_b=take(template.region_b),
                   point_w=take(template.point_w),
                   point_b=take(template.point_b))


def _init_encoder(rng: np.random.Generator, dim: int, std: float) -> EncoderWeights:
    def mat(*shape):
        return rng.normal(0.0, std, size=shape)

    return EncoderWeights(
        ln1_gamma=np.ones(dim), ln1_beta=np.zeros(dim),
        wq=mat(dim, ATTN_INNER), bq=np.zeros(ATTN_INNER),
        wk=mat(dim, ATTN_INNER), bk=np.zeros(ATTN_INNER),
        wv=mat(dim, ATTN_INNER), bv=np.zeros(ATTN_INNER),
        wo=mat(ATTN_INNER, dim), bo=np.zeros(dim),
        ln2_gamma=np.ones(dim), ln2_beta=np.zeros(dim),
        w1=mat(dim, FFN_HIDDEN), b1=np.zeros(FFN_HIDDEN),
        w2=mat(FFN_HIDDEN, dim), b2=np.zeros(dim),
    )


def init_weights(seed: int, dim: int = DIM, n_blocks: int = N_BLOCKS,
                 std: float = 0.02) -> ModelWeights:
    rng = np.random.default_rng(seed)
    blocks = tuple((_init_encoder(rng, dim, std), _init_encoder(rng, dim, std))
                   for _ in range(n_blocks))
    return ModelWeights(
        blocks=blocks,
        region_w=rng.normal(0.0, std, size=(dim, 1)), region_b=np.zeros(1),
        point_w=rng.normal(0.0, std, size=(dim, 2)), point_b=np.zeros(2),
    )


# ------------------------------------------------------------------ forward

def _check_tensor(x: np.ndarray, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != x.shape[2]:
        raise ShapeMismatch(f"want (N, G, G, D), got {x.shape}")
    if dim is not None and x.shape[3] != dim:
        raise ShapeMismatch(f"feature dim {x.shape[3]} != weights dim {dim}")
    if not np.isfinite(x).all():
        raise ShapeMismatch("non-finite feature values")
    return x


def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + 1e-5) * gamma + beta


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _encoder(tokens: np.ndarray, w: EncoderWeights) -> np.ndarray:
    """Pre-LN encoder layer over (..., T, D) token sequences."""
    h = _layer_norm(tokens, w.ln1_gamma, w.ln1_beta)
    q = h @ w.wq + w.bq
    k = h @ w.wk + w.bk
    v = h @ w.wv + w.bv
    *lead, t, _ = q.shape
    hd = HEAD_DIM
    # (..., T, inner) -> (..., heads, T, head_dim)
    q = q.reshape(*lead, t, N_HEADS, hd).swapaxes(-3, -2)
    k = k.reshape(*lead, t, N_HEADS, hd).swapaxes(-3, -2)
    v = v.reshape(*lead, t, N_HEADS, hd).swapaxes(-3, -2)
    logits = q @ k.swapaxes(-1, -2) / np.sqrt(hd)
    logits -= logits.max(axis=-1, keepdims=True)
    attn = np.exp(logits)
    attn /= attn.sum(axis=-1, keepdims=True)
    mixed = (attn @ v).swapaxes(-3, -2).reshape(*lead, t, N_HEADS * hd)
    tokens = tokens + (mixed @ w.wo + w.bo)

    h = _layer_norm(tokens, w.ln2_gamma, w.ln2_beta)
    return tokens + (_gelu(h @ w.w1) @ w.w2 + w.b2)


def ise_forward(x: np.ndarray, w: EncoderWeights) -> np.ndarray:
    """Self-attention over each agent's own G*G grid vectors, agents apart."""
    x = _check_tensor(x, w.ln1_gamma.shape[0])
    n, g, _, d = x.shape
    out = _encoder(x.reshape(n, g * g, d), w)
    return out.reshape(n, g, g, d)


def tre_forward(x: np.ndarray, w: EncoderWeights) -> np.ndarray:
    """Self-attention over the N agent vectors at each grid cell, cells apart."""
    x = _check_tensor(x, w.ln1_gamma.shape[0])
    n, g, _, d = x.shape
    tokens = x.reshape(n, g * g, d).swapaxes(0, 1)      # (G*G, N, D)
    out = _encoder(tokens, w)
    return out.swapaxes(0, 1).reshape(n, g, g, d)


def stf_block(x: np.ndarray, w_pair) -> np.ndarray:
    ise_w, tre_w = w_pair
    return tre_forward(ise_forward(x, ise_w), tre_w)


def stf_forward(x: np.ndarray, model: ModelWeights) -> np.ndarray:
    x = _check_tensor(x, model.dim)
    for pair in model.blocks:
        x = stf_block(x, pair)
    return x


def action_heads(x: np.ndarray, k: int, model: ModelWeights):
    """Region probabilities over agent k's G*G cells plus a sigmoid point pair.

    The region head maps each of agent k's grid vectors to one logit and
    softmaxes over all G*G of them; the point head mean-pools the grid and
    maps the pooled vector to two components squashed into (0, 1).
    """
    x = _check_tensor(x, model.dim)
    n, g = x.shape[0], x.shape[1]
    if not 0 <= k < n:
        raise IndexOutOfRange(f"agent {k} not in 0..{n - 1}")
    grid = x[k]                                          # (G, G, D)
    logits = (grid @ model.region_w)[..., 0] + model.region_b[0]
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    pooled = grid.reshape(g * g, -1).mean(axis=0)
    point = 1.0 / (1.0 + np.exp(-(pooled @ model.point_w + model.point_b)))
    return probs, point


def flop_estimate(n_agents: int, grid: int = GRID) -> tuple[int, int]:
    """Attention-pair counts per block for the two architectures.

    Hierarchical: each agent's grid encoder scores G^2 x G^2 token pairs
    (N G^4 total) and each grid cell's team encoder scores N x N pairs
    (N^2 G^2 total). Unified baseline: one transformer over all N G^2 tokens,
    (N G^2)^2 pairs, evaluated once per deciding agent, so N (N G^2)^2.
    Counts are pair counts, not multiply-accumulates; constant factors
    (head count, feature width) are identical across the two and omitted.
    """
    if n_agents < 1 or grid < 1:
        raise ValueError("positive sizes required")
    n, g2 = int(n_agents), int(grid) ** 2
    hierarchical = n * n * g2 + n * g2 * g2
    unified = n * (n * g2) ** 2
    return hierarchical, unified


# ------------------------------------------------- fixed conv feature stem

CONV_CHANNELS = (32, 64, 128, 64, 32)


def _conv2d(x: np.ndarray, kern: np.ndarray, stride: int = 1) -> np.ndarray:
    """3x3 same-padding convolution via im2col. x: (C, H, W), kern: (O, C, 3, 3)."""
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    oh = (h + 2 - 3) // stride + 1
    ow = (w + 2 - 3) // stride + 1
    s0, s1, s2 = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp, shape=(c, oh, ow, 3, 3),
        strides=(s0, s1 * stride, s2 * stride, s1, s2), writeable=False)
    cols = cols.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * 9)
    out = cols @ kern.reshape(kern.shape[0], -1).T
    return out.T.reshape(kern.shape[0], oh, ow)


def conv_features(channels: np.ndarray, seed: int = 0) -> np.ndarray:
    """Reduce one agent's (C, 240, 240) map stack to a (G, G, D) feature grid.

    Five seeded random 3x3 convolutions; the first four are followed by ReLU
    and 2x2 max pooling, the last runs at stride 2 with ReLU:
    240 -> 120 -> 60 -> 30 -> 15 -> 8. Fixed weights stand in for the trained
    extractor; only the output geometry matters to the attention stack.
    """
    x = np.asarray(channels, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ShapeMismatch(f"want (C, H, H), got {x.shape}")
    rng = np.random.default_rng(seed)
    cin = x.shape[0]
    for i, cout in enumerate(CONV_CHANNELS):
        kern = rng.normal(0.0, np.sqrt(2.0 / (cin * 9)), size=(cout, cin, 3, 3))
        last = i == len(CONV_CHANNELS) - 1
        x = _conv2d(x, kern, stride=2 if last else 1)
        x = np.maximum(x, 0.0)
        if not last:
            c, h, w = x.shape
            x = x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))
        cin = cout
    return x.transpose(1, 2, 0)                          # (G, G, D)


def team_features(stacks, seed: int = 0) -> np.ndarray:
    """Stack per-agent conv features into the (N, G, G, D) model input."""
    return np.stack([conv_features(s, seed) for s in stacks])
