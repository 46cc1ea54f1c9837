"""Single-layer Transformer encoder over the 192-step unified input.

Layout: linear embedding 10 -> d_model plus a learnable positional table,
one post-norm encoder layer (self-attention, then a GELU feed-forward), and
a shared linear head reading the last 120 positions.  There is no masking;
every position attends to all 192.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..autodiff import (
    ShapeError, Tensor, add, gelu, layer_norm, matmul, reshape, scale, softmax, transpose,
)
from ..data import FUTURE_STEPS, PAST_COLUMNS, TOTAL_STEPS, unify_arrays
from .base import (
    INIT_STREAM, Forecaster, ForecasterConfig, const_init, linear, rng_for, uniform_init,
)

POS_INIT_SCALE = 0.02


@dataclass
class TransformerParams:
    embed_w: Tensor     # [F, D]
    embed_b: Tensor
    pos: Tensor         # [192, D]
    wq: Tensor          # [D, D]; column block h belongs to head h
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    ffn_w1: Tensor      # [D, ffn]
    ffn_b1: Tensor
    ffn_w2: Tensor      # [ffn, D]
    ffn_b2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor
    head_w: Tensor      # [D, 1]
    head_b: Tensor
    heads: int = 8

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def init(cls, rng: np.random.Generator, n_features: int = len(PAST_COLUMNS),
             d_model: int = 64, heads: int = 8, ffn_dim: int = 256,
             seq_len: int = TOTAL_STEPS) -> "TransformerParams":
        if d_model % heads:
            raise ShapeError(f"d_model {d_model} not divisible by {heads} heads")
        D = d_model
        p = {
            "embed_w": uniform_init(rng, (n_features, D), n_features, "embed.w"),
            "embed_b": const_init((D,), 0.0, "embed.b"),
            "pos": Tensor(rng.standard_normal((seq_len, D)) * POS_INIT_SCALE,
                          requires_grad=True, name="pos"),
        }
        for k in ("q", "k", "v", "o"):
            p[f"w{k}"] = uniform_init(rng, (D, D), D, f"attn.w{k}")
            p[f"b{k}"] = const_init((D,), 0.0, f"attn.b{k}")
        p["ln1_g"], p["ln1_b"] = const_init((D,), 1.0, "ln1.g"), const_init((D,), 0.0, "ln1.b")
        p["ffn_w1"] = uniform_init(rng, (D, ffn_dim), D, "ffn.w1")
        p["ffn_b1"] = const_init((ffn_dim,), 0.0, "ffn.b1")
        p["ffn_w2"] = uniform_init(rng, (ffn_dim, D), ffn_dim, "ffn.w2")
        p["ffn_b2"] = const_init((D,), 0.0, "ffn.b2")
        p["ln2_g"], p["ln2_b"] = const_init((D,), 1.0, "ln2.g"), const_init((D,), 0.0, "ln2.b")
        p["head_w"] = uniform_init(rng, (D, 1), D, "head.w")
        p["head_b"] = const_init((1,), 0.0, "head.b")
        return cls(**p, heads=heads)

    def named(self) -> dict[str, Tensor]:
        out = {}
        for f in fields(self):
            if f.name == "heads":
                continue
            name = f.name
            if name[0] in "wb" and len(name) == 2:
                name = f"attn.{name}"
            else:
                name = name.replace("_", ".", 1)
            out[name] = getattr(self, f.name)
        return out


def multi_head_attention(params: TransformerParams, X, return_weights: bool = False,
                         query_start: int = 0):
    """Scaled dot-product self-attention split across ``params.heads`` heads.

    ``X`` is ``[T, D]`` or ``[B, T, D]``.  Scores are scaled by the square
    root of the per-head width.  With ``return_weights`` the softmax weights
    ``[B, heads, Tq, T]`` (or ``[heads, Tq, T]``) are returned as well.

    ``query_start`` restricts the output to rows ``query_start:``; keys and
    values still span the whole sequence, so those rows are unchanged.
    """
    X = X if isinstance(X, Tensor) else Tensor(X)
    D = params.d_model
    if X.ndim not in (2, 3) or X.shape[-1] != D:
        raise ShapeError(f"attention input must be [T, {D}] or [B, T, {D}], got {X.shape}")
    single = X.ndim == 2
    if single:
        X = reshape(X, (1,) + X.shape)
    B, T, _ = X.shape
    nh = params.heads
    dh = D // nh

    Tq = T - query_start

    def heads_of(x, n, w, b):
        # [B, n, D] -> [B, heads, n, dh]
        return transpose(reshape(linear(x, w, b), (B, n, nh, dh)), (0, 2, 1, 3))

    Xq = X[:, query_start:, :] if query_start else X
    # scaling Q instead of the Tq x T scores is the same product, much cheaper
    Q = scale(heads_of(Xq, Tq, params.wq, params.bq), 1.0 / np.sqrt(dh))
    K = heads_of(X, T, params.wk, params.bk)
    V = heads_of(X, T, params.wv, params.bv)
    scores = matmul(Q, transpose(K, (0, 1, 3, 2)))
    A = softmax(scores, axis=-1)
    ctx = reshape(transpose(matmul(A, V), (0, 2, 1, 3)), (B, Tq, D))
    out = linear(ctx, params.wo, params.bo)
    if single:
        out = reshape(out, (Tq, D))
    if return_weights:
        w = A.data[0] if single else A.data
        return out, w
    return out


def encoder_layer(params: TransformerParams, E: Tensor, keep_from: int = 0) -> Tensor:
    """Post-norm: LN(E + MHA(E)), then LN(x + FFN(x)).

    Every step after attention is position-wise, so rows before ``keep_from``
    can be dropped right after the keys and values are formed.
    """
    Eq = E[:, keep_from:, :] if keep_from else E
    attn = multi_head_attention(params, E, query_start=keep_from)
    x = layer_norm(add(Eq, attn), params.ln1_g, params.ln1_b)
    ff = linear(gelu(linear(x, params.ffn_w1, params.ffn_b1)), params.ffn_w2, params.ffn_b2)
    return layer_norm(add(x, ff), params.ln2_g, params.ln2_b)


def transformer_forward(params: TransformerParams, U, horizon: int = FUTURE_STEPS) -> Tensor:
    """Normalized ``[B, horizon]`` forecast from unified input ``[B, 192, F]``."""
    U = U if isinstance(U, Tensor) else Tensor(U)
    T = params.pos.shape[0]
    if U.ndim != 3 or U.shape[1] != T or U.shape[2] != params.embed_w.shape[0]:
        raise ShapeError(f"transformer input must be [B, {T}, {params.embed_w.shape[0]}], "
                         f"got {U.shape}")
    E = add(linear(U, params.embed_w, params.embed_b), params.pos)
    # only the forecast rows reach the head, so only they are computed past attention
    Z = encoder_layer(params, E, keep_from=T - horizon)
    out = linear(Z, params.head_w, params.head_b)
    return reshape(out, (U.shape[0], horizon))


class TransformerForecaster(Forecaster):
    eval_batch_size = 128

    def __init__(self, config: ForecasterConfig):
        super().__init__(config)
        rng = rng_for(config.seed, INIT_STREAM)
        self.net = TransformerParams.init(rng, len(PAST_COLUMNS), config.d_model, config.heads,
                                          config.ffn_dim)
        self.params = self.net.named()

    def forward(self, past, future) -> Tensor:
        U = unify_arrays(np.asarray(past), np.asarray(future), self.config.policy)
        return transformer_forward(self.net, U)

    def attention_weights(self, past, future) -> np.ndarray:
        U = unify_arrays(np.asarray(past), np.asarray(future), self.config.policy)
        E = add(linear(Tensor(U), self.net.embed_w, self.net.embed_b), self.net.pos)
        return multi_head_attention(self.net, E, return_weights=True)[1]
