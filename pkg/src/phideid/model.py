"""Encoder-only transformer token tagger in numpy, with a hand-written backward pass.

Covers independent-layer (BERT/RoBERTa style) and factorized-embedding,
shared-layer (ALBERT style) variants.  Blocks are post-LayerNorm:

    h = LN(x + Attn(x));  y = LN(h + FFN(h)),  FFN(h) = GELU(h W1 + b1) W2 + b2
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterator

import numpy as np
from scipy.special import erf

from .errors import ConfigError, EmptyTargetError, InputError, ShapeError
from .labels import IGNORE_INDEX, NUM_TAGS

LN_EPS = 1e-12
INIT_STD = 0.02

LAYER_PARAMS = (
    "q_w", "q_b", "k_w", "k_b", "v_w", "v_b", "o_w", "o_b",
    "attn_ln_g", "attn_ln_b", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2", "out_ln_g", "out_ln_b",
)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_positions: int = 512
    type_vocab: int = 2
    embedding_dim: int = 768
    hidden_dim: int = 768
    num_layers: int = 12
    num_heads: int = 12
    ffn_dim: int = 3072
    dropout: float = 0.1
    share_layers: bool = False
    factorized_embedding: bool = False
    num_labels: int = NUM_TAGS
    family: str = "bert"

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads

    @property
    def stored_layers(self) -> int:
        return 1 if self.share_layers else self.num_layers

    def validate(self) -> "ModelConfig":
        dims = ("vocab_size", "max_positions", "type_vocab", "embedding_dim", "hidden_dim",
                "num_layers", "num_heads", "ffn_dim", "num_labels")
        for name in dims:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.hidden_dim % self.num_heads:
            raise ConfigError(f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}")
        if not self.factorized_embedding and self.embedding_dim != self.hidden_dim:
            raise ConfigError("embedding_dim must equal hidden_dim unless factorized_embedding is set")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d).validate()


PRESETS: dict[str, ModelConfig] = {
    "bert-base": ModelConfig(30522, 512, 2, 768, 768, 12, 12, 3072, 0.1, family="bert"),
    "bert-large": ModelConfig(30522, 512, 2, 1024, 1024, 24, 16, 4096, 0.1, family="bert"),
    "roberta-base": ModelConfig(50265, 514, 1, 768, 768, 12, 12, 3072, 0.1, family="roberta"),
    "roberta-large": ModelConfig(50265, 514, 1, 1024, 1024, 24, 16, 4096, 0.1, family="roberta"),
    "albert-base": ModelConfig(30000, 512, 2, 128, 768, 12, 12, 3072, 0.0, True, True, family="albert"),
    "albert-xxlarge": ModelConfig(30000, 512, 2, 128, 4096, 12, 64, 16384, 0.0, True, True, family="albert"),
    # desk-scale configurations; vocab_size is replaced by the built vocabulary
    "tiny": ModelConfig(1000, 256, 2, 64, 64, 2, 4, 128, 0.0, family="bert"),
    "tiny-albert": ModelConfig(1000, 256, 2, 32, 64, 2, 4, 128, 0.0, True, True, family="albert"),
}


def preset(name: str, **overrides) -> ModelConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides).validate()


# ---------------------------------------------------------------- parameter ledger


@dataclass
class ParameterLedger:
    entries: list[tuple[str, int]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(n for _, n in self.entries)

    def __getitem__(self, name: str) -> int:
        for key, n in self.entries:
            if key == name:
                return n
        raise KeyError(name)

    def render(self) -> str:
        width = max(len(k) for k, _ in self.entries)
        lines = [f"{k:<{width}}  {n:>12,d}" for k, n in self.entries]
        lines.append(f"{'total':<{width}}  {self.total:>12,d}")
        return "\n".join(lines) + "\n"


def count_parameters(config: ModelConfig) -> ParameterLedger:
    """Exact per-module parameter counts, named after the Hugging Face modules."""
    c = config.validate()
    V, P, T, E, H, F, C = (c.vocab_size, c.max_positions, c.type_vocab, c.embedding_dim,
                           c.hidden_dim, c.ffn_dim, c.num_labels)
    fam = c.family
    led = ParameterLedger()
    add = led.entries.append
    add((f"{fam}.embeddings.word.embeddings.weight", V * E))
    add((f"{fam}.embeddings.position.embeddings.weight", P * E))
    add((f"{fam}.embeddings.token.type.embeddings.weight", T * E))
    add((f"{fam}.embeddings.LayerNorm.weight", E))
    add((f"{fam}.embeddings.LayerNorm.bias", E))
    if c.factorized_embedding:
        add((f"{fam}.encoder.embedding.hidden.mapping.in.weight", E * H))
        add((f"{fam}.encoder.embedding.hidden.mapping.in.bias", H))
    for i in range(c.stored_layers):
        if fam == "albert":
            pre = f"albert.encoder.albert.layer.groups.{i}.albert.layers.0."
            rows = [
                ("full.layer.layer.norm.weight", H), ("full.layer.layer.norm.bias", H),
                ("attention.query.weight", H * H), ("attention.query.bias", H),
                ("attention.key.weight", H * H), ("attention.key.bias", H),
                ("attention.value.weight", H * H), ("attention.value.bias", H),
                ("attention.dense.weight", H * H), ("attention.dense.bias", H),
                ("attention.LayerNorm.weight", H), ("attention.LayerNorm.bias", H),
                ("ffn.weight", H * F), ("ffn.bias", F),
                ("ffn.output.weight", F * H), ("ffn.output.bias", H),
            ]
        else:
            pre = f"{fam}.encoder.layer.{i}."
            rows = [
                ("attention.self.query.weight", H * H), ("attention.self.query.bias", H),
                ("attention.self.key.weight", H * H), ("attention.self.key.bias", H),
                ("attention.self.value.weight", H * H), ("attention.self.value.bias", H),
                ("attention.output.dense.weight", H * H), ("attention.output.dense.bias", H),
                ("attention.output.LayerNorm.weight", H), ("attention.output.LayerNorm.bias", H),
                ("intermediate.dense.weight", H * F), ("intermediate.dense.bias", F),
                ("output.dense.weight", F * H), ("output.dense.bias", H),
                ("output.LayerNorm.weight", H), ("output.LayerNorm.bias", H),
            ]
        for name, n in rows:
            add((pre + name, n))
    add(("classifier.weight", H * C))
    add(("classifier.bias", C))
    return led


# ---------------------------------------------------------------- primitives


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return cdf + x * pdf


def layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, mask: np.ndarray | None = None):
    """Scaled dot-product attention over the last two axes.

    ``mask`` is boolean, True at padded key positions, broadcastable to the
    score shape (``(..., n_q, n_k)``); masked scores are set to -inf before
    the softmax.  Returns ``(output, probabilities)``.
    """
    if q.ndim < 2 or q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2] or q.shape[:-2] != k.shape[:-2]:
        raise ShapeError(f"incompatible attention shapes q{q.shape} k{k.shape} v{v.shape}")
    scores = (q @ np.swapaxes(k, -1, -2)) / math.sqrt(q.shape[-1])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            full = np.broadcast_to(mask, scores.shape)
        except ValueError:
            raise ShapeError(f"mask shape {mask.shape} does not fit scores {scores.shape}") from None
        if full.all(axis=-1).any():
            raise ShapeError("a query row has every key position masked")
        scores = np.where(full, -np.inf, scores)
    probs = softmax(scores)
    return probs @ v, probs


# ---------------------------------------------------------------- model


def _truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    c = config
    E, H, F = c.embedding_dim, c.hidden_dim, c.ffn_dim
    shapes: dict[str, tuple[int, ...]] = {
        "word_emb": (c.vocab_size, E),
        "pos_emb": (c.max_positions, E),
        "type_emb": (c.type_vocab, E),
        "emb_ln_g": (E,),
        "emb_ln_b": (E,),
    }
    if c.factorized_embedding:
        shapes["proj_w"] = (E, H)
        shapes["proj_b"] = (H,)
    layer = {
        "q_w": (H, H), "q_b": (H,), "k_w": (H, H), "k_b": (H,), "v_w": (H, H), "v_b": (H,),
        "o_w": (H, H), "o_b": (H,), "attn_ln_g": (H,), "attn_ln_b": (H,),
        "ffn_w1": (H, F), "ffn_b1": (F,), "ffn_w2": (F, H), "ffn_b2": (H,),
        "out_ln_g": (H,), "out_ln_b": (H,),
    }
    for i in range(c.stored_layers):
        for name in LAYER_PARAMS:
            shapes[f"layers.{i}.{name}"] = layer[name]
    shapes["cls_w"] = (H, c.num_labels)
    shapes["cls_b"] = (c.num_labels,)
    return shapes


def is_decay_exempt(name: str) -> bool:
    """Biases and LayerNorm gains/offsets take no weight decay."""
    leaf = name.rsplit(".", 1)[-1]
    return leaf.endswith("_b") or leaf.endswith("_g") or leaf in ("proj_b", "cls_b")


@dataclass
class ForwardTrace:
    logits: np.ndarray
    attention_probs: list[np.ndarray]
    cache: dict = field(default_factory=dict, repr=False)


class TaggerModel:
    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config.validate()
        self.params = params

    @property
    def dtype(self):
        return self.params["word_emb"].dtype

    def astype(self, dtype) -> "TaggerModel":
        return TaggerModel(self.config, {k: v.astype(dtype) for k, v in self.params.items()})

    def copy(self) -> "TaggerModel":
        return TaggerModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def num_parameters(self) -> int:
        return sum(int(v.size) for v in self.params.values())

    def layer_params(self, depth: int) -> dict[str, np.ndarray]:
        """Parameters used at encoder depth ``depth`` (layer 0's set when shared)."""
        i = 0 if self.config.share_layers else depth
        return {name: self.params[f"layers.{i}.{name}"] for name in LAYER_PARAMS}

    def _layer_key(self, depth: int, name: str) -> str:
        return f"layers.{0 if self.config.share_layers else depth}.{name}"

    # -------------------------------------------------------------- forward

    def forward(self, input_ids, attention_mask=None, train: bool = False,
                rng: np.random.Generator | None = None) -> ForwardTrace:
        c = self.config
        p = self.params
        ids = np.atleast_2d(np.asarray(input_ids, dtype=np.int64))
        B, T = ids.shape
        if T > c.max_positions:
            raise InputError(f"sequence length {T} exceeds max_positions {c.max_positions}")
        if ids.size and (ids.min() < 0 or ids.max() >= c.vocab_size):
            raise InputError(f"input id out of range [0, {c.vocab_size})")
        mask = np.ones((B, T), dtype=bool) if attention_mask is None else np.atleast_2d(np.asarray(attention_mask)).astype(bool)
        pad = ~mask[:, None, None, :]  # (B,1,1,T)
        rate = c.dropout if train else 0.0
        if rate and rng is None:
            raise InputError("training-mode forward with dropout needs an rng")

        def dropout(x):
            if not rate:
                return x, None
            keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
            return x * keep, keep

        cache: dict = {"ids": ids, "B": B, "T": T}
        emb = p["word_emb"][ids] + p["pos_emb"][:T][None] + p["type_emb"][0]
        x, cache["emb_ln"] = layer_norm(emb, p["emb_ln_g"], p["emb_ln_b"])
        x, cache["emb_drop"] = dropout(x)
        if c.factorized_embedding:
            cache["proj_in"] = x
            x = x @ p["proj_w"] + p["proj_b"]

        A, d = c.num_heads, c.head_dim
        probs_all = []
        layers = []
        for depth in range(c.num_layers):
            lp = self.layer_params(depth)
            lc = {"x": x}

            def heads(z):
                return z.reshape(B, T, A, d).transpose(0, 2, 1, 3)

            q = heads(x @ lp["q_w"] + lp["q_b"])
            k = heads(x @ lp["k_w"] + lp["k_b"])
            v = heads(x @ lp["v_w"] + lp["v_b"])
            ctx, probs = attention(q, k, v, pad)
            ctx = ctx.transpose(0, 2, 1, 3).reshape(B, T, A * d)
            a = ctx @ lp["o_w"] + lp["o_b"]
            a, lc["attn_drop"] = dropout(a)
            h, lc["ln1"] = layer_norm(x + a, lp["attn_ln_g"], lp["attn_ln_b"])
            f1 = h @ lp["ffn_w1"] + lp["ffn_b1"]
            g = gelu(f1)
            f2 = g @ lp["ffn_w2"] + lp["ffn_b2"]
            f2, lc["ffn_drop"] = dropout(f2)
            y, lc["ln2"] = layer_norm(h + f2, lp["out_ln_g"], lp["out_ln_b"])
            lc.update(q=q, k=k, v=v, probs=probs, ctx=ctx, h=h, f1=f1, g=g)
            layers.append(lc)
            probs_all.append(probs)
            x = y
        cache["layers"] = layers
        cache["final"] = x
        logits = x @ p["cls_w"] + p["cls_b"]
        return ForwardTrace(logits, probs_all, cache)

    def logits(self, input_ids, attention_mask=None) -> np.ndarray:
        return self.forward(input_ids, attention_mask).logits

    # -------------------------------------------------------------- backward

    def backward(self, trace: ForwardTrace, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        c = self.config
        p = self.params
        cache = trace.cache
        B, T = cache["B"], cache["T"]
        A, d = c.num_heads, c.head_dim
        grads = {k: np.zeros_like(v) for k, v in p.items()}

        x = cache["final"]
        grads["cls_w"] += x.reshape(-1, x.shape[-1]).T @ dlogits.reshape(-1, dlogits.shape[-1])
        grads["cls_b"] += dlogits.sum(axis=(0, 1))
        dx = dlogits @ p["cls_w"].T

        def acc(depth, name, value):
            grads[self._layer_key(depth, name)] += value

        def wgrad(inp, dout):
            return inp.reshape(-1, inp.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])

        for depth in reversed(range(c.num_layers)):
            lp = self.layer_params(depth)
            lc = cache["layers"][depth]
            # output LayerNorm
            dres, dg, db = layer_norm_backward(dx, lp["out_ln_g"], lc["ln2"])
            acc(depth, "out_ln_g", dg)
            acc(depth, "out_ln_b", db)
            dh = dres.copy()
            df2 = dres if lc["ffn_drop"] is None else dres * lc["ffn_drop"]
            acc(depth, "ffn_w2", wgrad(lc["g"], df2))
            acc(depth, "ffn_b2", df2.sum(axis=(0, 1)))
            dgl = df2 @ lp["ffn_w2"].T
            df1 = dgl * gelu_grad(lc["f1"])
            acc(depth, "ffn_w1", wgrad(lc["h"], df1))
            acc(depth, "ffn_b1", df1.sum(axis=(0, 1)))
            dh += df1 @ lp["ffn_w1"].T
            # attention LayerNorm
            dres, dg, db = layer_norm_backward(dh, lp["attn_ln_g"], lc["ln1"])
            acc(depth, "attn_ln_g", dg)
            acc(depth, "attn_ln_b", db)
            dxin = dres.copy()
            da = dres if lc["attn_drop"] is None else dres * lc["attn_drop"]
            acc(depth, "o_w", wgrad(lc["ctx"], da))
            acc(depth, "o_b", da.sum(axis=(0, 1)))
            dctx = (da @ lp["o_w"].T).reshape(B, T, A, d).transpose(0, 2, 1, 3)
            probs = lc["probs"]
            dprobs = dctx @ np.swapaxes(lc["v"], -1, -2)
            dv = np.swapaxes(probs, -1, -2) @ dctx
            dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
            dscores /= math.sqrt(d)
            dq = dscores @ lc["k"]
            dk = np.swapaxes(dscores, -1, -2) @ lc["q"]
            xin = lc["x"]
            for name, dz in (("q", dq), ("k", dk), ("v", dv)):
                dz = dz.transpose(0, 2, 1, 3).reshape(B, T, A * d)
                acc(depth, f"{name}_w", wgrad(xin, dz))
                acc(depth, f"{name}_b", dz.sum(axis=(0, 1)))
                dxin += dz @ lp[f"{name}_w"].T
            dx = dxin

        if c.factorized_embedding:
            grads["proj_w"] += wgrad(cache["proj_in"], dx)
            grads["proj_b"] += dx.sum(axis=(0, 1))
            dx = dx @ p["proj_w"].T
        if cache["emb_drop"] is not None:
            dx = dx * cache["emb_drop"]
        demb, dg, db = layer_norm_backward(dx, p["emb_ln_g"], cache["emb_ln"])
        grads["emb_ln_g"] += dg
        grads["emb_ln_b"] += db
        np.add.at(grads["word_emb"], cache["ids"].ravel(), demb.reshape(-1, demb.shape[-1]))
        grads["pos_emb"][:T] += demb.sum(axis=0)
        grads["type_emb"][0] += demb.sum(axis=(0, 1))
        return grads

    def loss_and_grad(self, input_ids, label_ids, attention_mask=None, train: bool = False,
                      rng: np.random.Generator | None = None) -> tuple[float, dict[str, np.ndarray]]:
        """Mean token cross-entropy over non-ignored positions, and its gradient."""
        labels = np.atleast_2d(np.asarray(label_ids, dtype=np.int64))
        trace = self.forward(input_ids, attention_mask, train=train, rng=rng)
        loss, dlogits = cross_entropy(trace.logits, labels)
        return loss, self.backward(trace, dlogits)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    valid = labels != IGNORE_INDEX
    n = int(valid.sum())
    if n == 0:
        raise EmptyTargetError("every position carries the ignore label")
    if labels[valid].min() < 0 or labels[valid].max() >= logits.shape[-1]:
        raise InputError("label id out of range")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    safe = np.where(valid, labels, 0)
    picked = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
    loss = -float(picked[valid].sum()) / n
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, safe[..., None], np.take_along_axis(dlogits, safe[..., None], -1) - 1.0, -1)
    dlogits *= valid[..., None] / n
    return loss, dlogits.astype(logits.dtype, copy=False)


def init_model(config: ModelConfig, seed: int = 0, dtype=np.float32) -> TaggerModel:
    """Weights ~ N(0, 0.02²) truncated at two sigma; biases 0; LayerNorm gain 1."""
    config.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("_g"):
            arr = np.ones(shape)
        elif is_decay_exempt(name):
            arr = np.zeros(shape)
        else:
            arr = _truncated_normal(rng, shape, INIT_STD)
        params[name] = arr.astype(dtype)
    return TaggerModel(config, params)


def iter_decay_params(model: TaggerModel) -> Iterator[str]:
    return (k for k in model.params if not is_decay_exempt(k))
