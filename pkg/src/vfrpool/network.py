"""x-vector style TDNN with a conditioned attentive pooling layer.

Frame-level layers use valid (unpadded) temporal contexts, so an input of
T frames yields T - 14 pooled frames with the default contexts. Parameters
live in one ordered ``dict`` (name -> float64 array) so that the optimizer,
the gradient checker and the model file all walk the same declaration order.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from . import pooling
from .dsp import MfccMatrix
from .errors import (
    DimensionMismatch,
    InvalidConfig,
    LabelOutOfRange,
    MalformedFile,
    UnknownVariant,
    UtteranceTooShort,
)

DEFAULT_CONTEXTS = ((-2, -1, 0, 1, 2), (-2, 0, 2), (-3, 0, 3), (0,), (0,))
FRAME_LAYERS = ("l1", "l2", "l3", "l4", "l5")


@dataclass(frozen=True)
class ModelConfig:
    n_speakers: int
    variant: str = "none"
    input_dim: int = 30
    frame_dim: int = 512  # l1..l4
    pool_dim: int = 1500  # l5
    embed_dim: int = 512  # l6, l7
    attention_dim: int = 500
    contexts: tuple = DEFAULT_CONTEXTS

    def validate(self):
        if self.variant not in pooling.POOLING_MODES:
            raise UnknownVariant(f"unknown variant {self.variant!r}")
        dims = (self.n_speakers, self.input_dim, self.frame_dim, self.pool_dim,
                self.embed_dim, self.attention_dim)
        if any(int(d) < 1 for d in dims):
            raise InvalidConfig(f"all dimensions must be >= 1, got {dims}")
        if len(self.contexts) != len(FRAME_LAYERS) or any(len(c) == 0 for c in self.contexts):
            raise InvalidConfig("need one non-empty context offset list per frame layer")
        for offs in self.contexts:
            if list(offs) != sorted(set(offs)) or min(offs) > 0 or max(offs) < 0:
                raise InvalidConfig(f"context {offs} must be sorted, unique and span 0")
        return self

    @property
    def left_context(self):
        return -sum(min(c) for c in self.contexts)

    @property
    def receptive_field(self):
        return 1 + sum(max(c) - min(c) for c in self.contexts)

    def layer_dims(self):
        """(in_dim, out_dim) per frame layer, context-expanded input."""
        outs = [self.frame_dim] * 4 + [self.pool_dim]
        ins = [self.input_dim] + outs[:-1]
        return [(len(ctx) * i, o) for ctx, i, o in zip(self.contexts, ins, outs)]

    def param_shapes(self):
        shapes = []
        for name, (i, o) in zip(FRAME_LAYERS, self.layer_dims()):
            shapes += [(f"{name}.W", (o, i)), (f"{name}.b", (o,))]
        shapes += [(f"pool.{n}", s)
                   for n, s in pooling.param_shapes(self.variant, self.pool_dim, self.attention_dim)]
        E = self.embed_dim
        shapes += [("l6.W", (E, 2 * self.pool_dim)), ("l6.b", (E,)),
                   ("l7.W", (E, E)), ("l7.b", (E,)),
                   ("out.W", (self.n_speakers, E)), ("out.b", (self.n_speakers,))]
        return shapes


@dataclass
class Model:
    config: ModelConfig
    params: dict
    seed: int = 0

    def pool_params(self):
        return {k[5:]: v for k, v in self.params.items() if k.startswith("pool.")}

    def copy(self):
        return Model(self.config, {k: v.copy() for k, v in self.params.items()}, self.seed)


@dataclass
class SpeakerEmbedding:
    vector: np.ndarray
    utterance_id: str = ""


def _is_bias(name):
    return name.rsplit(".", 1)[-1].startswith("b")


def init_model(config, seed=0):
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    config.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in config.param_shapes():
        if _is_bias(name):
            params[name] = np.zeros(shape)
            continue
        fan_out, fan_in = (shape[0], shape[1]) if len(shape) == 2 else (1, shape[0])
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-limit, limit, size=shape)
    return Model(config, params, int(seed))


def relu(x):
    return np.maximum(x, 0.0)


def _gather_context(H, offsets):
    left, right = -min(offsets), max(offsets)
    T_out = H.shape[1] - left - right
    return np.concatenate([H[:, left + o: left + o + T_out] for o in offsets], axis=-1)


def _scatter_context(g_ctx, offsets, T_in):
    left = -min(offsets)
    B, T_out, width = g_ctx.shape
    n = width // len(offsets)
    g_H = np.zeros((B, T_in, n))
    for k, o in enumerate(offsets):
        g_H[:, left + o: left + o + T_out] += g_ctx[..., k * n:(k + 1) * n]
    return g_H


def _as_batch(feats, c):
    X = feats.frames if isinstance(feats, MfccMatrix) else np.asarray(feats, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if X.ndim == 2:
        X, c = X[None], c[None]
    if X.ndim != 3 or c.ndim != 2 or c.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"features {X.shape} and conditioning {c.shape} are not aligned")
    return X, c


def pooled_frames(T, config):
    return T - config.receptive_field + 1


def forward(feats, c, model):
    """Run the network; returns ``(logits, cache)``.

    ``feats`` is an :class:`MfccMatrix`, a (T, D) array or a (B, T, D) batch.
    ``c`` is the conditioning vector aligned to the T input frames (the
    context-center value is selected internally) or already aligned to the
    T - 14 pooled frames. Single-utterance inputs give logits of shape (S,).
    """
    cfg, p = model.config, model.params
    single = (feats.frames if isinstance(feats, MfccMatrix) else np.asarray(feats)).ndim == 2
    X, c = _as_batch(feats, c)
    B, T, D = X.shape
    if D != cfg.input_dim:
        raise DimensionMismatch(f"features have {D} dims, model expects {cfg.input_dim}")
    if T < cfg.receptive_field:
        raise UtteranceTooShort(f"{T} frames; the network needs at least {cfg.receptive_field}")
    n_pool = pooled_frames(T, cfg)
    if c.shape[1] == T:
        c_pool = c[:, cfg.left_context: cfg.left_context + n_pool]
    elif c.shape[1] == n_pool:
        c_pool = c
    else:
        raise DimensionMismatch(f"conditioning has {c.shape[1]} values for {T} frames")

    cache = {"X": X, "acts": [], "single": single}
    H = X
    for name, offsets in zip(FRAME_LAYERS, cfg.contexts):
        ctx = _gather_context(H, offsets)
        Z = ctx @ p[f"{name}.W"].T + p[f"{name}.b"]
        cache["acts"].append((ctx, Z, H.shape[1]))
        H = relu(Z)

    stats, pcache = pooling.pool_forward(H, c_pool, model.pool_params(), cfg.variant)
    pooled = np.concatenate([stats.mu, stats.sigma], axis=-1)
    z6 = pooled @ p["l6.W"].T + p["l6.b"]
    h6 = relu(z6)
    z7 = h6 @ p["l7.W"].T + p["l7.b"]
    h7 = relu(z7)
    logits = h7 @ p["out.W"].T + p["out.b"]
    cache.update(pool=pcache, pooled=pooled, z6=z6, h6=h6, z7=z7, h7=h7, logits=logits)
    return (logits[0] if single else logits), cache


def backward(cache, labels, model):
    """Gradients of the batch-mean cross-entropy w.r.t. every parameter."""
    cfg, p = model.config, model.params
    logits = cache["logits"]
    B, S = logits.shape
    labels = np.atleast_1d(np.asarray(labels))
    if labels.shape != (B,):
        raise DimensionMismatch(f"{labels.shape[0]} labels for a batch of {B}")
    if np.any(labels < 0) or np.any(labels >= S):
        raise LabelOutOfRange(f"labels must lie in [0, {S})")

    g_logits = pooling.softmax(logits, axis=-1)
    g_logits[np.arange(B), labels] -= 1.0
    g_logits /= B

    grads = {}
    grads["out.W"] = g_logits.T @ cache["h7"]
    grads["out.b"] = g_logits.sum(axis=0)
    g_z7 = (g_logits @ p["out.W"]) * (cache["z7"] > 0)
    grads["l7.W"] = g_z7.T @ cache["h6"]
    grads["l7.b"] = g_z7.sum(axis=0)
    g_z6 = (g_z7 @ p["l7.W"]) * (cache["z6"] > 0)
    grads["l6.W"] = g_z6.T @ cache["pooled"]
    grads["l6.b"] = g_z6.sum(axis=0)
    g_pooled = g_z6 @ p["l6.W"]
    P = cfg.pool_dim
    g_U, pgrads = pooling.pooling_backward(
        cache["pool"], model.pool_params(), g_pooled[:, :P], g_pooled[:, P:]
    )
    for k, v in pgrads.items():
        grads[f"pool.{k}"] = v

    g_H = g_U
    for name, offsets, (ctx, Z, T_in) in reversed(list(zip(FRAME_LAYERS, cfg.contexts, cache["acts"]))):
        g_Z = g_H * (Z > 0)
        grads[f"{name}.W"] = np.einsum("bto,bti->oi", g_Z, ctx)
        grads[f"{name}.b"] = g_Z.sum(axis=(0, 1))
        g_ctx = g_Z @ p[f"{name}.W"]
        g_H = _scatter_context(g_ctx, offsets, T_in)
    return {name: grads[name] for name in p}


def extract_embedding(feats, c, model, utterance_id=""):
    """Affine output of l6 (before its ReLU) for a single utterance."""
    _, cache = forward(feats, c, model)
    return SpeakerEmbedding(cache["z6"][0].copy(), utterance_id)


def embed_batch(feats, c, model):
    """Embeddings (B, E) for a batch of equal-length utterances."""
    _, cache = forward(feats, c, model)
    return cache["z6"]


# --- model file ----------------------------------------------------------------

SPM_MAGIC = b"SPM1"
SPM_VERSION = 1


def save_model(path, model):
    """Write the SPM1 model file: header, config block, float32 tensors."""
    cfg = model.config
    out = bytearray()
    out += SPM_MAGIC
    out += struct.pack("<I", SPM_VERSION)
    out += struct.pack(
        "<6IIQ",
        cfg.input_dim, cfg.frame_dim, cfg.pool_dim, cfg.embed_dim, cfg.attention_dim,
        cfg.n_speakers, pooling.POOLING_MODES.index(cfg.variant), int(model.seed),
    )
    out += struct.pack("<I", len(cfg.contexts))
    for offs in cfg.contexts:
        out += struct.pack(f"<I{len(offs)}i", len(offs), *offs)
    for name, shape in cfg.param_shapes():
        out += np.asarray(model.params[name], dtype="<f4").tobytes(order="C")
    with open(path, "wb") as f:
        f.write(bytes(out))


def load_model(path):
    data = open(path, "rb").read()
    try:
        if data[:4] != SPM_MAGIC:
            raise MalformedFile(f"{path}: bad magic {data[:4]!r}")
        pos = 4
        (version,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if version != SPM_VERSION:
            raise MalformedFile(f"{path}: unsupported model version {version}")
        fields = struct.unpack_from("<6IIQ", data, pos)
        pos += struct.calcsize("<6IIQ")
        (n_layers,) = struct.unpack_from("<I", data, pos)
        pos += 4
        contexts = []
        for _ in range(n_layers):
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            contexts.append(tuple(struct.unpack_from(f"<{n}i", data, pos)))
            pos += 4 * n
    except struct.error as exc:
        raise MalformedFile(f"{path}: truncated model header") from exc
    input_dim, frame_dim, pool_dim, embed_dim, attention_dim, n_speakers, tag, seed = fields
    if tag >= len(pooling.POOLING_MODES):
        raise MalformedFile(f"{path}: unknown variant tag {tag}")
    cfg = ModelConfig(
        n_speakers=n_speakers, variant=pooling.POOLING_MODES[tag], input_dim=input_dim,
        frame_dim=frame_dim, pool_dim=pool_dim, embed_dim=embed_dim,
        attention_dim=attention_dim, contexts=tuple(contexts),
    ).validate()
    params = {}
    for name, shape in cfg.param_shapes():
        n = int(np.prod(shape))
        if pos + 4 * n > len(data):
            raise MalformedFile(f"{path}: truncated tensor {name}")
        params[name] = np.frombuffer(data, dtype="<f4", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 4 * n
    if pos != len(data):
        raise MalformedFile(f"{path}: {len(data) - pos} trailing bytes")
    return Model(cfg, params, int(seed))


def with_variant(config, variant):
    return replace(config, variant=variant)
