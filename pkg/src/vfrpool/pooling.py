"""Self-attentive statistics pooling with conditioning on the VFR vector.

Frames ``u_t`` (rows of ``U``) are first passed through a conditioning
transform ``f(u_t, c_t)``; the transformed frames drive the attention scorer
only, and the weighted mean / standard deviation are always taken over the
original ``u_t``.

All functions accept a single utterance ``U`` of shape (T, P) with ``c`` of
shape (T,), or a batch of shape (B, T, P) with ``c`` of shape (B, T).
Parameters are passed as a mapping with the keys listed by
:func:`param_shapes`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroConditioning,
    DimensionMismatch,
    ShapeMismatch,
    UnknownVariant,
    WeightNotNormalized,
)

VARIANTS = ("none", "concat", "gate", "affine", "combined_a", "combined_b")
POOLING_MODES = VARIANTS + ("vfr_weights",)
VAR_FLOOR = 1e-8

_USES_CONCAT = {"concat", "combined_a", "combined_b"}
_USES_GATE = {"gate", "combined_a"}
_USES_AFFINE = {"affine", "combined_b"}


def check_mode(mode):
    if mode not in POOLING_MODES:
        raise UnknownVariant(f"unknown pooling variant {mode!r}; expected one of {POOLING_MODES}")


def param_shapes(mode, pool_dim, attention_dim):
    """Ordered (name, shape) list of the pooling parameters for ``mode``."""
    check_mode(mode)
    if mode == "vfr_weights":
        return []
    P, A = pool_dim, attention_dim
    shapes = []
    if mode in _USES_CONCAT:
        shapes += [("Wc", (P, P + 1)), ("bc", (P,))]
    if mode in _USES_GATE:
        shapes += [("Wg", (P, 1)), ("bg", (P,))]
    if mode in _USES_AFFINE:
        shapes += [("Wgam", (P, 1)), ("bgam", (P,)), ("Wbet", (P, 1)), ("bbet", (P,))]
    shapes += [("W1", (A, P)), ("b1", (A,)), ("W2", (A,)), ("b2", (1,))]
    return shapes


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class PooledStats:
    mu: np.ndarray
    sigma: np.ndarray
    alphas: np.ndarray


def _check_frames(U, c):
    if U.ndim not in (2, 3):
        raise DimensionMismatch(f"frames must be (T, P) or (B, T, P), got {U.shape}")
    if c is not None and c.shape != U.shape[:-1]:
        raise DimensionMismatch(f"conditioning shape {c.shape} does not match frames {U.shape[:-1]}")


def _check_params(mode, params, pool_dim):
    """Validate the conditioning parameters needed by ``mode``."""
    for name, shape in param_shapes(mode, pool_dim, 1):
        if name in ("W1", "b1", "W2", "b2"):
            continue
        if name not in params:
            raise UnknownVariant(f"variant {mode!r} needs parameter {name!r}")
        if np.shape(params[name]) != shape:
            raise DimensionMismatch(f"{name} has shape {np.shape(params[name])}, expected {shape}")


def _gate(c, params):
    return sigmoid(c[..., None] * params["Wg"][:, 0] + params["bg"])


def _gamma_beta(c, params):
    gamma = c[..., None] * params["Wgam"][:, 0] + params["bgam"]
    beta = c[..., None] * params["Wbet"][:, 0] + params["bbet"]
    return gamma, beta


def _concat(U, c, params):
    P = U.shape[-1]
    Wc = params["Wc"]
    return np.tanh(U @ Wc[:, :P].T + c[..., None] * Wc[:, P] + params["bc"])


def transform_frames(U, c, params, variant, cache=None):
    """Conditioning transform ``f(u_t, c_t)`` applied frame-wise.

    ``cache``, if a dict, receives intermediates for the backward pass.
    """
    U = np.asarray(U, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _check_frames(U, c)
    if variant not in VARIANTS:
        raise UnknownVariant(f"unknown conditioning variant {variant!r}")
    _check_params(variant, params, U.shape[-1])
    cache = {} if cache is None else cache
    base = U
    if variant in _USES_CONCAT:
        base = cache["V"] = _concat(U, c, params)
    if variant == "none" or variant == "concat":
        return base
    if variant in _USES_GATE:
        m = cache["m"] = _gate(c, params)
        return m * base
    gamma, beta = _gamma_beta(c, params)
    cache["gamma"] = gamma
    return gamma * base + beta


def attention_scores(F, params):
    """Softmax over frames of ``W2 . sigmoid(W1 f_t + b1) + b2``."""
    F = np.asarray(F, dtype=np.float64)
    if F.shape[-1] != params["W1"].shape[1]:
        raise DimensionMismatch(f"frames have {F.shape[-1]} dims, W1 expects {params['W1'].shape[1]}")
    return softmax(_scores(F, params)[1], axis=-1)


def _scores(F, params):
    A = sigmoid(F @ params["W1"].T + params["b1"])
    return A, A @ params["W2"] + params["b2"][0]


def weighted_stats(U, alphas, check=True):
    U = np.asarray(U, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.shape != U.shape[:-1]:
        raise DimensionMismatch(f"weights {alphas.shape} do not match frames {U.shape[:-1]}")
    if check:
        if np.any(alphas < 0) or np.any(np.abs(alphas.sum(axis=-1) - 1.0) > 1e-6):
            raise WeightNotNormalized("weights must be non-negative and sum to 1")
    mu = np.einsum("...t,...tp->...p", alphas, U)
    second = np.einsum("...t,...tp->...p", alphas, U * U)
    sigma = np.sqrt(np.maximum(second - mu * mu, VAR_FLOOR))
    return PooledStats(mu, sigma, alphas)


def vfr_weights(c):
    c = np.asarray(c, dtype=np.float64)
    total = c.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise AllZeroConditioning("conditioning vector sums to zero; cannot form weights")
    return c / total


def vfr_weight_pooling(U, c):
    """Statistics pooling with weights proportional to the pick counts."""
    U = np.asarray(U, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _check_frames(U, c)
    return weighted_stats(U, vfr_weights(c))


def pool_forward(U, c, params, mode):
    """Forward pass of the pooling layer; returns (PooledStats, cache)."""
    check_mode(mode)
    U = np.asarray(U, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _check_frames(U, c)
    cache = {"U": U, "c": c, "mode": mode}
    if mode == "vfr_weights":
        alphas = vfr_weights(c)
    else:
        F = transform_frames(U, c, params, mode, cache)
        A, e = _scores(F, params)
        alphas = softmax(e, axis=-1)
        cache.update(F=F, A=A)
    stats = weighted_stats(U, alphas, check=False)
    cache["stats"] = stats
    return stats, cache


def pooling_backward(cache, params, g_mu, g_sigma):
    """Backpropagate upstream gradients of (mu, sigma) through the pooling layer.

    Returns ``(g_U, grads)`` where ``grads`` maps parameter names to arrays
    summed over the batch axis.
    """
    U, c, mode = cache["U"], cache["c"], cache["mode"]
    stats = cache["stats"]
    alphas, mu, sigma = stats.alphas, stats.mu, stats.sigma
    g_mu = np.asarray(g_mu, dtype=np.float64)
    g_sigma = np.asarray(g_sigma, dtype=np.float64)
    if g_mu.shape != mu.shape or g_sigma.shape != sigma.shape:
        raise ShapeMismatch(f"upstream gradients {g_mu.shape}/{g_sigma.shape} vs stats {mu.shape}")

    second = np.einsum("...t,...tp->...p", alphas, U * U)
    var_active = (second - mu * mu) > VAR_FLOOR
    g_var = np.where(var_active, g_sigma / (2.0 * sigma), 0.0)
    g_mean = g_mu - 2.0 * mu * g_var
    g_U = alphas[..., None] * (g_mean[..., None, :] + 2.0 * U * g_var[..., None, :])

    grads = {}
    if mode == "vfr_weights":
        return g_U, grads

    g_alpha = np.einsum("...tp,...p->...t", U, g_mean) + np.einsum("...tp,...p->...t", U * U, g_var)
    g_e = alphas * (g_alpha - (alphas * g_alpha).sum(axis=-1, keepdims=True))

    F, A = cache["F"], cache["A"]
    grads["W2"] = _bsum(g_e[..., None] * A, keep=1)
    grads["b2"] = np.array([g_e.sum()])
    g_Z = g_e[..., None] * params["W2"] * A * (1.0 - A)
    grads["W1"] = _flat(g_Z).T @ _flat(F)
    grads["b1"] = _bsum(g_Z, keep=1)
    g_F = g_Z @ params["W1"]

    g_U = g_U + _transform_backward(mode, cache, params, g_F, grads)
    return g_U, grads


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def _bsum(x, keep):
    """Sum all leading axes, keeping the last ``keep``."""
    return x.reshape(-1, *x.shape[x.ndim - keep:]).sum(axis=0)


def _transform_backward(mode, cache, params, g_F, grads):
    U, c = cache["U"], cache["c"]
    if mode == "none":
        return g_F

    if mode in _USES_CONCAT:
        V = cache["V"]
        if mode == "concat":
            g_V = g_F
        elif mode == "combined_a":
            m = cache["m"]
            g_V = g_F * m
            _gate_backward(g_F * V, m, c, grads)
        else:
            g_V = g_F * cache["gamma"]
            _affine_backward(g_F * V, g_F, c, grads)
        g_Zc = g_V * (1.0 - V * V)
        P = U.shape[-1]
        Wc = params["Wc"]
        g_Wc = np.empty_like(Wc)
        g_Wc[:, :P] = _flat(g_Zc).T @ _flat(U)
        g_Wc[:, P] = _flat(g_Zc).T @ c.reshape(-1)
        grads["Wc"] = g_Wc
        grads["bc"] = _bsum(g_Zc, keep=1)
        return g_Zc @ Wc[:, :P]

    if mode == "gate":
        m = cache["m"]
        _gate_backward(g_F * U, m, c, grads)
        return g_F * m

    # affine
    _affine_backward(g_F * U, g_F, c, grads)
    return g_F * cache["gamma"]


def _gate_backward(g_m, m, c, grads):
    g_z = g_m * m * (1.0 - m)
    grads["Wg"] = (_flat(g_z).T @ c.reshape(-1))[:, None]
    grads["bg"] = _bsum(g_z, keep=1)


def _affine_backward(g_gamma, g_beta, c, grads):
    grads["Wgam"] = (_flat(g_gamma).T @ c.reshape(-1))[:, None]
    grads["bgam"] = _bsum(g_gamma, keep=1)
    grads["Wbet"] = (_flat(g_beta).T @ c.reshape(-1))[:, None]
    grads["bbet"] = _bsum(g_beta, keep=1)


def attentive_pool(U, c, params, mode):
    """Convenience forward returning only the pooled statistics."""
    return pool_forward(U, c, params, mode)[0]
