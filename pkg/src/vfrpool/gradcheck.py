"""Central finite-difference checks for parameter dicts."""

import numpy as np

# Tensors whose true gradient is exactly zero (e.g. the attention output bias,
# which softmax ignores) would otherwise divide round-off by round-off.
NORM_FLOOR = 1e-6


def numerical_grad(loss_fn, params, name, h=1e-4):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``params[name]``."""
    p = params[name]
    flat = p.reshape(-1)
    out = np.zeros(flat.size)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return out.reshape(p.shape)


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), NORM_FLOOR))


def check_gradients(loss_fn, params, analytic, h=1e-4, names=None):
    """Return ``{name: relative error}`` for each checked tensor."""
    return {
        name: relative_error(analytic[name], numerical_grad(loss_fn, params, name, h))
        for name in (names or list(params))
    }
