"""Conditioned attentive statistics pooling, one variant at a time.

Run:  python3 demos/03_attentive_pooling.py
"""
import numpy as np

from vfrpool import pooling

rng = np.random.default_rng(0)
T, P, A = 50, 8, 4
U = rng.normal(size=(T, P))
c = rng.integers(0, 5, T).astype(float)
c[0] = 4

print("variant       alpha max   alpha entropy   |mu|     mean sigma")
for mode in pooling.POOLING_MODES:
    params = {n: rng.normal(size=s) for n, s in pooling.param_shapes(mode, P, A)}
    stats, _ = pooling.pool_forward(U, c, params, mode)
    a = stats.alphas
    ent = -(a * np.log(a + 1e-300)).sum()
    print(f"{mode:12s}  {a.max():9.4f}   {ent:13.3f}   {np.linalg.norm(stats.mu):6.3f}   {stats.sigma.mean():.3f}")

print(f"(uniform weights would give entropy {np.log(T):.3f})")

# Zeroing the scorer's output layer collapses every variant to plain
# mean / std pooling.
params = {n: rng.normal(size=s) for n, s in pooling.param_shapes("combined_b", P, A)}
params["W2"][:] = 0
stats, _ = pooling.pool_forward(U, c, params, "combined_b")
print("W2 = 0 matches plain statistics:",
      np.allclose(stats.mu, U.mean(0)) and np.allclose(stats.sigma, U.std(0)))

# Gradients come from the analytic backward pass.
stats, cache = pooling.pool_forward(U, c, params, "combined_b")
g_U, grads = pooling.pooling_backward(cache, params, np.ones(P), np.zeros(P))
print("gradient tensors:", ", ".join(f"{k}{v.shape}" for k, v in grads.items()))
