"""Pure-numpy kernels; the fallback when the compiled extension is absent.

Accumulation order mirrors ``_ckernels.pyx`` term for term (sequential sums
over fan-in and over samples) so the two backends agree to a few ulps.  Only
libm-vs-numpy differences in ``exp``/``log``/``cos``/``tanh`` remain.
"""

from __future__ import annotations

import numpy as np

from . import rng

_BLOCK_TRIALS = 2048


def mc_losses(
    seeds: np.ndarray,
    dims: np.ndarray,
    layer_scale: np.ndarray,
    uniform: bool,
    relu: bool,
    X: np.ndarray,
    y: np.ndarray,
    eps: float,
) -> np.ndarray:
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    out = np.empty(len(seeds), dtype=np.float64)
    for lo in range(0, len(seeds), _BLOCK_TRIALS):
        hi = min(lo + _BLOCK_TRIALS, len(seeds))
        out[lo:hi] = _loss_block(seeds[lo:hi], dims, layer_scale, uniform, relu, X, y, eps)
    return out


def _loss_block(seeds, dims, layer_scale, uniform, relu, X, y, eps):
    n_w = int(sum(int(dims[i]) * int(dims[i + 1]) for i in range(len(dims) - 1)))
    if uniform:
        raw = 2.0 * rng.uniforms(seeds, 0, n_w) - 1.0
    else:
        raw = rng.normals(seeds, 0, n_w)
    T = len(seeds)
    S = X.shape[0]
    h = np.broadcast_to(X, (T, S, X.shape[1]))
    off = 0
    n_layers = len(dims) - 1
    with np.errstate(over="ignore"):
        for layer in range(n_layers):
            fi, fo = int(dims[layer]), int(dims[layer + 1])
            W = raw[:, off:off + fi * fo].reshape(T, fo, fi) * layer_scale[layer]
            off += fi * fo
            acc = np.zeros((T, S, fo))
            for k in range(fi):
                acc += W[:, None, :, k] * h[:, :, k, None]
            if layer < n_layers - 1:
                h = np.maximum(acc, 0.0) if relu else np.tanh(acc)
            else:
                h = acc
        z = h[:, :, 0]
        p = 1.0 / (1.0 + np.exp(-z))
    p = np.minimum(np.maximum(p, eps), 1.0 - eps)
    per = -(y[None, :] * np.log(p) + (1.0 - y[None, :]) * np.log(1.0 - p))
    total = np.zeros(T)
    for s in range(S):
        total += per[:, s]
    return total / S


def pair_distances(seeds: np.ndarray, n: int, r: float) -> np.ndarray:
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    out = np.empty(len(seeds), dtype=np.float64)
    block = max(1, 2**20 // (4 * n + 3))
    for lo in range(0, len(seeds), block):
        s = seeds[lo:lo + block]
        a = _ball_point(s, n, r, 0, 2 * n)
        b = _ball_point(s, n, r, n + 1, 4 * n + 2)
        d = a - b
        out[lo:lo + len(s)] = np.sqrt(_seq_sum(d * d))
    return out


def _ball_point(seeds, n, r, normal_start, radius_draw):
    g = rng.normals(seeds, normal_start, n)
    norm = np.sqrt(_seq_sum(g * g))
    u = rng.uniforms(seeds, radius_draw, 1)[:, 0]
    scale = r * u ** (1.0 / n) / norm
    return g * scale[:, None]


def _seq_sum(a: np.ndarray) -> np.ndarray:
    acc = np.zeros(a.shape[0])
    for j in range(a.shape[1]):
        acc += a[:, j]
    return acc
