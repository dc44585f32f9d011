"""Finite-difference gradient checking shared by the unit and acceptance tests."""

import numpy as np

from losslab import nanonet as nn
from losslab.nanonet import Dataset, NetworkSpec


def finite_difference(weights, batch, h=1e-5):
    theta = weights.flat()
    g = np.empty_like(theta)
    for i in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (nn.mean_loss(weights.with_flat(up), batch) - nn.mean_loss(weights.with_flat(dn), batch)) / (2 * h)
    return g


def random_problem(seed, activation="tanh"):
    g = np.random.default_rng(seed)
    spec = NetworkSpec(int(g.integers(1, 5)), int(g.integers(1, 6)), int(g.integers(0, 4)), activation, "xavier_normal")
    w = nn.init_weights(spec, seed)
    # non-zero biases so every coordinate is exercised
    theta = w.flat() + 0.1 * g.standard_normal(w.n_params)
    n = int(g.integers(1, 6))
    batch = Dataset(g.standard_normal((n, spec.input_dim)), g.integers(0, 2, n).astype(float))
    return spec, w.with_flat(theta), batch


def assert_gradient_close(analytic, numeric):
    big = np.abs(numeric) >= 1e-8
    rel = np.abs(analytic[big] - numeric[big]) / np.maximum(np.abs(numeric[big]), 1e-12)
    assert np.all(rel < 1e-4), rel.max()
    assert np.all(np.abs(analytic[~big] - numeric[~big]) < 1e-8)


def gradient_errors(analytic, numeric):
    """(max relative error over |g| >= 1e-8, max absolute error over the rest)."""
    big = np.abs(numeric) >= 1e-8
    rel = np.abs(analytic[big] - numeric[big]) / np.abs(numeric[big])
    small = np.abs(analytic[~big] - numeric[~big])
    return (float(rel.max()) if rel.size else 0.0, float(small.max()) if small.size else 0.0)
