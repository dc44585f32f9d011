"""Geometry of n-balls: volumes, surfaces, peaks and sampled distances.

All closed forms go through ``math.lgamma`` so that dimensions well past
170 (where ``gamma`` overflows) stay finite.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .backend import get_kernels
from .errors import DomainError

LOG_PI = math.log(math.pi)
GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SphereMetrics:
    dimension: float
    radius: float
    volume: float
    surface: float


@dataclass(frozen=True)
class SupportVolumeQuery:
    """Superlevel set ``{w : N(w; 0, sigma^2 I_d) > density_threshold}``."""

    dimension: int
    sigma: float
    density_threshold: float

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.dimension!r}")
        _check_positive("sigma", self.sigma)
        _check_positive("density_threshold", self.density_threshold)

    @property
    def peak_density(self) -> float:
        return math.exp(self.log_peak_density)

    @property
    def log_peak_density(self) -> float:
        return -0.5 * self.dimension * math.log(2.0 * math.pi * self.sigma**2)


def _check_positive(name: str, value: float) -> None:
    try:
        ok = math.isfinite(value) and value > 0
    except TypeError:
        ok = False
    if not ok:
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")


def log_ball_volume(n: float, r: float = 1.0) -> float:
    _check_positive("n", n)
    _check_positive("r", r)
    return 0.5 * n * LOG_PI + n * math.log(r) - math.lgamma(0.5 * n + 1.0)


def ball_volume(n: float, r: float = 1.0) -> float:
    """Volume of the ``n``-ball of radius ``r``: pi^(n/2) r^n / Gamma(n/2 + 1)."""
    return math.exp(log_ball_volume(n, r))


def sphere_surface(n: float, r: float = 1.0) -> float:
    """Surface measure of the ``n``-ball boundary, ``n * V_n(r) / r``."""
    return math.exp(math.log(n) + log_ball_volume(n, r) - math.log(r))


def metrics(n: float, r: float = 1.0) -> SphereMetrics:
    return SphereMetrics(n, r, ball_volume(n, r), sphere_surface(n, r))


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Maximizer of a unimodal ``f`` on ``[lo, hi]`` to absolute tolerance ``tol``."""
    a, b = lo, hi
    c = b - GOLDEN_RATIO * (b - a)
    d = a + GOLDEN_RATIO * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN_RATIO * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN_RATIO * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def volume_peak_dimension(r: float = 1.0, surface: bool = False) -> float:
    """Real dimension in [0.1, 200] maximizing the volume (or surface) at radius ``r``.

    The log is maximized instead of the value itself; the argmax is the same
    and the log stays finite over the whole bracket.
    """
    _check_positive("r", r)
    if surface:
        f = lambda n: math.log(n) + log_ball_volume(n, r) - math.log(r)  # noqa: E731
    else:
        f = lambda n: log_ball_volume(n, r)  # noqa: E731
    return golden_section_max(f, 0.1, 200.0, tol=1e-8)


def integer_peak_dimension(r: float = 1.0, surface: bool = False, n_max: int = 200) -> int:
    logs = [log_ball_volume(n, r) + (math.log(n / r) if surface else 0.0)
            for n in range(1, n_max + 1)]
    return int(np.argmax(logs)) + 1


def expected_pairwise_distance(
    n: int,
    r: float = 1.0,
    n_trials: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    backend: str | None = None,
) -> tuple[float, float]:
    """Monte-Carlo mean distance between two uniform points of the ``n``-ball.

    Returns ``(mean, stderr)``.  Trial ``i`` uses the stream
    ``rng.trial_seed(seed, i)`` only, and the moments are summed with
    ``math.fsum`` so the result is bit-identical for any ``workers``.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    _check_positive("r", r)
    if n_trials < 2:
        raise DomainError(f"n_trials must be at least 2, got {n_trials}")
    kern = get_kernels(backend)
    chunks = _partition(n_trials, workers)

    def run(bounds):
        lo, hi = bounds
        return kern.pair_distances(rng.trial_seeds(seed, lo, hi), int(n), float(r))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    d = np.concatenate(parts)
    mean = math.fsum(d) / n_trials
    var = math.fsum((d - mean) ** 2) / (n_trials - 1)
    return mean, math.sqrt(var / n_trials)


def _partition(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(int(parts), n))
    edges = [n * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts)]


def support_radius(q: SupportVolumeQuery) -> float:
    """Radius where the isotropic Gaussian density equals the threshold (0 if above peak)."""
    log_ratio = q.log_peak_density - math.log(q.density_threshold)
    if log_ratio <= 0.0:
        return 0.0
    return q.sigma * math.sqrt(2.0 * log_ratio)


def gaussian_support_volume(q: SupportVolumeQuery) -> float:
    """Volume of the region where an isotropic init density exceeds a threshold.

    This reads a probability cut-off on initialization ("P_w > t") as a
    density superlevel set, which for N(0, sigma^2 I) is a ball.
    """
    radius = support_radius(q)
    if radius == 0.0:
        return 0.0
    return ball_volume(q.dimension, radius)


def curve_table(dims, r: float = 1.0) -> list[SphereMetrics]:
    return [metrics(float(n), r) for n in dims]


def curve_csv(rows: list[SphereMetrics]) -> str:
    buf = io.StringIO()
    buf.write("n,volume,surface\n")
    for m in rows:
        buf.write(f"{m.dimension:.17g},{m.volume:.17g},{m.surface:.17g}\n")
    return buf.getvalue()
