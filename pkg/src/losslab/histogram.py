"""Monte-Carlo loss histograms over random initializations.

Trial ``i`` of a run draws its weights from the stream
``rng.trial_seed(master_seed, i)`` (see :mod:`losslab.rng`), evaluates the
untrained network on the selected samples and records the mean BCE.  Trials
never share state, so counts are identical however they are split across
workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.signal import find_peaks

from . import rng
from .backend import BACKEND, get_kernels
from .errors import DegenerateInputError, DomainError
from .nanonet import EPS, Dataset, NetworkSpec

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FixedBins:
    width: float = 0.01
    max_loss: float = 20.0
    origin: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and self.max_loss > self.origin):
            raise DomainError("fixed bins need width > 0 and max_loss > origin")

    def edges(self) -> np.ndarray:
        n = int(math.ceil((self.max_loss - self.origin) / self.width - 1e-9))
        return self.origin + self.width * np.arange(n + 1)


@dataclass(frozen=True)
class MinAnchoredBins:
    """Bins spanning [sampled min, sampled max]; kept to mimic the notebook figures."""

    bin_count: int = 100

    def __post_init__(self):
        if self.bin_count < 1:
            raise DomainError("bin_count must be positive")


BinPolicy = Union[FixedBins, MinAnchoredBins]


@dataclass(frozen=True)
class HistogramConfig:
    spec: NetworkSpec
    sample_indices: tuple
    n_trials: int
    bin_policy: BinPolicy = FixedBins()
    master_seed: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise DomainError(f"n_trials must be at least 1, got {self.n_trials}")
        if len(self.sample_indices) == 0:
            raise DomainError("sample_indices is empty")
        object.__setattr__(self, "sample_indices", tuple(int(i) for i in self.sample_indices))

    def echo(self) -> dict:
        s = self.spec
        out = {
            "input_dim": s.input_dim,
            "hidden_width": s.hidden_width,
            "hidden_depth": s.hidden_depth,
            "activation": s.activation,
            "init_scheme": s.init_scheme,
            "init_scale": s.init_scale,
            "sample_indices": ",".join(map(str, self.sample_indices)),
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
        }
        if isinstance(self.bin_policy, FixedBins):
            out.update(bin_policy="fixed", bin_width=self.bin_policy.width,
                       bin_max_loss=self.bin_policy.max_loss, bin_origin=self.bin_policy.origin)
        else:
            out.update(bin_policy="min_anchored", bin_count=self.bin_policy.bin_count)
        return out


@dataclass
class LossHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    overflow_count: int
    n_trials: int
    min_loss: float
    max_loss: float
    config: dict = field(default_factory=dict)
    losses: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def mass_below(self, threshold: float) -> float:
        """Fraction of trials with loss strictly below ``threshold``.

        Exact when raw losses are attached; otherwise bins straddling the
        threshold contribute pro rata.
        """
        if self.n_trials == 0:
            return 0.0
        if self.losses is not None:
            return float(np.count_nonzero(self.losses < threshold)) / self.n_trials
        left, right = self.bin_edges[:-1], self.bin_edges[1:]
        frac = np.clip((threshold - left) / (right - left), 0.0, 1.0)
        below = float(np.dot(frac, self.counts))
        if threshold > self.bin_edges[-1]:
            below += self.overflow_count if threshold > self.max_loss else 0
        return below / self.n_trials

    def csv(self) -> str:
        lines = ["bin_left,bin_right,count"]
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            lines.append(f"{lo:.17g},{hi:.17g},{int(c)}")
        return "\n".join(lines) + "\n"


def _partition(n: int, parts: int, start: int = 0) -> list[tuple[int, int]]:
    parts = max(1, min(int(parts), n))
    edges = [start + n * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts)]


def _problem(config: HistogramConfig, data: Dataset):
    idx = np.asarray(config.sample_indices)
    if idx.min() < 0 or idx.max() >= len(data):
        raise DomainError(f"sample_indices out of range for {len(data)} rows")
    X = np.ascontiguousarray(data.X[idx], dtype=np.float64)
    y = np.ascontiguousarray(data.y[idx], dtype=np.float64)
    if X.shape[1] != config.spec.input_dim:
        raise DomainError(f"data has {X.shape[1]} features, spec expects {config.spec.input_dim}")
    return X, y


def trial_losses(
    config: HistogramConfig,
    data: Dataset,
    start: int,
    stop: int,
    workers: int = 1,
    backend: str | None = None,
) -> np.ndarray:
    """Losses of trials ``start..stop-1`` in trial order."""
    kern = get_kernels(backend)
    X, y = _problem(config, data)
    spec = config.spec
    dims = np.asarray(spec.layer_dims, dtype=np.int64)
    scales = np.ascontiguousarray(spec.layer_scales())
    relu = spec.activation == "relu"

    def run(bounds):
        lo, hi = bounds
        seeds = rng.trial_seeds(config.master_seed, lo, hi)
        return kern.mc_losses(seeds, dims, scales, spec.uniform_init, relu, X, y, EPS)

    if stop <= start:
        return np.empty(0)
    chunks = _partition(stop - start, workers, start)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts)


def bin_losses(losses: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, int]:
    """Counts per ``[edge_k, edge_k+1)`` plus the count at or beyond the last edge."""
    idx = np.searchsorted(edges, losses, side="right") - 1
    inside = (idx >= 0) & (idx < len(edges) - 1)
    counts = np.bincount(idx[inside], minlength=len(edges) - 1)
    return counts.astype(np.int64), int(np.count_nonzero(~inside))


def build_histogram(losses: np.ndarray, policy: BinPolicy, config_echo: dict | None = None,
                    keep_losses: bool = True) -> LossHistogram:
    losses = np.asarray(losses, dtype=np.float64)
    if isinstance(policy, FixedBins):
        edges = policy.edges()
        counts, overflow = bin_losses(losses, edges)
    else:
        lo = float(losses.min()) if len(losses) else 0.0
        hi = float(losses.max()) if len(losses) else 1.0
        if hi <= lo:
            hi = lo + 1e-12
        edges = np.linspace(lo, hi, policy.bin_count + 1)
        idx = np.minimum(np.searchsorted(edges, losses, side="right") - 1, policy.bin_count - 1)
        counts = np.bincount(idx, minlength=policy.bin_count).astype(np.int64)
        overflow = 0
    return LossHistogram(
        bin_edges=edges,
        counts=counts,
        overflow_count=overflow,
        n_trials=len(losses),
        min_loss=float(losses.min()) if len(losses) else float("nan"),
        max_loss=float(losses.max()) if len(losses) else float("nan"),
        config=dict(config_echo or {}),
        losses=losses if keep_losses else None,
    )


def sample_histogram(
    config: HistogramConfig,
    data: Dataset,
    workers: int = 1,
    backend: str | None = None,
) -> LossHistogram:
    """Histogram of untrained-network losses over ``config.n_trials`` random inits."""
    losses = trial_losses(config, data, 0, config.n_trials, workers, backend)
    assert np.isfinite(losses).all(), "clamped BCE produced a non-finite loss"
    echo = config.echo()
    echo["backend"] = backend or BACKEND
    if isinstance(config.bin_policy, FixedBins) and workers > 1:
        # per-partition counts merged by elementwise sum
        edges = config.bin_policy.edges()
        counts = np.zeros(len(edges) - 1, dtype=np.int64)
        overflow = 0
        for lo, hi in _partition(config.n_trials, workers):
            c, o = bin_losses(losses[lo:hi], edges)
            counts += c
            overflow += o
        return LossHistogram(edges, counts, overflow, config.n_trials, float(losses.min()),
                             float(losses.max()), echo, losses)
    return build_histogram(losses, config.bin_policy, echo)


@dataclass
class ModeReport:
    modes: list  # (bin center, count, prominence), sorted by center
    central_mode_loss: float
    zero_mode_mass: float
    left_tail_mass: float
    central_reference: float = LN2


def central_reference(labels=None) -> float:
    """Mean BCE at sigmoid output 0.5; ln 2 whatever the labels are."""
    return LN2


def detect_modes(hist: LossHistogram, prominence_fraction: float = 0.05,
                 tau: float = 0.05, delta: float = 0.1, noise_z: float = 4.0) -> ModeReport:
    """Local maxima standing out from their surroundings.

    A bin qualifies when its topographic prominence is at least
    ``prominence_fraction * max(count)`` and the rise over its reference
    valley is ``noise_z`` Poisson standard deviations or more, i.e.
    ``(peak - valley) / sqrt(peak + valley) >= noise_z``.  The second test
    keeps sampling noise on smooth curves from counting as modes; pass
    ``noise_z=0`` to disable it.  Plateaus count once (middle bin); the
    histogram is padded with zero bins so edge bins can qualify.
    """
    counts = np.asarray(hist.counts)
    if counts.sum() == 0:
        raise DegenerateInputError("histogram has no in-range counts")
    top = counts.max()
    padded = np.concatenate([[0], counts, [0]]).astype(np.float64)
    peaks, props = find_peaks(padded, prominence=prominence_fraction * top)
    centers = hist.centers
    modes = []
    for p, prom in zip(peaks, props["prominences"]):
        peak = padded[p]
        valley = peak - prom
        if prom < noise_z * math.sqrt(peak + valley):
            continue
        modes.append((float(centers[p - 1]), int(counts[p - 1]), float(prom)))
    modes.sort(key=lambda m: m[0])
    central = max(modes, key=lambda m: m[1])[0] if modes else float(centers[np.argmax(counts)])
    return ModeReport(
        modes=modes,
        central_mode_loss=central,
        zero_mode_mass=zero_mode_mass(hist, tau),
        left_tail_mass=left_tail_mass(hist, delta),
    )


def zero_mode_mass(hist: LossHistogram, tau: float = 0.05) -> float:
    """Fraction of trials with loss below ``tau``."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    return hist.mass_below(tau)


def left_tail_mass(hist: LossHistogram, delta: float = 0.1) -> float:
    """Fraction of trials with loss below ``ln 2 - delta``."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    return hist.mass_below(LN2 - delta)


@dataclass
class TailResult:
    histogram: LossHistogram
    retained: int
    trials_used: int
    reachable: bool

    @property
    def acceptance_rate(self) -> float:
        return self.retained / self.trials_used if self.trials_used else 0.0

    @property
    def message(self) -> str:
        if self.reachable:
            return f"retained {self.retained} of {self.trials_used} trials"
        return "tail unreachable at this sampling budget"


def tail_resample(
    config: HistogramConfig,
    data: Dataset,
    left_boundary: float,
    target_count: int,
    max_trials: int,
    workers: int = 1,
    chunk: int = 20_000,
    backend: str | None = None,
) -> TailResult:
    """Keep drawing trials past ``config.n_trials`` and retain losses below the boundary.

    Stops at the exact trial where ``target_count`` is reached, so the result
    does not depend on ``chunk`` or ``workers``.  Tail bins use the config's
    policy, truncated at the boundary for fixed bins.
    """
    if not left_boundary > 0:
        raise DomainError("left_boundary must be positive")
    if target_count < 0 or max_trials < 0:
        raise DomainError("target_count and max_trials must be non-negative")
    kept: list[np.ndarray] = []
    retained = used = 0
    start = config.n_trials
    while retained < target_count and used < max_trials:
        n = min(chunk, max_trials - used)
        losses = trial_losses(config, data, start + used, start + used + n, workers, backend)
        hits = np.flatnonzero(losses < left_boundary)
        need = target_count - retained
        if len(hits) >= need:
            cut = hits[need - 1] + 1
            kept.append(losses[:cut][losses[:cut] < left_boundary])
            used += int(cut)
            retained = target_count
            break
        kept.append(losses[hits])
        retained += len(hits)
        used += n
    tail = np.concatenate(kept) if kept else np.empty(0)
    policy = config.bin_policy
    if isinstance(policy, FixedBins):
        policy = FixedBins(policy.width, min(policy.max_loss, left_boundary), policy.origin)
    echo = config.echo()
    echo.update(tail_left_boundary=left_boundary, tail_target_count=target_count,
                tail_max_trials=max_trials, tail_trials_used=used)
    hist = build_histogram(tail, policy, echo)
    return TailResult(hist, retained, used, reachable=not (retained == 0 and target_count > 0))


@dataclass
class ShiftReport:
    zero_mode_delta: float
    left_tail_delta: float
    wasserstein: float


def compare_histograms(a: LossHistogram, b: LossHistogram, tau: float = 0.05,
                       delta: float = 0.1) -> ShiftReport:
    """Shift from ``a`` to ``b``: mass deltas (b - a) and binned 1-Wasserstein distance."""
    if a.bin_edges.shape != b.bin_edges.shape or not np.allclose(a.bin_edges, b.bin_edges, rtol=0, atol=1e-12):
        raise DomainError("histograms must share bin edges")
    pa = a.counts / max(a.counts.sum(), 1)
    pb = b.counts / max(b.counts.sum(), 1)
    cdf_gap = np.abs(np.cumsum(pa) - np.cumsum(pb))[:-1]
    w1 = float(np.dot(cdf_gap, np.diff(a.centers)))
    return ShiftReport(
        zero_mode_delta=zero_mode_mass(b, tau) - zero_mode_mass(a, tau),
        left_tail_delta=left_tail_mass(b, delta) - left_tail_mass(a, delta),
        wasserstein=w1,
    )
