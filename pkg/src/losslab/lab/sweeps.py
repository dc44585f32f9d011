"""Double-descent style sweeps: capacity, epoch and data fidelity.

Label noise is applied once to the full dataset before the train/test
split.  Errors are 0/1 classification errors at sigmoid threshold 0.5.
Sweep cells train with seed ``rng.trial_seed(seed, cell)`` and run on a
thread pool; results are merged by cell index, so worker count never
changes the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import data as D
from .. import nanonet as nn
from .. import probes as pb
from .. import rng
from ..errors import DomainError, TrainingDiverged
from ..nanonet import Dataset, NetworkSpec

SPLIT_STREAM = 0x5B117
FIDELITY_STREAM = 0xF1DE


@dataclass
class SweepPoint:
    axis: str  # "param_count" | "epoch" | "train_size"
    value: int
    train_loss: float | None
    test_loss: float | None
    train_error: float | None
    test_error: float | None
    failed: bool = False
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.failed:
            return
        for name in ("train_loss", "test_loss"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and non-negative, got {v!r}")
        for name in ("train_error", "test_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")


def noisy(data: Dataset, label_noise: float, seed: int) -> Dataset:
    if not 0.0 <= label_noise <= 1.0:
        raise DomainError(f"label_noise must be in [0, 1], got {label_noise}")
    if label_noise == 0:
        return data
    return Dataset(data.X, D.apply_label_noise(data.y, label_noise, seed), data.feature_names)


def split(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded train/test split; each side keeps the original row order."""
    n = len(data)
    n_test = max(1, int(round(test_fraction * n)))
    if not 0 < test_fraction < 1 or n_test >= n:
        raise DomainError(f"test_fraction {test_fraction} leaves no train or no test rows for n={n}")
    perm = np.random.default_rng([seed, SPLIT_STREAM]).permutation(n)
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))


def evaluate(weights: nn.WeightSet, data: Dataset) -> tuple[float, float]:
    """(mean BCE, 0/1 error at threshold 0.5)."""
    p = nn.predict(weights, data.X)
    err = float(np.mean((p >= 0.5) != (data.y >= 0.5)))
    return nn.mean_loss(weights, data), err


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cell_seed(seed: int, cell: int) -> int:
    return rng.trial_seed(seed, cell)


def run_capacity_sweep(widths, depth: int, data: Dataset, label_noise: float, test_fraction: float,
                       epochs: int, lr: float, seed: int, batch_size: int = 10,
                       activation: str = "relu", init_scheme: str = "he_normal", init_scale: float = 1.0,
                       workers: int = 1) -> list[SweepPoint]:
    """Train one network per hidden width and report final train/test metrics keyed by param_count."""
    widths = list(widths)
    if len(widths) < 2:
        raise DomainError("a capacity sweep needs at least two widths")
    train_set, test_set = split(noisy(data, label_noise, seed), test_fraction, seed)
    dim = data.X.shape[1]

    def cell(args):
        i, w = args
        spec = NetworkSpec(dim, w, depth, activation, init_scheme, init_scale)
        detail = {"width": w}
        try:
            run = nn.train(spec, train_set, lr, epochs, min(batch_size, len(train_set)), cell_seed(seed, i),
                           snapshot_every=epochs)
        except TrainingDiverged as exc:
            detail["failure"] = str(exc)
            return SweepPoint("param_count", nn.param_count(spec), None, None, None, None, True, detail)
        tr = evaluate(run.final_weights, train_set)
        te = evaluate(run.final_weights, test_set)
        return SweepPoint("param_count", nn.param_count(spec), tr[0], te[0], tr[1], te[1], False, detail)

    return _map(cell, list(enumerate(widths)), workers)


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    test_loss: float
    train_error: float
    test_error: float
    confusion: float | None = None
    id_two_nn: float | None = None
    id_pr: float | None = None


def run_epoch_sweep(spec: NetworkSpec, data: Dataset, label_noise: float, test_fraction: float,
                    epochs: int, lr: float, seed: int, probe_cadence: int, batch_size: int = 10,
                    probe_batch: int = 1, K: int = 32) -> list[EpochRow]:
    """One training run with per-epoch train/test curves and gradient probes every ``probe_cadence`` epochs."""
    if probe_cadence < 1 or epochs < probe_cadence:
        raise DomainError("need 1 <= probe_cadence <= epochs")
    train_set, test_set = split(noisy(data, label_noise, seed), test_fraction, seed)
    rows: list[EpochRow] = []

    def record(epoch, weights):
        tr = evaluate(weights, train_set)
        te = evaluate(weights, test_set)
        row = EpochRow(epoch, tr[0], te[0], tr[1], te[1])
        if epoch % probe_cadence == 0:
            ens = pb.gradient_ensemble(weights, train_set, min(probe_batch, len(train_set)), K, seed, epoch)
            for attr, fn in (("confusion", lambda: pb.gradient_confusion(ens)),
                             ("id_two_nn", lambda: pb.two_nn_id(ens.gradients).value),
                             ("id_pr", lambda: pb.participation_ratio_id(ens.gradients).value)):
                try:
                    setattr(row, attr, fn())
                except DomainError:
                    pass
        rows.append(row)

    nn.train(spec, train_set, lr, epochs, min(batch_size, len(train_set)), seed,
             snapshot_every=epochs, callback=record)
    return rows


def fidelity_subset(n_pool: int, size: int, seed: int, repeat: int) -> np.ndarray:
    """Sorted indices of the size-``size`` subset; smaller sizes are subsets of larger ones."""
    order = np.random.default_rng([seed, FIDELITY_STREAM, repeat]).permutation(n_pool)
    return np.sort(order[:size])


def run_fidelity_sweep(spec: NetworkSpec, data: Dataset, sizes, label_noise: float, test_fraction: float,
                       epochs: int, lr: float, seed: int, repeats: int, batch_size: int = 10,
                       workers: int = 1) -> list[SweepPoint]:
    """Train on nested subsets of growing size; evaluate on one fixed held-out set."""
    sizes = list(sizes)
    if repeats < 1:
        raise DomainError("repeats must be positive")
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or not sizes or sizes[0] < 1:
        raise DomainError(f"sizes must be positive and strictly increasing, got {sizes}")
    pool, test_set = split(noisy(data, label_noise, seed), test_fraction, seed)
    if sizes[-1] > len(pool):
        raise DomainError(f"largest size {sizes[-1]} exceeds the {len(pool)} training rows available")

    cells = [(r, s) for r in range(repeats) for s in sizes]

    def cell(args):
        r, size = args
        sub = pool.subset(fidelity_subset(len(pool), size, seed, r))
        try:
            run = nn.train(spec, sub, lr, epochs, min(batch_size, size), cell_seed(seed, r), snapshot_every=epochs)
        except TrainingDiverged:
            return None
        return (*evaluate(run.final_weights, sub), *evaluate(run.final_weights, test_set))

    results = dict(zip(cells, _map(cell, cells, workers)))
    points = []
    for s in sizes:
        ok = [results[(r, s)] for r in range(repeats) if results[(r, s)] is not None]
        detail = {"repeats": repeats, "failed_repeats": repeats - len(ok)}
        if not ok:
            points.append(SweepPoint("train_size", s, None, None, None, None, True, detail))
            continue
        m = np.mean(np.array(ok), axis=0)
        points.append(SweepPoint("train_size", s, float(m[0]), float(m[2]), float(m[1]), float(m[3]), False, detail))
    return points
