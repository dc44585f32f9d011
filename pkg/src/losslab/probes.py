"""Geometric probes along training paths.

The set of update steps available at a point of a training path is
operationalized as an ensemble of minibatch gradients taken at that point.
Its spread is summarized by two intrinsic-dimension estimators and by
gradient confusion (the most negative pairwise cosine).
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import nanonet as nn
from .errors import DegenerateInputError, DomainError
from .nanonet import Dataset, NetworkSpec, TrainRun, WeightSet

TWO_NN_TRIM = 0.10


@dataclass(frozen=True)
class IdEstimate:
    method: str
    value: float
    n_points: int
    dropped_duplicates: int = 0


@dataclass
class GradientEnsemble:
    gradients: np.ndarray  # (K, param_count)
    batch_size: int
    seed: int
    epoch: int | None = None

    def __post_init__(self):
        if self.gradients.ndim != 2:
            raise DomainError("gradients must be a (K, param_count) array")

    @property
    def K(self) -> int:
        return self.gradients.shape[0]


def _points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DomainError("points must be a 2-D array (n_points, dim)")
    return X


def two_nn_id(points, trim: float = TWO_NN_TRIM) -> IdEstimate:
    """TwoNN intrinsic dimension.

    With ``mu_i = r2_i / r1_i`` (second over first neighbour distance), the
    ratios are Pareto(d) distributed on [1, inf).  The largest ``trim``
    fraction is censored at the trim threshold ``mu_c`` and the maximum
    likelihood estimate is

        d = N_kept / (sum_kept ln mu_i + N_trimmed * ln mu_c)

    which stays unbiased under the trim.  Duplicate points are dropped first.
    """
    X = _points(points)
    uniq = np.unique(X, axis=0)
    dropped = len(X) - len(uniq)
    if len(uniq) <= 1:
        raise DegenerateInputError("all points are identical")
    if len(uniq) < 10:
        raise DomainError(f"two_nn_id needs at least 10 distinct points, got {len(uniq)}")
    dist, _ = cKDTree(uniq).query(uniq, k=3)
    mu = np.sort(dist[:, 2] / dist[:, 1])
    n = len(mu)
    n_keep = n - int(math.floor(trim * n))
    log_mu = np.log(mu)
    if np.median(log_mu) < 1e-12:
        # equally spaced (lattice) input: first and second neighbours tie
        raise DegenerateInputError("neighbour-distance ratios are 1 for most points (lattice-like input)")
    censor = log_mu[n_keep - 1] if n_keep < n else 0.0
    denom = log_mu[:n_keep].sum() + (n - n_keep) * censor
    if not denom > 0:
        raise DegenerateInputError("neighbour-distance ratios are all 1")
    return IdEstimate("two_nn", float(n_keep / denom), n, dropped)


def participation_ratio_id(points) -> IdEstimate:
    """(sum lambda)^2 / sum lambda^2 over centered covariance eigenvalues."""
    X = _points(points)
    if len(X) < 3:
        raise DomainError(f"participation_ratio_id needs at least 3 points, got {len(X)}")
    C = X - X.mean(axis=0)
    s2 = np.linalg.svd(C, compute_uv=False) ** 2
    total = s2.sum()
    if not total > 0:
        raise DegenerateInputError("points have zero variance")
    s2 = s2 / total
    return IdEstimate("participation_ratio", float(1.0 / np.sum(s2 * s2)), len(X))


def gradient_ensemble(weights: WeightSet, data: Dataset, batch_size: int, K: int, seed: int,
                      epoch: int | None = None) -> GradientEnsemble:
    """``K`` gradients on minibatches drawn without replacement.

    Minibatch ``k`` is drawn from ``np.random.default_rng([seed, k])`` so
    members can be produced in any order or in parallel.
    """
    n = len(data)
    if not 1 <= batch_size <= n:
        raise DomainError(f"batch_size must be in [1, {n}], got {batch_size}")
    if K < 3:
        raise DomainError(f"K must be at least 3, got {K}")
    grads = np.empty((K, weights.n_params))
    for k in range(K):
        if batch_size == n:
            idx = np.arange(n)
        else:
            idx = np.sort(np.random.default_rng([seed, k]).choice(n, batch_size, replace=False))
        grads[k] = nn.gradient(weights, data.subset(idx))
    return GradientEnsemble(grads, batch_size, seed, epoch)


def gradient_confusion(ens: GradientEnsemble | np.ndarray) -> float:
    """Minimum pairwise cosine similarity among the non-zero gradients."""
    G = ens.gradients if isinstance(ens, GradientEnsemble) else np.asarray(ens, dtype=np.float64)
    norms = np.linalg.norm(G, axis=1)
    live = norms > 0
    if live.sum() < 2:
        raise DegenerateInputError("need at least two non-zero gradients")
    U = G[live] / norms[live, None]
    cos = U @ U.T
    iu = np.triu_indices(len(U), k=1)
    return float(np.clip(cos[iu].min(), -1.0, 1.0))


def influence_ratio(spec: NetworkSpec) -> float:
    """Ordered upstream/downstream weight pairs divided by parameter count.

    Weight ``a`` is upstream of weight ``b`` when a forward path runs from
    the head of ``a`` to the tail of ``b``.  In dense layers this gives
    ``n_l * n_{l+1} * n_{l+2}`` pairs between adjacent weight layers
    (they must share the middle node) and ``|W_l| * |W_m|`` pairs for
    ``m >= l + 2``.  Biases are not counted as interacting weights.
    """
    return interaction_count(spec.layer_dims) / nn.param_count(spec)


def interaction_count(dims) -> int:
    sizes = [dims[i] * dims[i + 1] for i in range(len(dims) - 1)]
    total = 0
    for l in range(len(sizes)):
        if l + 1 < len(sizes):
            total += dims[l] * dims[l + 1] * dims[l + 2]
        total += sizes[l] * sum(sizes[l + 2:])
    return total


def interaction_count_bruteforce(dims) -> int:
    """Enumerate weight pairs and test reachability on the layer graph."""
    edges = []
    for l in range(len(dims) - 1):
        for i in range(dims[l]):
            for j in range(dims[l + 1]):
                edges.append(((l, i), (l + 1, j)))
    succ: dict = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)

    reach_cache: dict = {}

    def reach(node):
        if node not in reach_cache:
            seen = {node}
            stack = [node]
            while stack:
                for nxt in succ.get(stack.pop(), []):
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            reach_cache[node] = seen
        return reach_cache[node]

    return sum(1 for (a, b) in itertools.permutations(edges, 2) if b[0] in reach(a[1]))


@dataclass
class TendrilRow:
    epoch: int
    loss: float
    id_two_nn: float | None
    id_pr: float | None
    confusion: float | None
    notes: list = field(default_factory=list)


def tendril_profile(run: TrainRun, data: Dataset, batch_size: int, K: int, seed: int) -> list[TendrilRow]:
    """Intrinsic dimension and confusion of the gradient ensemble at every snapshot.

    Degenerate ensembles (e.g. all gradients equal) give ``None`` for the
    affected estimator plus a note; they do not abort the profile.
    """
    if len(run.snapshots) < 2:
        raise DomainError("tendril_profile needs at least two snapshots")
    rows = []
    for epoch, w in run.snapshots:
        ens = gradient_ensemble(w, data, batch_size, K, seed, epoch)
        row = TendrilRow(epoch, nn.mean_loss(w, data), None, None, None)
        for attr, fn in (("id_two_nn", lambda: two_nn_id(ens.gradients).value),
                         ("id_pr", lambda: participation_ratio_id(ens.gradients).value),
                         ("confusion", lambda: gradient_confusion(ens))):
            try:
                setattr(row, attr, fn())
            except DomainError as exc:
                row.notes.append(f"{attr}: {exc}")
        rows.append(row)
    return rows


def profile_csv(rows: list[TendrilRow]) -> str:
    buf = io.StringIO()
    buf.write("epoch,loss,id_two_nn,id_pr,confusion\n")
    for r in rows:
        vals = [r.epoch, r.loss, r.id_two_nn, r.id_pr, r.confusion]
        buf.write(",".join("" if v is None else (f"{v:.17g}" if isinstance(v, float) else str(v)) for v in vals))
        buf.write("\n")
    return buf.getvalue()


def width_for_budget(input_dim: int, depth: int, budget: int, **spec_kwargs) -> int:
    """Hidden width whose parameter count is closest to ``budget`` (ties to the smaller)."""
    best = min(range(1, 1025), key=lambda w: (abs(nn.param_count(NetworkSpec(input_dim, w, depth, **spec_kwargs)) - budget), w))
    return best
