"""Tabular ingestion: schema-driven CSV loading, encoding and synthetic sets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .nanonet import Dataset

BUNDLED_CSV = "titanic_sample.csv"
BUNDLED_SCHEMA = "titanic_sample.schema"


@dataclass(frozen=True)
class Schema:
    label: str
    numeric: tuple = ()
    categoric: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "Schema":
        """Parse ``key = value`` lines (label, numeric, categoric); lists are comma separated."""
        vals: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"expected key = value, got {line!r}", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in ("label", "numeric", "categoric"):
                raise ConfigError(f"unknown schema key {key!r}", lineno)
            vals[key] = value
        if "label" not in vals:
            raise ConfigError("schema is missing required key 'label'")

        def split(v):
            return tuple(s.strip() for s in v.split(",") if s.strip())

        return cls(vals["label"], split(vals.get("numeric", "")), split(vals.get("categoric", "")))


@dataclass
class Encoder:
    """z-scores numeric columns and one-hot encodes categoric ones.

    Statistics and category lists come from the rows passed to :meth:`fit`.
    Categories are sorted so the column order does not depend on row order.
    """

    schema: Schema
    means: dict = field(default_factory=dict)
    stds: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)

    def fit(self, rows: list[dict]) -> "Encoder":
        for col in self.schema.numeric:
            vals = np.array([_to_float(r[col], col) for r in rows])
            self.means[col] = float(vals.mean())
            sd = float(vals.std())
            self.stds[col] = sd if sd > 0 else 1.0
        for col in self.schema.categoric:
            self.categories[col] = sorted({r[col] for r in rows})
        return self

    @property
    def feature_names(self) -> tuple:
        names = list(self.schema.numeric)
        for col in self.schema.categoric:
            names += [f"{col}={c}" for c in self.categories[col]]
        return tuple(names)

    def transform(self, rows: list[dict]) -> Dataset:
        X = np.empty((len(rows), len(self.feature_names)))
        y = np.empty(len(rows))
        for i, r in enumerate(rows):
            feats = [(_to_float(r[c], c) - self.means[c]) / self.stds[c] for c in self.schema.numeric]
            for col in self.schema.categoric:
                feats += [1.0 if r[col] == c else 0.0 for c in self.categories[col]]
            X[i] = feats
            lab = r[self.schema.label].strip()
            if lab not in ("0", "1"):
                raise DomainError(f"label must be 0 or 1, got {lab!r} in row {i + 1}")
            y[i] = float(lab)
        return Dataset(X, y, self.feature_names)


def _to_float(v: str, col: str) -> float:
    try:
        x = float(v)
    except ValueError:
        raise DomainError(f"column {col!r}: {v!r} is not numeric") from None
    if not math.isfinite(x):
        raise DomainError(f"column {col!r}: non-finite value {v!r}")
    return x


def read_rows(path: str | Path, schema: Schema) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = (schema.label, *schema.numeric, *schema.categoric)
        missing = [c for c in needed if c not in (reader.fieldnames or [])]
        if missing:
            raise DomainError(f"{path}: missing columns {missing}")
        return list(reader)


def load_csv(path: str | Path, schema: Schema, fit_rows: slice | None = None) -> Dataset:
    """Load and encode a CSV; encoding statistics come from ``rows[fit_rows]`` (default all)."""
    rows = read_rows(path, schema)
    if not rows:
        raise DomainError(f"{path}: no data rows")
    enc = Encoder(schema).fit(rows[fit_rows] if fit_rows is not None else rows)
    return enc.transform(rows)


def bundled_paths() -> tuple[Path, Path]:
    base = resources.files("losslab") / "data"
    return Path(str(base / BUNDLED_CSV)), Path(str(base / BUNDLED_SCHEMA))


def load_bundled() -> Dataset:
    """The bundled 3-feature sample (1 numeric, 2 categoric, binary label)."""
    csv_path, schema_path = bundled_paths()
    return load_csv(csv_path, Schema.parse(schema_path.read_text()))


def synthetic(
    n: int,
    dim: int = 4,
    label_noise: float = 0.0,
    seed: int = 0,
    rule: str = "linear",
) -> Dataset:
    """Gaussian features with a planted labelling rule and seeded label flips.

    ``rule="linear"`` labels by the sign of a fixed random hyperplane (so the
    noise-free set is linearly separable); ``rule="xor"`` uses the sign of the
    product of the first two coordinates.
    """
    if n < 1 or dim < 1:
        raise DomainError("n and dim must be positive")
    if not 0.0 <= label_noise <= 1.0:
        raise DomainError(f"label_noise must be in [0, 1], got {label_noise}")
    g = np.random.default_rng(seed)
    X = g.standard_normal((n, dim))
    if rule == "linear":
        w = g.standard_normal(dim)
        y = (X @ w > 0).astype(np.float64)
    elif rule == "xor":
        if dim < 2:
            raise DomainError("xor rule needs dim >= 2")
        y = (X[:, 0] * X[:, 1] > 0).astype(np.float64)
    else:
        raise DomainError(f"unknown rule {rule!r}")
    y = apply_label_noise(y, label_noise, seed)
    return Dataset(X, y, tuple(f"x{i}" for i in range(dim)))


def apply_label_noise(y: np.ndarray, rate: float, seed: int) -> np.ndarray:
    """Flip exactly ``round(rate * n)`` labels chosen by a seeded permutation."""
    y = y.copy()
    k = int(round(rate * len(y)))
    if k:
        idx = np.random.default_rng([seed, 0x5EED]).permutation(len(y))[:k]
        y[idx] = 1.0 - y[idx]
    return y
