"""Build library objects from a parsed configuration."""

from __future__ import annotations

import copy

from .. import data as D
from .. import histogram as H
from ..errors import DomainError
from ..nanonet import Dataset, NetworkSpec
from .config import parse_indices


def load_data(cfg: dict, with_noise: bool = True) -> Dataset:
    """Dataset named by ``[data]``; label noise is applied unless ``with_noise`` is false."""
    d = cfg["data"]
    seed = cfg["run"]["seed"]
    if d["source"] == "bundled":
        ds = D.load_bundled()
    elif d["source"] == "csv":
        if not d["path"] or not d["schema"]:
            raise DomainError("[data] source = csv needs both path and schema")
        try:
            schema_text = open(d["schema"]).read()
        except OSError as exc:
            raise OSError(f"cannot read schema {d['schema']}: {exc.strerror}") from exc
        try:
            ds = D.load_csv(d["path"], D.Schema.parse(schema_text))
        except FileNotFoundError as exc:
            raise OSError(f"cannot read {d['path']}: {exc.strerror}") from exc
    elif d["source"] == "synthetic":
        ds = D.synthetic(d["n"], d["dim"], 0.0, seed, d["rule"])
    else:
        raise DomainError(f"unknown [data] source {d['source']!r}")
    if with_noise and d["label_noise"] > 0:
        ds = Dataset(ds.X, D.apply_label_noise(ds.y, d["label_noise"], seed), ds.feature_names)
    return ds


def make_spec(cfg: dict, input_dim: int) -> NetworkSpec:
    n = cfg["network"]
    return NetworkSpec(input_dim, n["width"], n["depth"], n["activation"], n["init"], n["init_scale"])


def bin_policy(cfg: dict):
    h = cfg["histogram"]
    if h["bins"] == "fixed":
        return H.FixedBins(h["bin_width"], h["max_loss"])
    if h["bins"] == "min_anchored":
        return H.MinAnchoredBins(h["bin_count"])
    raise DomainError(f"unknown bin policy {h['bins']!r}")


def hist_config(cfg: dict, data: Dataset) -> H.HistogramConfig:
    spec = make_spec(cfg, data.X.shape[1])
    idx = parse_indices(cfg["histogram"]["samples"], len(data))
    return H.HistogramConfig(spec, idx, cfg["histogram"]["trials"], bin_policy(cfg), cfg["run"]["seed"])


def backend(cfg: dict) -> str | None:
    b = cfg["run"]["backend"]
    return None if b == "auto" else b


def with_overrides(cfg: dict, **sections) -> dict:
    """Deep copy of ``cfg`` with ``section={key: value}`` updates applied."""
    out = copy.deepcopy(cfg)
    for sec, updates in sections.items():
        out[sec].update(updates)
    return out
