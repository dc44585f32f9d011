"""Pinned panel configurations for the histogram recipe sets.

Each recipe evaluates a ladder of histogram panels on the bundled data and
returns one record per panel, carrying the histogram table and its mode
report.  Each panel record's config echo is a complete configuration, so
``losslab --config <panel>.cfg hist sample`` (or ``hist tail``) re-runs the
panel on its own.

Initialization choices were pinned by measurement on the bundled data:

* He-normal keeps the pre-activation variance constant, which cancels the
  width effect, so the width/depth ladders and tail close-ups use
  ``plain_normal(0.5)``.  With that scheme both ladder directions hold on
  every one of the first ten bundled samples.
* ``relu_vs_tanh`` uses ``plain_uniform(1.0)`` at width 9, where ReLU
  shows a separate zero mode next to the ln 2 mode.
* ``sample_aggregation`` keeps the central-mode (He-normal, width 3,
  depth 3) configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import histogram as H
from .. import nanonet as nn
from .. import probes as pb
from . import factory
from .records import ExperimentRecord

LN2 = math.log(2.0)
TAIL_BUDGET = 253  # parameters; width 6 at depth 3 with 6 inputs
TAIL_DEPTHS = ((2, 3, 4, 5, 6), (8, 9, 10, 11, 12))


@dataclass(frozen=True)
class Panel:
    tag: str
    network: dict
    samples: str = "0"
    tail: bool = False


def _net(width, depth, activation="relu", init="plain_normal", scale=0.5):
    return dict(width=width, depth=depth, activation=activation, init=init, init_scale=scale)


def _tail_panels(depths, input_dim):
    out = []
    for d in depths:
        w = pb.width_for_budget(input_dim, d, TAIL_BUDGET, init_scheme="plain_normal", init_scale=0.5)
        out.append(Panel(f"depth{d}", _net(w, d), tail=True))
    return out


def panels(name: str, input_dim: int = 6) -> list[Panel]:
    if name == "relu_vs_tanh":
        return [Panel(a, _net(9, 3, a, "plain_uniform", 1.0)) for a in ("relu", "tanh")]
    if name == "width_transition":
        return [Panel(f"width{w}", _net(w, 3)) for w in (6, 9, 12)]
    if name == "depth_transition":
        return [Panel(f"depth{d}", _net(6, d)) for d in (3, 6, 9)]
    if name == "tail_closeup":
        return _tail_panels(TAIL_DEPTHS[0] + TAIL_DEPTHS[1], input_dim)
    if name == "init_scaling":
        return [Panel(f"scale{s:g}", _net(6, 3, "relu", "plain_uniform", s)) for s in (0.5, 1.0, 2.0)]
    if name == "sample_aggregation":
        return [Panel(f"samples{k}", _net(3, 3, "relu", "he_normal", 1.0), samples=f"0:{k}") for k in (1, 2, 3, 50)]
    raise KeyError(name)


RECIPES = ("relu_vs_tanh", "width_transition", "depth_transition", "tail_closeup", "init_scaling",
           "sample_aggregation")


def mode_summary(hist: H.LossHistogram, cfg: dict) -> dict:
    h = cfg["histogram"]
    rep = H.detect_modes(hist, h["prominence"], h["tau"], h["delta"], h["noise_z"])
    return {
        "n_trials": hist.n_trials,
        "overflow_count": hist.overflow_count,
        "min_loss": hist.min_loss,
        "max_loss": hist.max_loss,
        "n_modes": len(rep.modes),
        "modes": ";".join(f"{c:.3f}" for c, _, _ in rep.modes),
        "central_mode_loss": rep.central_mode_loss,
        "zero_mode_mass": rep.zero_mode_mass,
        "left_tail_mass": rep.left_tail_mass,
    }


def histogram_record(hist: H.LossHistogram, cfg: dict, tag: str = "", kind: str = "histogram",
                     extra: dict | None = None) -> ExperimentRecord:
    rows = [(float(lo), float(hi), int(c)) for lo, hi, c in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts)]
    result = {"backend": hist.config.get("backend", "")}
    if hist.counts.sum() > 0:
        result.update(mode_summary(hist, cfg))
    else:
        result.update(n_trials=hist.n_trials, overflow_count=hist.overflow_count)
    result.update(extra or {})
    return ExperimentRecord(kind, cfg, ("bin_left", "bin_right", "count"), rows, cfg["run"]["seed"], result, tag)


def run_tail(cfg: dict, data) -> tuple[H.TailResult, ExperimentRecord]:
    hc = factory.hist_config(cfg, data)
    t = cfg["tail"]
    res = H.tail_resample(hc, data, t["left_boundary"], t["target"], t["max_trials"], cfg["run"]["workers"],
                          backend=factory.backend(cfg))
    tau = cfg["histogram"]["tau"]
    tail = res.histogram.losses if res.histogram.losses is not None else np.empty(0)
    extra = {
        "retained": res.retained,
        "trials_used": res.trials_used,
        "acceptance_rate": res.acceptance_rate,
        "reachable": res.reachable,
        "message": res.message,
        "tail_zero_share": float(np.mean(tail < tau)) if len(tail) else None,
    }
    return res, histogram_record(res.histogram, cfg, kind="tail", extra=extra)


def run_recipe(name: str, cfg: dict, data=None) -> list[ExperimentRecord]:
    """Evaluate every panel of recipe ``name``; ``cfg`` supplies seed, trials, bins and thresholds."""
    data = data if data is not None else factory.load_data(cfg)
    out = []
    for p in panels(name, data.X.shape[1]):
        pcfg = factory.with_overrides(cfg, network=p.network, histogram={"samples": p.samples})
        if p.tail:
            _, rec = run_tail(pcfg, data)
        else:
            hist = H.sample_histogram(factory.hist_config(pcfg, data), data, pcfg["run"]["workers"],
                                      factory.backend(pcfg))
            rec = histogram_record(hist, pcfg)
        rec.tag = f"{name}_{p.tag}"
        rec.result["recipe"] = name
        out.append(rec)
    return out


def summary_lines(records: list[ExperimentRecord]) -> list[str]:
    lines = []
    for r in records:
        keys = ("n_modes", "modes", "zero_mode_mass", "left_tail_mass", "tail_zero_share", "trials_used")
        parts = [f"{k}={r.result[k]}" for k in keys if k in r.result and r.result[k] is not None]
        lines.append(f"{r.tag or r.kind}: " + " ".join(parts))
    return lines
