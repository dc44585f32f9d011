"""``losslab`` command-line front end.

Every command reads a configuration (defaults, then ``--config``, then
flags), runs, writes its records to the output directory and prints a
short summary.  Exit codes: 0 success, 1 domain or configuration error,
2 I/O error.  ``LOSSLAB_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import distfit as df
from . import histogram as H
from . import nanonet as nn
from . import probes as pb
from . import spherekit as sk
from .errors import ConfigError, DomainError, TrainingDiverged
from .lab import config as C
from .lab import factory, recipes, sweeps
from .lab.records import ExperimentRecord, export, import_record

OUT_ENV = "LOSSLAB_OUT"
DEFAULT_OUT = "losslab_out"

# flag -> (section, key); every flag is optional and overrides the config file
FLAGS = {
    "network": [("--width", "network", "width"), ("--depth", "network", "depth"),
                ("--activation", "network", "activation"), ("--init", "network", "init"),
                ("--init-scale", "network", "init_scale")],
    "hist": [("--samples", "histogram", "samples"), ("--trials", "histogram", "trials"),
             ("--bins", "histogram", "bins"), ("--bin-width", "histogram", "bin_width")],
    "tail": [("--left-boundary", "tail", "left_boundary"), ("--target", "tail", "target"),
             ("--max-trials", "tail", "max_trials")],
    "train": [("--train-samples", "train", "samples"), ("--lr", "train", "lr"), ("--epochs", "train", "epochs"),
              ("--batch-size", "train", "batch_size"), ("--snapshot-every", "train", "snapshot_every")],
    "probe": [("--probe-batch", "probe", "batch_size"), ("--K", "probe", "K")],
    "sphere": [("--radius", "sphere", "radius"), ("--n-min", "sphere", "n_min"), ("--n-max", "sphere", "n_max"),
               ("--dimension", "sphere", "dimension"), ("--sphere-trials", "sphere", "trials"),
               ("--threshold", "sphere", "threshold")],
    "data": [("--source", "data", "source"), ("--data-path", "data", "path"), ("--schema", "data", "schema"),
             ("--label-noise", "data", "label_noise"), ("--test-fraction", "data", "test_fraction"),
             ("--n", "data", "n")],
    "sweep": [("--widths", "sweep", "widths"), ("--sizes", "sweep", "sizes"), ("--repeats", "sweep", "repeats"),
              ("--probe-cadence", "sweep", "probe_cadence")],
    "fit": [("--family", "fit", "family")],
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1 (2 is reserved for I/O)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="key = value configuration file")
    p.add_argument("--seed", type=int, default=d, help="master seed (overrides [run] seed)")
    p.add_argument("--workers", type=int, default=d, help="worker threads")
    p.add_argument("--backend", choices=("auto", "compiled", "python"), default=d, help="kernel backend")
    p.add_argument("--out", default=d, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--format", choices=("csv", "svg", "both"), default=d, help="files to write")


def _leaf(sub, name, help_text, groups, func):
    p = sub.add_parser(name, help=help_text, description=help_text)
    _global_flags(p, suppress=True)
    for g in groups:
        for flag, sec, key in FLAGS[g]:
            p.add_argument(flag, dest=f"set__{sec}__{key}", type=C.DEFAULTS[sec][key].type, default=None,
                           metavar=key.upper(), help=f"[{sec}] {key}: {C.DEFAULTS[sec][key].help}")
    p.set_defaults(func=func)
    return p


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="losslab",
        description="Loss-manifold laboratory: sphere volumetrics, Monte-Carlo loss histograms, "
                    "training-path probes and double-descent sweeps.",
        epilog="configuration keys and defaults:\n" + C.describe_defaults(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _global_flags(p, suppress=False)
    top = p.add_subparsers(dest="command", required=True)

    sphere = top.add_parser("sphere", help="hypersphere volumetrics").add_subparsers(dest="sub", required=True)
    _leaf(sphere, "curve", "volume and surface by dimension", ["sphere"], cmd_sphere_curve)
    _leaf(sphere, "peak", "real and integer peak dimensions", ["sphere"], cmd_sphere_peak)
    _leaf(sphere, "distance", "Monte-Carlo mean pairwise distance in the ball", ["sphere"], cmd_sphere_distance)
    _leaf(sphere, "support", "volume where a Gaussian density exceeds a threshold", ["sphere"], cmd_sphere_support)

    hist = top.add_parser("hist", help="Monte-Carlo loss histograms").add_subparsers(dest="sub", required=True)
    _leaf(hist, "sample", "histogram of untrained-network losses", ["network", "hist", "data"], cmd_hist_sample)
    m = _leaf(hist, "modes", "mode table of a histogram", ["network", "hist", "data"], cmd_hist_modes)
    m.add_argument("--input", help="histogram CSV written by 'hist sample' (otherwise sampled)")
    _leaf(hist, "tail", "resample the left tail", ["network", "hist", "tail", "data"], cmd_hist_tail)
    c = _leaf(hist, "compare", "shift between two histograms", [], cmd_hist_compare)
    c.add_argument("a", help="first histogram CSV")
    c.add_argument("b", help="second histogram CSV")

    f = _leaf(top, "fit", "fit a left-bounded family to losses and KS-test it", ["fit", "network", "hist", "data"],
              cmd_fit)
    f.add_argument("--input", help="file of positive values, one per line or a 'loss' CSV column "
                                   "(otherwise the raw losses of a sampled histogram)")

    _leaf(top, "train", "seeded SGD run", ["network", "train", "data"], cmd_train)

    probe = top.add_parser("probe", help="training-path geometry").add_subparsers(dest="sub", required=True)
    _leaf(probe, "tendril", "intrinsic dimension of the gradient ensemble along a run",
          ["network", "train", "probe", "data"], cmd_probe_tendril)
    _leaf(probe, "confusion", "gradient confusion at initialization", ["network", "train", "probe", "data"],
          cmd_probe_confusion)
    _leaf(probe, "influence", "interaction count over parameter count", ["network", "data"], cmd_probe_influence)

    sweep = top.add_parser("sweep", help="double-descent sweeps").add_subparsers(dest="sub", required=True)
    for name, fn in (("capacity", cmd_sweep_capacity), ("epoch", cmd_sweep_epoch), ("fidelity", cmd_sweep_fidelity)):
        _leaf(sweep, name, f"{name} sweep", ["network", "train", "probe", "sweep", "data"], fn)

    r = _leaf(top, "recipe", "pinned histogram panel sets", ["hist", "data"], cmd_recipe)
    r.add_argument("name", choices=recipes.RECIPES)

    e = _leaf(top, "export", "re-export a saved record (e.g. to add its SVG)", [], cmd_export)
    e.add_argument("record", help="record CSV (its .cfg must sit next to it)")
    return p


# --------------------------------------------------------------------------- helpers

def resolve(args) -> tuple[dict, Path, str]:
    cfg = C.load_config(args.config)
    run = cfg["run"]
    for name in ("seed", "workers", "backend"):
        v = getattr(args, name, None)
        if v is not None:
            run[name] = v
    if run["seed"] < 0 or run["seed"] >= 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {run['seed']}")
    if run["workers"] < 1:
        raise ConfigError(f"workers must be positive, got {run['workers']}")
    for key, val in vars(args).items():
        if key.startswith("set__") and val is not None:
            _, sec, k = key.split("__")
            cfg[sec][k] = val
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    return cfg, out, args.format or "both"


def emit(records, out: Path, fmt: str, lines=()):
    for rec in records if isinstance(records, list) else [records]:
        for path in export(rec, out, fmt):
            print(f"wrote {path}")
    for line in lines:
        print(line)


def _hist_from_record(path) -> H.LossHistogram:
    rec = import_record(path)
    if not {"bin_left", "bin_right", "count"} <= set(rec.columns):
        raise DomainError(f"{path} is not a histogram table")
    lo = np.array(rec.column("bin_left"), dtype=float)
    edges = np.r_[lo, rec.column("bin_right")[-1]]
    counts = np.array(rec.column("count"), dtype=np.int64)
    r = rec.result
    n = int(r.get("n_trials", counts.sum()))
    nz = np.flatnonzero(counts)
    mn = r.get("min_loss") if r.get("min_loss") is not None else (float(edges[nz[0]]) if len(nz) else math.nan)
    mx = r.get("max_loss") if r.get("max_loss") is not None else (float(edges[nz[-1] + 1]) if len(nz) else math.nan)
    return H.LossHistogram(edges, counts, int(r.get("overflow_count", 0)), n, mn, mx, {})


def _kv_record(kind, cfg, pairs: dict, result=None, tag="") -> ExperimentRecord:
    return ExperimentRecord(kind, cfg, ("quantity", "value"), list(pairs.items()), cfg["run"]["seed"],
                            result or {}, tag)


def _train_data(cfg):
    data = factory.load_data(cfg)
    if cfg["data"]["source"] == "synthetic":
        return data
    return data.subset(C.parse_indices(cfg["train"]["samples"], len(data)))


def _train_run(cfg, data):
    spec = factory.make_spec(cfg, data.X.shape[1])
    t = cfg["train"]
    return spec, nn.train(spec, data, t["lr"], t["epochs"], t["batch_size"], cfg["run"]["seed"],
                          snapshot_every=t["snapshot_every"])


# --------------------------------------------------------------------------- commands

def cmd_sphere_curve(cfg, out, fmt, args):
    s = cfg["sphere"]
    table = sk.curve_table(range(s["n_min"], s["n_max"] + 1), s["radius"])
    rows = [(m.dimension, m.volume, m.surface) for m in table]
    rec = ExperimentRecord("sphere_curve", cfg, ("n", "volume", "surface"), rows, cfg["run"]["seed"])
    emit(rec, out, fmt)


def cmd_sphere_peak(cfg, out, fmt, args):
    r = cfg["sphere"]["radius"]
    pairs = {
        "volume_peak_dimension": sk.volume_peak_dimension(r),
        "surface_peak_dimension": sk.volume_peak_dimension(r, surface=True),
        "integer_volume_peak": sk.integer_peak_dimension(r),
        "integer_surface_peak": sk.integer_peak_dimension(r, surface=True),
    }
    emit(_kv_record("sphere_peak", cfg, pairs), out, fmt, [f"{k}={v}" for k, v in pairs.items()])


def cmd_sphere_distance(cfg, out, fmt, args):
    s = cfg["sphere"]
    mean, se = sk.expected_pairwise_distance(s["dimension"], s["radius"], s["trials"], cfg["run"]["seed"],
                                             cfg["run"]["workers"], factory.backend(cfg))
    rec = ExperimentRecord("sphere_distance", cfg, ("n", "radius", "mean", "stderr", "trials"),
                           [(s["dimension"], s["radius"], mean, se, s["trials"])], cfg["run"]["seed"])
    emit(rec, out, fmt, [f"mean={mean!r} stderr={se!r}"])


def cmd_sphere_support(cfg, out, fmt, args):
    s = cfg["sphere"]
    q = sk.SupportVolumeQuery(s["dimension"], 1.0, s["threshold"])
    pairs = {"support_radius": sk.support_radius(q), "support_volume": sk.gaussian_support_volume(q)}
    emit(_kv_record("sphere_support", cfg, pairs), out, fmt, [f"{k}={v!r}" for k, v in pairs.items()])


def _sample(cfg):
    data = factory.load_data(cfg)
    hc = factory.hist_config(cfg, data)
    return H.sample_histogram(hc, data, cfg["run"]["workers"], factory.backend(cfg))


def cmd_hist_sample(cfg, out, fmt, args):
    rec = recipes.histogram_record(_sample(cfg), cfg)
    emit(rec, out, fmt, recipes.summary_lines([rec]))


def cmd_hist_modes(cfg, out, fmt, args):
    hist = _hist_from_record(args.input) if args.input else _sample(cfg)
    h = cfg["histogram"]
    rep = H.detect_modes(hist, h["prominence"], h["tau"], h["delta"], h["noise_z"])
    result = {"central_mode_loss": rep.central_mode_loss, "zero_mode_mass": rep.zero_mode_mass,
              "left_tail_mass": rep.left_tail_mass, "central_reference": rep.central_reference}
    rec = ExperimentRecord("modes", cfg, ("center", "count", "prominence"), rep.modes, cfg["run"]["seed"], result)
    emit(rec, out, fmt, [f"modes at {', '.join(f'{c:.3f}' for c, _, _ in rep.modes)}"]
         + [f"{k}={v!r}" for k, v in result.items()])


def cmd_hist_tail(cfg, out, fmt, args):
    data = factory.load_data(cfg)
    res, rec = recipes.run_tail(cfg, data)
    emit(rec, out, fmt, [res.message])


def cmd_hist_compare(cfg, out, fmt, args):
    a, b = _hist_from_record(args.a), _hist_from_record(args.b)
    h = cfg["histogram"]
    rep = H.compare_histograms(a, b, h["tau"], h["delta"])
    pairs = {"zero_mode_delta": rep.zero_mode_delta, "left_tail_delta": rep.left_tail_delta,
             "wasserstein": rep.wasserstein}
    emit(_kv_record("compare", cfg, pairs), out, fmt, [f"{k}={v!r}" for k, v in pairs.items()])


def _read_values(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if lines and "," in lines[0]:
        header = lines[0].split(",")
        if "loss" not in header:
            raise DomainError(f"{path}: CSV input needs a 'loss' column")
        k = header.index("loss")
        lines = [ln.split(",")[k] for ln in lines[1:]]
    try:
        return np.array([float(v) for v in lines])
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None


def cmd_fit(cfg, out, fmt, args):
    x = _read_values(args.input) if args.input else _sample(cfg).losses
    fr = df.fit(cfg["fit"]["family"], x)
    result = {"family": fr.family, "log_likelihood": fr.log_likelihood, "converged": fr.converged,
              "iterations": fr.iterations, "n": len(x)}
    if fr.converged:
        g = df.ks_test(x, fr)
        result.update(ks_statistic=g.ks_statistic, p_value=g.p_value, note=g.note)
    rec = _kv_record("fit", cfg, fr.params, result)
    emit(rec, out, fmt, df.fit_report_text(fr).strip().split("\n") +
         ([f"ks_statistic={result['ks_statistic']!r}", f"p_value={result['p_value']!r}"] if fr.converged else
          ["fit did not converge"]))


def cmd_train(cfg, out, fmt, args):
    data = _train_data(cfg)
    _, run = _train_run(cfg, data)
    rows = [(0, run.initial_loss)] + [(e + 1, v) for e, v in enumerate(run.epoch_losses)]
    result = {"initial_loss": run.initial_loss, "final_loss": run.epoch_losses[-1], "best_loss": run.best_loss}
    rec = ExperimentRecord("train", cfg, ("epoch", "loss"), rows, cfg["run"]["seed"], result)
    emit(rec, out, fmt, [f"{k}={v!r}" for k, v in result.items()])


def cmd_probe_tendril(cfg, out, fmt, args):
    data = _train_data(cfg)
    _, run = _train_run(cfg, data)
    p = cfg["probe"]
    rows = pb.tendril_profile(run, data, p["batch_size"], p["K"], cfg["run"]["seed"])
    table = [(r.epoch, r.loss, r.id_two_nn, r.id_pr, r.confusion) for r in rows]
    notes = [f"epoch {r.epoch}: {'; '.join(r.notes)}" for r in rows if r.notes]
    rec = ExperimentRecord("tendril", cfg, ("epoch", "loss", "id_two_nn", "id_pr", "confusion"), table,
                           cfg["run"]["seed"], {"degenerate_epochs": len(notes)})
    emit(rec, out, fmt, notes)


def cmd_probe_confusion(cfg, out, fmt, args):
    data = _train_data(cfg)
    spec = factory.make_spec(cfg, data.X.shape[1])
    w = nn.init_weights(spec, cfg["run"]["seed"])
    p = cfg["probe"]
    ens = pb.gradient_ensemble(w, data, p["batch_size"], p["K"], cfg["run"]["seed"])
    norms = np.linalg.norm(ens.gradients, axis=1)
    conf = pb.gradient_confusion(ens)
    rec = ExperimentRecord("confusion", cfg, ("member", "grad_norm"), list(enumerate(norms)), cfg["run"]["seed"],
                           {"confusion": conf, "param_count": w.n_params})
    emit(rec, out, fmt, [f"confusion={conf!r}"])


def cmd_probe_influence(cfg, out, fmt, args):
    data = factory.load_data(cfg)
    spec = factory.make_spec(cfg, data.X.shape[1])
    pairs = {"param_count": nn.param_count(spec), "interactions": pb.interaction_count(spec.layer_dims),
             "influence_ratio": pb.influence_ratio(spec)}
    emit(_kv_record("influence", cfg, pairs), out, fmt, [f"{k}={v!r}" for k, v in pairs.items()])


def _point_rows(points, lead=None):
    return [((p.detail[lead],) if lead else ()) + (p.value, p.train_loss, p.test_loss, p.train_error,
                                                   p.test_error, p.failed) for p in points]


def cmd_sweep_capacity(cfg, out, fmt, args):
    data = factory.load_data(cfg, with_noise=False)
    n, t, d = cfg["network"], cfg["train"], cfg["data"]
    pts = sweeps.run_capacity_sweep(C.parse_ints(cfg["sweep"]["widths"]), n["depth"], data, d["label_noise"],
                                    d["test_fraction"], t["epochs"], t["lr"], cfg["run"]["seed"], t["batch_size"],
                                    n["activation"], n["init"], n["init_scale"], cfg["run"]["workers"])
    cols = ("width", "param_count", "train_loss", "test_loss", "train_error", "test_error", "failed")
    rec = ExperimentRecord("capacity_sweep", cfg, cols, _point_rows(pts, "width"), cfg["run"]["seed"])
    emit(rec, out, fmt)


def cmd_sweep_epoch(cfg, out, fmt, args):
    data = factory.load_data(cfg, with_noise=False)
    t, d, p = cfg["train"], cfg["data"], cfg["probe"]
    spec = factory.make_spec(cfg, data.X.shape[1])
    rows = sweeps.run_epoch_sweep(spec, data, d["label_noise"], d["test_fraction"], t["epochs"], t["lr"],
                                  cfg["run"]["seed"], cfg["sweep"]["probe_cadence"], t["batch_size"],
                                  p["batch_size"], p["K"])
    cols = ("epoch", "train_loss", "test_loss", "train_error", "test_error", "confusion", "id_two_nn", "id_pr")
    table = [tuple(getattr(r, c) for c in cols) for r in rows]
    emit(ExperimentRecord("epoch_sweep", cfg, cols, table, cfg["run"]["seed"]), out, fmt)


def cmd_sweep_fidelity(cfg, out, fmt, args):
    data = factory.load_data(cfg, with_noise=False)
    t, d = cfg["train"], cfg["data"]
    spec = factory.make_spec(cfg, data.X.shape[1])
    pts = sweeps.run_fidelity_sweep(spec, data, C.parse_ints(cfg["sweep"]["sizes"]), d["label_noise"],
                                    d["test_fraction"], t["epochs"], t["lr"], cfg["run"]["seed"],
                                    cfg["sweep"]["repeats"], t["batch_size"], cfg["run"]["workers"])
    cols = ("train_size", "train_loss", "test_loss", "train_error", "test_error", "failed")
    rec = ExperimentRecord("fidelity_sweep", cfg, cols, _point_rows(pts), cfg["run"]["seed"])
    emit(rec, out, fmt)


def cmd_recipe(cfg, out, fmt, args):
    recs = recipes.run_recipe(args.name, cfg)
    emit(recs, out, fmt, recipes.summary_lines(recs))


def cmd_export(cfg, out, fmt, args):
    emit(import_record(args.record), out, fmt)


# --------------------------------------------------------------------------- entry point

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, out, fmt = resolve(args)
        args.func(cfg, out, fmt, args)
    except OSError as exc:
        print(f"losslab: I/O error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, TrainingDiverged) as exc:
        print(f"losslab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
