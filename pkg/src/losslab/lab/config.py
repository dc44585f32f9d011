"""Flat ``key = value`` experiment configuration with ``[section]`` headers.

Example::

    [network]
    width = 6
    activation = "relu"      # strings may be quoted or bare

    [histogram]
    samples = 0:50           # index list: comma separated, a:b half-open ranges

Every key has a typed default (listed by :func:`describe_defaults`, which
the CLI prints in ``--help``).  Unknown sections and keys are rejected with
their line and column.  The parser is hand-written rather than
``configparser`` so that every error can carry a line number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError, DomainError


@dataclass(frozen=True)
class Key:
    type: type
    default: object
    help: str


DEFAULTS: dict[str, dict[str, Key]] = {
    "run": {
        "seed": Key(int, 0, "master seed"),
        "workers": Key(int, 1, "worker threads for Monte-Carlo and sweep cells"),
        "backend": Key(str, "auto", "kernel backend: auto, compiled or python"),
    },
    "data": {
        "source": Key(str, "bundled", "bundled, csv or synthetic"),
        "path": Key(str, "", "CSV file when source = csv"),
        "schema": Key(str, "", "schema file when source = csv"),
        "n": Key(int, 200, "synthetic sample count"),
        "dim": Key(int, 4, "synthetic feature count"),
        "rule": Key(str, "linear", "synthetic labelling rule: linear or xor"),
        "label_noise": Key(float, 0.0, "fraction of labels flipped once, before any split"),
        "test_fraction": Key(float, 0.25, "held-out fraction for sweeps"),
    },
    "network": {
        "width": Key(int, 3, "hidden width"),
        "depth": Key(int, 3, "hidden layer count"),
        "activation": Key(str, "relu", "relu or tanh"),
        "init": Key(str, "he_normal", "he_normal, he_uniform, xavier_normal, plain_normal, plain_uniform"),
        "init_scale": Key(float, 1.0, "scale for the plain_* schemes"),
    },
    "histogram": {
        "samples": Key(str, "0", "sample indices evaluated per trial"),
        "trials": Key(int, 100_000, "Monte-Carlo trials"),
        "bins": Key(str, "fixed", "fixed or min_anchored"),
        "bin_width": Key(float, 0.01, "fixed bin width"),
        "max_loss": Key(float, 20.0, "upper edge of the fixed bins"),
        "bin_count": Key(int, 100, "bin count for min_anchored"),
        "prominence": Key(float, 0.05, "mode prominence as a fraction of the tallest bin"),
        "noise_z": Key(float, 4.0, "Poisson z-score a mode must rise above its valley"),
        "tau": Key(float, 0.05, "zero-mode threshold"),
        "delta": Key(float, 0.1, "left-tail offset below ln 2"),
    },
    "tail": {
        "left_boundary": Key(float, math.log(2.0) - 0.1, "retain trials with loss below this"),
        "target": Key(int, 2000, "retained trial target"),
        "max_trials": Key(int, 2_000_000, "sampling budget"),
    },
    "train": {
        "samples": Key(str, "0:50", "training sample indices (bundled or csv data)"),
        "lr": Key(float, 0.1, "SGD learning rate"),
        "epochs": Key(int, 200, "epochs"),
        "batch_size": Key(int, 10, "minibatch size"),
        "snapshot_every": Key(int, 10, "snapshot cadence in epochs"),
    },
    "probe": {
        "batch_size": Key(int, 1, "minibatch size of the gradient ensemble"),
        "K": Key(int, 32, "ensemble size"),
    },
    "sweep": {
        "widths": Key(str, "1,2,4,8,16,32", "capacity sweep widths"),
        "sizes": Key(str, "10,20,40,80,160", "fidelity sweep training-set sizes"),
        "repeats": Key(int, 10, "fidelity sweep repeats"),
        "probe_cadence": Key(int, 10, "epoch sweep probe cadence"),
    },
    "sphere": {
        "radius": Key(float, 1.0, "radius"),
        "n_min": Key(int, 1, "first dimension of the curve"),
        "n_max": Key(int, 30, "last dimension of the curve"),
        "dimension": Key(int, 5, "dimension for distance and support queries"),
        "trials": Key(int, 100_000, "pairwise-distance trials"),
        "threshold": Key(float, 1e-10, "density threshold for the support query"),
    },
    "fit": {
        "family": Key(str, "lognormal", "lognormal, gamma or weibull"),
    },
}

# written into exported config echoes; accepted and ignored on load
META_KEYS = ("kind", "seed", "timestamp", "version", "tag")
IGNORED_SECTIONS = ("meta", "result")


def defaults() -> dict[str, dict]:
    return {sec: {k: spec.default for k, spec in keys.items()} for sec, keys in DEFAULTS.items()}


def describe_defaults() -> str:
    lines = []
    for sec, keys in DEFAULTS.items():
        lines.append(f"[{sec}]")
        for k, spec in keys.items():
            lines.append(f"  {k} = {format_value(spec.default)}  ({spec.help})")
    return "\n".join(lines)


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    return str(v)


def parse_value(text: str):
    """Typed scalar from its text form: quoted string, bool, int, float or bare string."""
    t = text.strip()
    if t.startswith('"'):
        return json.loads(t)
    if t in ("true", "false"):
        return t == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        return t


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def _coerce(raw, typ: type, line: int, col: int, key: str):
    if typ is float and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    if typ is str and not isinstance(raw, str):
        return format_value(raw).strip('"')
    if not isinstance(raw, typ) or (typ is int and isinstance(raw, bool)):
        raise ConfigError(f"key {key!r} expects {typ.__name__}, got {raw!r}", line, col)
    return raw


def parse_config(text: str) -> dict[str, dict]:
    """Defaults overlaid with the settings in ``text``."""
    cfg = defaults()
    section = None
    for lineno, full in enumerate(text.splitlines(), start=1):
        line = _strip_comment(full).rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError("unterminated section header", lineno, indent + 1)
            section = body[1:-1].strip()
            if section not in DEFAULTS and section not in IGNORED_SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno, indent + 2)
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", lineno, indent + 1)
        if section is None:
            raise ConfigError("key outside any [section]", lineno, indent + 1)
        key, _, value = body.partition("=")
        key = key.strip()
        value_col = line.index("=") + 2 + (len(value) - len(value.lstrip()))
        if section == "meta" and key not in META_KEYS:
            raise ConfigError(f"unknown key {key!r} in [meta]", lineno, indent + 1)
        if section in IGNORED_SECTIONS:
            continue
        if key not in DEFAULTS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, indent + 1)
        try:
            raw = parse_value(value)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad quoted string for {key!r}: {exc.msg}", lineno, value_col) from None
        if value.strip() == "":
            raise ConfigError(f"missing value for {key!r}", lineno, value_col)
        cfg[section][key] = _coerce(raw, DEFAULTS[section][key].type, lineno, value_col, key)
    return cfg


def load_config(path: str | Path | None) -> dict[str, dict]:
    """Parse ``path`` (``None`` gives the defaults).  Unreadable files raise ``OSError``."""
    if path is None:
        return defaults()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(exc.bare, exc.line, exc.column, str(path)) from None


def serialize(cfg: dict[str, dict], sections=None, meta: dict | None = None) -> str:
    """Text form that :func:`parse_config` reads back to an equal config."""
    parts = []
    if meta:
        parts.append("[meta]")
        parts.extend(f"{k} = {format_value(v)}" for k, v in meta.items())
        parts.append("")
    for sec in sections or cfg:
        parts.append(f"[{sec}]")
        parts.extend(f"{k} = {format_value(v)}" for k, v in cfg[sec].items())
        parts.append("")
    return "\n".join(parts)


def parse_indices(text: str, n: int | None = None) -> tuple[int, ...]:
    """``"0,3,5:8"`` -> (0, 3, 5, 6, 7).  Checked against ``n`` when given."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                lo, hi = part.split(":", 1)
                out.extend(range(int(lo), int(hi)))
            else:
                out.append(int(part))
        except ValueError:
            raise DomainError(f"bad index list {text!r}") from None
    if not out:
        raise DomainError(f"empty index list {text!r}")
    if n is not None and (min(out) < 0 or max(out) >= n):
        raise DomainError(f"index list {text!r} out of range for {n} rows")
    return tuple(out)


def parse_ints(text: str) -> list[int]:
    try:
        return [int(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise DomainError(f"bad integer list {text!r}") from None
