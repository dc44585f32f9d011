"""Experiment records and their on-disk form.

A record exports to three files sharing the stem ``<kind>[_<tag>]_seed<seed>``:

* ``.csv``  results table (header + one line per row)
* ``.cfg``  ``[meta]`` and ``[result]`` sections plus the configuration
  echo, readable by :func:`losslab.lab.config.load_config` so the
  experiment can be re-run from it
* ``.svg``  a bar chart for histogram-like tables, a line chart otherwise
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from . import svg
from .config import format_value, parse_value

KINDS = (
    "histogram", "capacity_sweep", "epoch_sweep", "fidelity_sweep", "sphere_curve", "tendril",
    # single-shot outputs of the other subcommands
    "tail", "modes", "compare", "fit", "train", "confusion", "influence",
    "sphere_peak", "sphere_distance", "sphere_support",
)
BAR_KINDS = ("histogram", "tail")


def _scalar(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def now_stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class ExperimentRecord:
    kind: str
    config: dict  # section -> {key: value}
    columns: tuple
    rows: list
    seed: int
    result: dict = field(default_factory=dict)  # scalar summaries (mode report etc.)
    tag: str = ""
    timestamp: str = field(default_factory=now_stamp)
    version: str = __version__

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")
        self.columns = tuple(self.columns)
        self.rows = [tuple(_scalar(v) for v in row) for row in self.rows]
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row {row!r} does not match columns {self.columns!r}")
        self.result = {k: _scalar(v) for k, v in self.result.items()}
        self.seed = int(self.seed)

    @property
    def stem(self) -> str:
        return f"{self.kind}_{self.tag}_seed{self.seed}" if self.tag else f"{self.kind}_seed{self.seed}"

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    # text forms -----------------------------------------------------------

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def echo_text(self) -> str:
        lines = ["[meta]"]
        meta = dict(kind=self.kind, seed=self.seed, timestamp=self.timestamp, version=self.version)
        if self.tag:
            meta["tag"] = self.tag
        lines += [f"{k} = {format_value(v)}" for k, v in meta.items()]
        lines.append("")
        if self.result:
            lines.append("[result]")
            lines += [f"{k} = {_echo_value(v)}" for k, v in self.result.items()]
            lines.append("")
        for sec, keys in self.config.items():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {format_value(v)}" for k, v in keys.items()]
            lines.append("")
        return "\n".join(lines)

    def svg_text(self) -> str:
        title = f"{self.kind} {self.tag} (seed {self.seed})".replace("  ", " ")
        if self.kind in BAR_KINDS and {"bin_left", "bin_right", "count"} <= set(self.columns):
            lo, hi, c = self.column("bin_left"), self.column("bin_right"), self.column("count")
            nz = [i for i, v in enumerate(c) if v]
            if nz:
                a, b = max(nz[0] - 2, 0), min(nz[-1] + 3, len(c))
                lo, hi, c = lo[a:b], hi[a:b], c[a:b]
            return svg.bar_chart(lo, hi, c, title)
        xname = self.columns[0]
        series = {}
        for name in self.columns[1:]:
            vals = self.column(name)
            if all(v is None or (isinstance(v, (int, float)) and not isinstance(v, bool)) for v in vals) \
                    and any(v is not None for v in vals):
                series[name] = vals
        x = self.column(xname) if self.rows and all(isinstance(v, (int, float)) for v in self.column(xname)) \
            else list(range(len(self.rows)))
        return svg.line_chart(x, series, title, xname)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _echo_value(v) -> str:
    return "nan" if v is None else format_value(v)


def _read_cell(text: str):
    return None if text == "" else parse_value(text)


def _read_sections(text: str) -> dict:
    out: dict = {}
    sec = None
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1]
            out[sec] = {}
            continue
        key, _, value = s.partition("=")
        v = value.strip()
        out[sec][key.strip()] = None if (sec == "result" and v == "nan") else parse_value(v)
    return out


def export(record: ExperimentRecord, directory: str | Path, fmt: str = "both") -> list[Path]:
    """Write ``.csv`` and ``.cfg`` always, ``.svg`` unless ``fmt == "csv"``.

    ``fmt == "svg"`` still writes the CSV and echo, since they are what makes
    the record re-importable.  Failures raise ``OSError`` naming the path.
    """
    if fmt not in ("csv", "svg", "both"):
        raise ValueError(f"format must be csv, svg or both, got {fmt!r}")
    d = Path(directory)
    files = [(d / f"{record.stem}.csv", record.csv_text()), (d / f"{record.stem}.cfg", record.echo_text())]
    if fmt != "csv":
        files.append((d / f"{record.stem}.svg", record.svg_text()))
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {d}: {exc.strerror}") from exc
    written = []
    for path, text in files:
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        written.append(path)
    return written


def import_record(csv_path: str | Path) -> ExperimentRecord:
    """Rebuild a record from its ``.csv`` and the sibling ``.cfg``."""
    csv_path = Path(csv_path)
    cfg_path = csv_path.with_suffix(".cfg")
    try:
        table = csv_path.read_text()
        echo = cfg_path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {exc.filename}: {exc.strerror}") from exc
    reader = csv.reader(io.StringIO(table))
    columns = tuple(next(reader))
    rows = [tuple(_read_cell(c) for c in r) for r in reader]
    sections = _read_sections(echo)
    meta = sections.pop("meta")
    result = sections.pop("result", {})
    return ExperimentRecord(
        kind=meta["kind"], config=sections, columns=columns, rows=rows, seed=meta["seed"],
        result=result, tag=str(meta.get("tag", "")), timestamp=meta["timestamp"], version=meta["version"],
    )
