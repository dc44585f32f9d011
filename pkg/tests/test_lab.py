import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from losslab import data as D
from losslab import histogram as H
from losslab import nanonet as nn
from losslab import rng
from losslab.errors import ConfigError, DomainError
from losslab.lab import config as C
from losslab.lab import factory, recipes, sweeps
from losslab.lab.records import ExperimentRecord, export, import_record


class TestConfig:
    def test_empty_is_defaults(self):
        assert C.parse_config("") == C.defaults()

    def test_round_trip_defaults(self):
        cfg = C.defaults()
        assert C.parse_config(C.serialize(cfg)) == cfg

    def test_round_trip_edited(self):
        cfg = C.defaults()
        cfg["network"]["activation"] = "tanh"
        cfg["histogram"]["samples"] = "0"
        cfg["tail"]["left_boundary"] = 0.1 + 0.2
        cfg["data"]["path"] = 'odd "name" # here.csv'
        assert C.parse_config(C.serialize(cfg)) == cfg

    def test_overrides_and_comments(self):
        cfg = C.parse_config("# top\n[network]\nwidth = 9  # wider\nactivation = tanh\n\n[run]\nseed=7\n")
        assert cfg["network"]["width"] == 9
        assert cfg["network"]["activation"] == "tanh"
        assert cfg["run"]["seed"] == 7

    def test_int_promoted_to_float(self):
        assert C.parse_config("[train]\nlr = 1\n")["train"]["lr"] == 1.0

    def test_typo_names_key_and_line(self):
        with pytest.raises(ConfigError) as ei:
            C.parse_config("[network]\nwidth = 3\n  widht = 4\n")
        assert "widht" in str(ei.value)
        assert ei.value.line == 3 and ei.value.column == 3

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="line 1"):
            C.parse_config("[netwrk]\n")

    @pytest.mark.parametrize("text,line", [
        ("[network]\nwidth 3\n", 2),
        ("width = 3\n", 1),
        ("[network]\nwidth = 3.5\n", 2),
        ("[network]\nwidth =\n", 2),
        ("[network\n", 1),
        ('[data]\npath = "unterminated\n', 2),
    ])
    def test_parse_errors(self, text, line):
        with pytest.raises(ConfigError) as ei:
            C.parse_config(text)
        assert ei.value.line == line

    def test_type_error_column(self):
        with pytest.raises(ConfigError) as ei:
            C.parse_config("[network]\nwidth = abc\n")
        assert ei.value.column == 9

    def test_meta_and_result_ignored(self):
        cfg = C.parse_config('[meta]\nkind = "histogram"\n[result]\nanything = 3\n')
        assert cfg == C.defaults()

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(OSError, match="nope.cfg"):
            C.load_config(tmp_path / "nope.cfg")

    def test_load_error_carries_path(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[run]\nsede = 1\n")
        with pytest.raises(ConfigError, match="bad.cfg: line 2"):
            C.load_config(p)

    def test_describe_lists_every_key(self):
        text = C.describe_defaults()
        for sec, keys in C.DEFAULTS.items():
            assert f"[{sec}]" in text
            for k in keys:
                assert f"  {k} = " in text

    def test_indices(self):
        assert C.parse_indices("0,3,5:8") == (0, 3, 5, 6, 7)
        with pytest.raises(DomainError):
            C.parse_indices("0:300", n=200)
        with pytest.raises(DomainError):
            C.parse_indices("a")


def make_record(**kw):
    base = dict(kind="capacity_sweep", config=C.defaults(), columns=("width", "loss", "err", "failed", "note"),
                rows=[(1, 0.1 + 0.2, 0.5, False, "ok"), (2, np.float64(1e-300), None, True, "x y")],
                seed=7, result={"best": 0.25, "label": "0.5", "n": np.int64(3)})
    base.update(kw)
    return ExperimentRecord(**base)


class TestRecords:
    def test_round_trip(self, tmp_path):
        rec = make_record()
        paths = export(rec, tmp_path)
        assert [p.name for p in paths] == ["capacity_sweep_seed7.csv", "capacity_sweep_seed7.cfg",
                                           "capacity_sweep_seed7.svg"]
        assert import_record(paths[0]) == rec

    def test_tagged_round_trip(self, tmp_path):
        rec = make_record(kind="histogram", tag="width6", columns=("bin_left", "bin_right", "count"),
                          rows=[(0.0, 0.01, 3), (0.01, 0.02, 0)], result={})
        paths = export(rec, tmp_path)
        assert paths[0].name == "histogram_width6_seed7.csv"
        assert import_record(paths[0]) == rec

    def test_csv_rows(self, tmp_path):
        rec = make_record()
        text = export(rec, tmp_path, "csv")[0].read_text()
        assert len(text.strip().split("\n")) == len(rec.rows) + 1

    def test_deterministic_bytes(self, tmp_path):
        rec = make_record()
        a = [p.read_bytes() for p in export(rec, tmp_path / "a")]
        b = [p.read_bytes() for p in export(rec, tmp_path / "b")]
        assert a == b

    @pytest.mark.parametrize("kind,cols,rows", [
        ("histogram", ("bin_left", "bin_right", "count"), [(0.0, 0.01, 3), (0.01, 0.02, 0), (0.02, 0.03, 9)]),
        ("epoch_sweep", ("epoch", "a", "b"), [(1, 0.3, None), (2, 0.2, 0.5), (3, float("nan"), 0.4)]),
        ("fit", ("quantity", "value"), [("mu", 0.1), ("sigma", 2.0)]),
    ])
    def test_svg_parses(self, tmp_path, kind, cols, rows):
        rec = ExperimentRecord(kind, {}, cols, rows, 0)
        svg = export(rec, tmp_path)[2]
        root = ET.parse(svg).getroot()
        assert root.tag.endswith("svg")

    def test_echo_is_loadable_config(self, tmp_path):
        cfg = C.defaults()
        cfg["network"]["width"] = 11
        rec = make_record(config=cfg)
        echo = export(rec, tmp_path, "csv")[1]
        assert C.load_config(echo) == cfg

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match=str(blocker)):
            export(make_record(), blocker / "sub")

    def test_bad_kind_and_shape(self):
        with pytest.raises(ValueError):
            make_record(kind="nope")
        with pytest.raises(ValueError):
            make_record(rows=[(1, 2)])


class TestSweeps:
    def test_split_partitions(self):
        d = D.synthetic(40, seed=1)
        tr, te = sweeps.split(d, 0.25, 3)
        assert len(tr) == 30 and len(te) == 10
        rows = {tuple(r) for r in np.r_[tr.X, te.X]}
        assert len(rows) == 40

    def test_split_needs_test_rows(self):
        with pytest.raises(DomainError):
            sweeps.split(D.synthetic(3), 0.9, 0)

    def test_capacity_monotone_with_noise(self):
        d = D.synthetic(200, 4, 0.0, 0)
        pts = sweeps.run_capacity_sweep([1, 32], 1, d, 0.1, 0.25, 300, 0.1, seed=0)
        assert len(pts) == 2
        assert pts[1].train_error <= pts[0].train_error

    def test_separable_fits_exactly(self):
        d = D.synthetic(200, 4, 0.0, 0)
        pts = sweeps.run_capacity_sweep([1, 32], 1, d, 0.0, 0.25, 300, 0.1, seed=0)
        assert pts[1].train_error == 0.0

    def test_capacity_worker_invariance(self):
        d = D.synthetic(60, 3, 0.0, 2)
        a = sweeps.run_capacity_sweep([1, 2, 4], 1, d, 0.1, 0.25, 20, 0.1, seed=1)
        b = sweeps.run_capacity_sweep([1, 2, 4], 1, d, 0.1, 0.25, 20, 0.1, seed=1, workers=3)
        assert a == b

    def test_capacity_needs_two_widths(self):
        with pytest.raises(DomainError):
            sweeps.run_capacity_sweep([4], 1, D.synthetic(20), 0, 0.25, 2, 0.1, 0)

    def test_capacity_failure_flag(self, monkeypatch):
        def boom(*a, **k):
            raise sweeps.TrainingDiverged("boom", 1)
        monkeypatch.setattr(sweeps.nn, "train", boom)
        pts = sweeps.run_capacity_sweep([1, 2], 1, D.synthetic(20), 0, 0.25, 2, 0.1, 0)
        assert all(p.failed for p in pts)

    def test_epoch_lr_zero_flat(self):
        d = D.synthetic(30, 3, 0.0, 0)
        rows = sweeps.run_epoch_sweep(nn.NetworkSpec(3, 4, 1, "tanh", "xavier_normal"), d, 0.0, 0.25, 6, 0.0, 0, 3,
                                      batch_size=5, probe_batch=2, K=12)
        assert len(rows) == 6
        assert len({(r.train_loss, r.test_loss) for r in rows}) == 1
        assert rows[2].confusion is not None and rows[0].confusion is None

    def test_epoch_memorizes(self):
        d = D.synthetic(27, 4, 0.0, 1)
        rows = sweeps.run_epoch_sweep(nn.NetworkSpec(4, 32, 2), d, 0.2, 0.25, 400, 0.1, 0, 50, batch_size=5)
        assert len(rows) == 400
        assert rows[-1].train_loss < 0.05
        assert rows[-1].test_loss >= rows[-1].train_loss

    def test_epoch_cadence_check(self):
        with pytest.raises(DomainError):
            sweeps.run_epoch_sweep(nn.NetworkSpec(4, 2, 1), D.synthetic(20), 0, 0.25, 3, 0.1, 0, 5)

    def test_fidelity_nested(self):
        for r in range(3):
            small = set(sweeps.fidelity_subset(100, 10, 4, r))
            big = set(sweeps.fidelity_subset(100, 40, 4, r))
            assert small < big

    def test_fidelity_full_matches_direct_train(self):
        d = D.synthetic(40, 3, 0.0, 5)
        spec = nn.NetworkSpec(3, 4, 1)
        pts = sweeps.run_fidelity_sweep(spec, d, [10, 30], 0.1, 0.25, 15, 0.1, seed=2, repeats=1, batch_size=5)
        pool, test = sweeps.split(sweeps.noisy(d, 0.1, 2), 0.25, 2)
        run = nn.train(spec, pool, 0.1, 15, 5, rng.trial_seed(2, 0), snapshot_every=15)
        assert pts[1].train_loss == sweeps.evaluate(run.final_weights, pool)[0]
        assert pts[1].test_loss == sweeps.evaluate(run.final_weights, test)[0]
        assert len(pts) == 2

    def test_fidelity_more_data_helps(self):
        d = D.synthetic(240, 4, 0.0, 2)
        pts = sweeps.run_fidelity_sweep(nn.NetworkSpec(4, 8, 1), d, [10, 160], 0.1, 0.25, 100, 0.1, 0, 10)
        assert pts[1].test_error <= pts[0].test_error

    @pytest.mark.parametrize("sizes", [[10, 10], [20, 10], [10, 500]])
    def test_fidelity_bad_sizes(self, sizes):
        with pytest.raises(DomainError):
            sweeps.run_fidelity_sweep(nn.NetworkSpec(4, 2, 1), D.synthetic(100), sizes, 0, 0.25, 1, 0.1, 0, 1)

    def test_sweep_point_validation(self):
        with pytest.raises(DomainError):
            sweeps.SweepPoint("epoch", 1, 0.1, 0.1, 1.5, 0.0)
        with pytest.raises(DomainError):
            sweeps.SweepPoint("epoch", 1, math.inf, 0.1, 0.5, 0.0)
        sweeps.SweepPoint("epoch", 1, None, None, None, None, failed=True)


class TestFactory:
    def test_csv_source(self, tmp_path):
        csv_path, schema_path = D.bundled_paths()
        cfg = C.defaults()
        cfg["data"].update(source="csv", path=str(csv_path), schema=str(schema_path))
        assert np.array_equal(factory.load_data(cfg).X, D.load_bundled().X)

    def test_missing_csv(self, tmp_path):
        cfg = C.defaults()
        _, schema_path = D.bundled_paths()
        cfg["data"].update(source="csv", path=str(tmp_path / "x.csv"), schema=str(schema_path))
        with pytest.raises(OSError, match="x.csv"):
            factory.load_data(cfg)

    def test_label_noise_applied(self):
        cfg = C.defaults()
        cfg["data"]["label_noise"] = 0.1
        clean = factory.load_data(cfg, with_noise=False)
        noisy = factory.load_data(cfg)
        assert np.count_nonzero(clean.y != noisy.y) == 20


class TestRecipes:
    def test_panel_ladders(self):
        assert [p.network["width"] for p in recipes.panels("width_transition")] == [6, 9, 12]
        assert [p.network["depth"] for p in recipes.panels("depth_transition")] == [3, 6, 9]
        assert [p.network["init_scale"] for p in recipes.panels("init_scaling")] == [0.5, 1.0, 2.0]
        assert [p.samples for p in recipes.panels("sample_aggregation")] == ["0:1", "0:2", "0:3", "0:50"]
        tail = recipes.panels("tail_closeup")
        assert [p.network["depth"] for p in tail] == [2, 3, 4, 5, 6, 8, 9, 10, 11, 12]
        for p in tail:
            n = nn.param_count(nn.NetworkSpec(6, p.network["width"], p.network["depth"]))
            assert abs(n - recipes.TAIL_BUDGET) < 80

    def test_width_transition_records(self):
        cfg = C.defaults()
        cfg["histogram"]["trials"] = 30_000
        recs = recipes.run_recipe("width_transition", cfg)
        masses = [r.result["zero_mode_mass"] for r in recs]
        assert masses[0] < masses[1] < masses[2]
        assert [r.tag for r in recs] == ["width_transition_width6", "width_transition_width9",
                                         "width_transition_width12"]

    def test_panel_echo_reruns(self):
        cfg = C.defaults()
        cfg["histogram"]["trials"] = 2000
        rec = recipes.run_recipe("init_scaling", cfg)[2]
        data = D.load_bundled()
        again = H.sample_histogram(factory.hist_config(rec.config, data), data)
        assert rec.column("count") == again.counts.tolist()

    def test_tail_depth_endpoints(self):
        cfg = C.defaults()
        data = D.load_bundled()
        shares = []
        for p in recipes.panels("tail_closeup")[:5:4]:
            pcfg = factory.with_overrides(cfg, network=p.network)
            res, rec = recipes.run_tail(pcfg, data)
            assert res.retained == 2000
            shares.append(rec.result["tail_zero_share"])
        assert shares[0] > shares[1]
