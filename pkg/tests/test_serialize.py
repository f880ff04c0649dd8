"""Instance JSON round-trips, trace CSV schema, and summary accounting."""

import json

import numpy as np
import pytest

from j6opt import (
    Family,
    GeneratorSpec,
    InstanceFormatError,
    RunConfig,
    StrategyConfig,
    StrategyKind,
    WMode,
    generate,
    load_instance,
    read_trace,
    run,
    save_instance,
    selection_counts,
    write_summary,
    write_trace,
)


@pytest.fixture
def instance():
    return generate(GeneratorSpec(V=5, d=3, T=2, seed=42, w_mode=WMode.SINGLE_ROW))


@pytest.fixture
def result(instance):
    return run(instance, StrategyConfig(kind=StrategyKind.HARD_J6), RunConfig(max_steps=12))


class TestInstanceRoundTrip:
    def test_exact_round_trip(self, instance, tmp_path):
        path = tmp_path / "inst.json"
        save_instance(instance, path, seed=42, family="gaussian")
        loaded = load_instance(path)
        np.testing.assert_array_equal(loaded.H, instance.H)
        np.testing.assert_array_equal(loaded.W, instance.W)
        np.testing.assert_array_equal(loaded.y, instance.y)
        assert (loaded.V, loaded.d, loaded.T) == (instance.V, instance.d, instance.T)
        assert loaded.w_mode is instance.w_mode
        assert loaded.v_star == instance.v_star

    def test_rewrite_is_byte_identical(self, instance, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_instance(instance, a, seed=42, family="gaussian")
        save_instance(instance, b, seed=42, family="gaussian")
        assert a.read_bytes() == b.read_bytes()

    def test_loaded_instance_runs_identically(self, instance, tmp_path):
        path = tmp_path / "inst.json"
        save_instance(instance, path)
        loaded = load_instance(path)
        cfg = StrategyConfig(kind=StrategyKind.SOFT, tau=0.3)
        rcfg = RunConfig(max_steps=15, init_scale=0.2, seed=3)
        t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
        write_trace(run(instance, cfg, rcfg), t1, cfg.kind)
        write_trace(run(loaded, cfg, rcfg), t2, cfg.kind)
        assert t1.read_bytes() == t2.read_bytes()


class TestInstanceValidation:
    def _doc(self, instance):
        return {
            "V": instance.V,
            "d": instance.d,
            "T": instance.T,
            "H": instance.H.tolist(),
            "W": instance.W.tolist(),
            "y": instance.y.tolist(),
            "w_mode": instance.w_mode.value,
            "v_star": instance.v_star,
            "metadata": {"seed": None, "family": None, "format_version": "1"},
        }

    def test_truncated_file_names_byte_offset(self, instance, tmp_path):
        path = tmp_path / "inst.json"
        save_instance(instance, path)
        path.write_bytes(path.read_bytes()[: len(path.read_bytes()) // 2])
        with pytest.raises(InstanceFormatError, match="byte offset"):
            load_instance(path)

    def test_unknown_top_level_key(self, instance, tmp_path):
        doc = self._doc(instance)
        doc["extra"] = 1
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InstanceFormatError, match="unknown keys.*extra"):
            load_instance(path)

    def test_unknown_metadata_key(self, instance, tmp_path):
        doc = self._doc(instance)
        doc["metadata"]["note"] = "hi"
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InstanceFormatError, match="metadata keys"):
            load_instance(path)

    def test_missing_key(self, instance, tmp_path):
        doc = self._doc(instance)
        del doc["y"]
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InstanceFormatError, match="missing keys"):
            load_instance(path)

    def test_wrong_format_version(self, instance, tmp_path):
        doc = self._doc(instance)
        doc["metadata"]["format_version"] = "2"
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InstanceFormatError, match="format_version"):
            load_instance(path)

    def test_dimension_mismatch(self, instance, tmp_path):
        doc = self._doc(instance)
        doc["V"] = instance.V + 1
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="W must have shape"):
            load_instance(path)

    def test_unknown_w_mode(self, instance, tmp_path):
        doc = self._doc(instance)
        doc["w_mode"] = "diag"
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InstanceFormatError, match="w_mode"):
            load_instance(path)


class TestTraceFile:
    def test_round_trip_matches_records(self, instance, result, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace(result, path, StrategyKind.HARD_J6)
        fields, rows = read_trace(path)
        assert fields[:8] == ["step", "ob1", "ob2", "entropy", "n11", "n12", "n21", "n22"]
        assert fields[8:14] == [f"s{i}" for i in range(6)]
        assert fields[14:] == ["decision", "dh_norm", "dw_norm"]
        assert len(rows) == len(result.trace)
        for row, record in zip(rows, result.trace):
            assert row["step"] == record.step
            assert row["ob1"] == record.ob1  # repr round-trip is exact
            assert row["decision"] == record.chosen_index
            for i in range(6):
                assert row[f"s{i}"] == record.scores[i]

    def test_soft_layout_has_weight_columns(self, instance, tmp_path):
        cfg = StrategyConfig(kind=StrategyKind.SOFT)
        res = run(instance, cfg, RunConfig(max_steps=4))
        path = tmp_path / "trace.csv"
        write_trace(res, path, cfg.kind)
        fields, rows = read_trace(path)
        assert [f"a{i}" for i in range(6)] == fields[14:20]
        assert "decision" not in fields
        for row, record in zip(rows, res.trace):
            np.testing.assert_array_equal(
                [row[f"a{i}"] for i in range(6)], record.alpha
            )

    def test_jplus_layout_has_fifteen_scores(self, instance, tmp_path):
        cfg = StrategyConfig(kind=StrategyKind.HARD_JPLUS)
        res = run(instance, cfg, RunConfig(max_steps=4))
        path = tmp_path / "trace.csv"
        write_trace(res, path, cfg.kind)
        fields, rows = read_trace(path)
        assert [f"s{i}" for i in range(15)] == fields[8:23]
        assert all(1 <= row["decision"] <= 15 for row in rows)

    def test_baseline_uses_sentinel_decision(self, instance, tmp_path):
        cfg = StrategyConfig(kind=StrategyKind.STATIC)
        res = run(instance, cfg, RunConfig(max_steps=3))
        path = tmp_path / "trace.csv"
        write_trace(res, path, cfg.kind)
        _, rows = read_trace(path)
        assert all(row["decision"] == -1 for row in rows)

    def test_empty_trace_is_header_only(self, instance, tmp_path):
        res = run(instance, StrategyConfig(kind=StrategyKind.HARD_J6), RunConfig(max_steps=0))
        path = tmp_path / "trace.csv"
        write_trace(res, path, StrategyKind.HARD_J6)
        text = path.read_text()
        assert text.count("\n") == 1
        assert text.startswith("step,ob1,ob2,")

    def test_lf_line_endings(self, result, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace(result, path, StrategyKind.HARD_J6)
        assert b"\r" not in path.read_bytes()

    def test_rewrite_is_byte_identical(self, result, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace(result, a, StrategyKind.HARD_J6)
        write_trace(result, b, StrategyKind.HARD_J6)
        assert a.read_bytes() == b.read_bytes()


class TestSummary:
    def test_selection_counts_sum_to_trace_length(self, instance):
        for kind in (StrategyKind.HARD_J6, StrategyKind.HARD_JPLUS, StrategyKind.SOFT):
            res = run(instance, StrategyConfig(kind=kind), RunConfig(max_steps=9))
            counts = selection_counts(res)
            assert sum(counts.values()) == len(res.trace)

    def test_baselines_have_empty_histogram(self, instance):
        res = run(instance, StrategyConfig(kind=StrategyKind.STATIC), RunConfig(max_steps=5))
        assert selection_counts(res) == {}

    def test_summary_document(self, instance, result, tmp_path):
        path = tmp_path / "summary.json"
        write_summary([("hard-j6", result)], path)
        doc = json.loads(path.read_text())
        assert doc["format_version"] == "1"
        (entry,) = doc["runs"]
        assert entry["name"] == "hard-j6"
        assert entry["final_ob1"] == result.objectives.ob1
        assert entry["final_ob2"] == result.objectives.ob2
        assert entry["steps"] == len(result.trace)
        assert entry["stop_reason"] == "max_steps"
        assert sum(entry["selection_counts"].values()) == len(result.trace)
