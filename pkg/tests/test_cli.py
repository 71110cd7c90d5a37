"""Command-line interface, exercised through CliRunner against real files."""

import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hedgeval.cli import main
from hedgeval.coco import (
    CategoryInfo,
    Dataset,
    Detection,
    GroundTruthInstance,
    ImageInfo,
    load_detections,
    load_ground_truth,
    write_detections,
    write_ground_truth,
)
from hedgeval.mask import encode


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """A small generated dataset with hedged detections, shared read-only."""
    out = tmp_path_factory.mktemp("synth")
    result = CliRunner().invoke(main, [
        "synth", "--out", str(out), "--n-images", "6", "--seed", "42",
        "--spatial-copies", "3",
    ])
    assert result.exit_code == 0, result.output
    return out


def toy_files(tmp_path):
    """One image, one GT, one TP at 0.8 behind one FP at 0.9."""
    gt_mask = np.zeros((16, 16), dtype=bool)
    gt_mask[2:8, 2:8] = True
    fp_mask = np.zeros((16, 16), dtype=bool)
    fp_mask[10:14, 10:14] = True
    ds = Dataset({1: ImageInfo(1, 16, 16)}, {1: CategoryInfo(1, "thing")},
                 {1: [GroundTruthInstance(1, 1, 1, encode(gt_mask))]})
    gt_path = tmp_path / "gt.json"
    dt_path = tmp_path / "dt.json"
    write_ground_truth(ds, gt_path)
    write_detections([Detection(1, 1, 0.9, encode(fp_mask)),
                      Detection(1, 1, 0.8, encode(gt_mask))], dt_path)
    return gt_path, dt_path


class TestSynthCommand:
    def test_writes_dataset_and_detections(self, synth_dir):
        assert (synth_dir / "annotations.json").exists()
        assert (synth_dir / "config.json").exists()
        assert (synth_dir / "semantic" / "1" / "1.json").exists()
        ds = load_ground_truth(synth_dir / "annotations.json")
        assert len(ds.images) == 6
        dets = load_detections(synth_dir / "detections.json", ds)
        assert dets.n_loaded == 4 * ds.n_ground_truths

    def test_rejects_impossible_geometry(self, runner, tmp_path):
        result = runner.invoke(main, [
            "synth", "--out", str(tmp_path / "x"), "--height", "64",
            "--width", "64", "--length-range", "80,90",
        ])
        assert result.exit_code == 2
        assert "larger than image" in result.stderr

    def test_category_noise_needs_second_category(self, runner, tmp_path):
        result = runner.invoke(main, [
            "synth", "--out", str(tmp_path / "x"), "--n-images", "1",
            "--category-noise", "0.5",
        ])
        assert result.exit_code == 1
        assert "two categories" in result.stderr


class TestEvalCommand:
    def test_report_file_and_table(self, runner, synth_dir, tmp_path):
        report_path = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
            "--out", str(report_path), "--verify",
        ])
        assert result.exit_code == 0, result.output
        assert "mAP" in result.output and "DC" in result.output
        assert "verify: ok" in result.output
        report = json.loads(report_path.read_text())
        assert report["metrics"]["map"] == 1.0
        assert report["metrics"]["dc"] > 0
        assert report["verify"]["ok"] is True
        assert report["config"]["gt"].endswith("annotations.json")

    def test_threads_yield_identical_reports(self, runner, synth_dir, tmp_path):
        paths = []
        for threads in ("1", "8"):
            p = tmp_path / f"report{threads}.json"
            result = runner.invoke(main, [
                "eval", "--gt", str(synth_dir / "annotations.json"),
                "--dt", str(synth_dir / "detections.json"),
                "--threads", threads, "--out", str(p),
            ])
            assert result.exit_code == 0, result.output
            paths.append(p)
        a, b = (json.loads(p.read_text()) for p in paths)
        a.pop("created_at"), b.pop("created_at")
        assert a == b

    def test_threads_env_fallback(self, runner, synth_dir):
        result = runner.invoke(main, [
            "eval", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
        ], env={"HEDGEVAL_THREADS": "3"})
        assert result.exit_code == 0, result.output

    def test_missing_gt_fails_on_stderr(self, runner, tmp_path):
        result = runner.invoke(main, [
            "eval", "--gt", str(tmp_path / "nope.json"), "--dt", str(tmp_path / "d.json"),
        ])
        assert result.exit_code != 0
        assert "nope.json" in result.stderr

    def test_unknown_metric_name(self, runner, synth_dir):
        result = runner.invoke(main, [
            "eval", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"), "--metrics", "map,bogus",
        ])
        assert result.exit_code == 2
        assert "bogus" in result.stderr

    def test_metric_selection_filters_table(self, runner, synth_dir):
        result = runner.invoke(main, [
            "eval", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
            "--metrics", "ap,fp-tp-curve",
        ])
        assert result.exit_code == 0
        assert "AP[1]" in result.output and "FP:TP@0.50" in result.output
        assert "mAP" not in result.output and "oLRP" not in result.output

    def test_malformed_gt_reports_load_error(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"images": []}))
        result = runner.invoke(main, ["eval", "--gt", str(bad), "--dt", str(bad)])
        assert result.exit_code == 1
        assert "missing required field" in result.stderr


class TestNmsCommand:
    def test_semantic_round_trip_restores_counts(self, runner, synth_dir, tmp_path):
        out = tmp_path / "kept.json"
        result = runner.invoke(main, [
            "nms", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
            "--out", str(out), "--semantic", "derive-from-gt",
        ])
        assert result.exit_code == 0, result.output
        ds = load_ground_truth(synth_dir / "annotations.json")
        kept = load_detections(out, ds)
        assert kept.n_loaded == ds.n_ground_truths
        for image_id, gts in ds.gts_by_image.items():
            assert len(kept.by_image[image_id]) == len(gts)

    def test_semantic_requires_source(self, runner, synth_dir, tmp_path):
        result = runner.invoke(main, [
            "nms", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
            "--out", str(tmp_path / "x.json"),
        ])
        assert result.exit_code == 1
        assert "--semantic" in result.stderr

    def test_mask_method_needs_no_semantic(self, runner, synth_dir, tmp_path):
        out = tmp_path / "kept.json"
        result = runner.invoke(main, [
            "nms", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
            "--out", str(out), "--method", "mask",
        ])
        assert result.exit_code == 0, result.output
        ds = load_ground_truth(synth_dir / "annotations.json")
        assert load_detections(out, ds).n_loaded == ds.n_ground_truths

    def test_semantic_directory_source(self, runner, synth_dir, tmp_path):
        out = tmp_path / "kept.json"
        result = runner.invoke(main, [
            "nms", "--gt", str(synth_dir / "annotations.json"),
            "--dt", str(synth_dir / "detections.json"),
            "--out", str(out), "--semantic", str(synth_dir / "semantic"),
        ])
        assert result.exit_code == 0, result.output


class TestPrcurveCommand:
    def test_csv_matches_toy_ranking(self, runner, tmp_path):
        gt_path, dt_path = toy_files(tmp_path)
        result = runner.invoke(main, ["prcurve", "--gt", str(gt_path),
                                      "--dt", str(dt_path)])
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(io.StringIO(result.output)))
        assert [r["rank"] for r in rows] == ["1", "2"]
        assert [r["is_tp"] for r in rows] == ["0", "1"]
        assert float(rows[1]["precision"]) == 0.5
        assert float(rows[1]["recall"]) == 1.0

    def test_out_file(self, runner, tmp_path):
        gt_path, dt_path = toy_files(tmp_path)
        out = tmp_path / "curve.csv"
        result = runner.invoke(main, ["prcurve", "--gt", str(gt_path),
                                      "--dt", str(dt_path), "--out", str(out)])
        assert result.exit_code == 0
        assert out.read_text().startswith("rank,confidence,is_tp")

    def test_unknown_category(self, runner, tmp_path):
        gt_path, dt_path = toy_files(tmp_path)
        result = runner.invoke(main, ["prcurve", "--gt", str(gt_path),
                                      "--dt", str(dt_path), "--category", "7"])
        assert result.exit_code == 1
        assert "category 7" in result.stderr


class TestBenchCommand:
    def test_csv_shape(self, runner, tmp_path):
        out = tmp_path / "bench.csv"
        result = runner.invoke(main, [
            "bench-nms", "--sizes", "40,80", "--repeats", "2", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.open()))
        assert [(r["n"], r["method"]) for r in rows] == [
            ("40", "mask"), ("40", "semantic"), ("80", "mask"), ("80", "semantic")]
        assert all(float(r["seconds"]) > 0 for r in rows)

    def test_bad_sizes(self, runner):
        result = runner.invoke(main, ["bench-nms", "--sizes", "101"])
        assert result.exit_code == 2
        assert "multiple" in result.stderr
