"""End-to-end evaluation pipeline over in-memory datasets."""

import json
from datetime import datetime

import numpy as np
import pytest

from hedgeval.coco import (
    CategoryInfo,
    Dataset,
    Detection,
    DetectionLoadResult,
    GroundTruthInstance,
    ImageInfo,
)
from hedgeval.evaluate import EvalConfig, build_report, evaluate
from hedgeval.mask import encode
from hedgeval.synth import SynthConfig, generate, perfect_detector

H = W = 32


def box(r, c, hh=4, ww=4):
    m = np.zeros((H, W), dtype=bool)
    m[r:r + hh, c:c + ww] = True
    return encode(m)


def scene(gt_specs, det_specs, n_categories=1):
    """One-image dataset; specs are (mask, category) and (mask, category, score)."""
    cats = {i: CategoryInfo(i, f"c{i}") for i in range(1, n_categories + 1)}
    gts = [GroundTruthInstance(1, i + 1, cat, m) for i, (m, cat) in enumerate(gt_specs)]
    ds = Dataset({1: ImageInfo(1, H, W)}, cats, {1: gts})
    dets = {1: [Detection(1, cat, score, m) for m, cat, score in det_specs]}
    return ds, dets


class TestEvalConfig:
    def test_defaults_are_valid(self):
        cfg = EvalConfig()
        assert len(cfg.iou_thrs) == 10 and cfg.max_dets == 100

    @pytest.mark.parametrize("kwargs", [
        {"iou_thrs": ()},
        {"iou_thrs": (0.5, 1.0)},
        {"f1_iou_thr": 0.0},
        {"lrp_iou_thr": 1.2},
        {"dc_conf_thrs": (0.5, 1.5)},
        {"min_score": -0.1},
        {"max_dets": 0},
        {"threads": 0},
        {"verify_seed": -1},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            EvalConfig(**kwargs)


@pytest.fixture(scope="module")
def synth():
    ds, _ = generate(SynthConfig(n_images=10, seed=42))
    return ds


class TestPerfectAndHedged:
    def test_perfect_identities(self, synth):
        metrics, _ = evaluate(synth, perfect_detector(synth))
        assert metrics["map"] == 1.0
        assert metrics["f1"] == 1.0
        assert metrics["dc"] == 0.0
        assert metrics["ne"] == 0.0
        assert metrics["lrp"] == 0.0
        assert metrics["olrp"] == 0.0
        assert metrics["lrp_loc"] == 0.0 and metrics["lrp_fp"] == 0.0
        assert all(v == 0.0 for v in metrics["fp_tp_curve"].values())

    def test_hedging_moves_everything_but_map(self, synth):
        metrics, _ = evaluate(synth, perfect_detector(synth, spatial_copies=5))
        assert metrics["map"] == 1.0
        assert metrics["dc"] > 0.0
        assert metrics["f1"] == pytest.approx(2 / 7)
        # every hedge is an extra FP at the fixed cutoff, but the optimal
        # cutoff sits above them and recovers the perfect prefix
        assert metrics["lrp"] > 0.0
        assert metrics["olrp"] == 0.0

    def test_threads_do_not_change_results(self, synth):
        dets = perfect_detector(synth, spatial_copies=3)
        m1, v1 = evaluate(synth, dets, EvalConfig(threads=1, verify=True))
        m4, v4 = evaluate(synth, dets, EvalConfig(threads=4, verify=True))
        assert json.dumps(m1, sort_keys=True) == json.dumps(m4, sort_keys=True)
        assert v1 == v4 and v1["ok"]

    def test_verify_exercises_all_oracles(self, synth):
        _, verify = evaluate(synth, perfect_detector(synth, spatial_copies=2),
                             EvalConfig(verify=True))
        assert verify["ok"]
        assert verify["images_checked"] >= 1
        assert verify["matches_checked"] > 0
        assert verify["graphs_checked"] > 0


class TestPerCategory:
    def test_category_without_gt_is_null_in_ap(self):
        ds, dets = scene([(box(2, 2), 1)],
                         [(box(2, 2), 1, 0.9), (box(20, 20), 2, 0.8)],
                         n_categories=2)
        metrics, _ = evaluate(ds, dets)
        assert metrics["ap_per_category"] == {"1": 1.0, "2": None}
        assert metrics["map"] == 1.0  # the undefined category is skipped
        assert metrics["f1_per_category"]["2"] == 0.0

    def test_lrp_averages_over_categories_with_gt(self):
        # cat 1: perfect single TP; cat 2: one GT, no detections
        ds, dets = scene([(box(2, 2), 1), (box(20, 20), 2)],
                         [(box(2, 2), 1, 0.9)], n_categories=2)
        metrics, _ = evaluate(ds, dets)
        assert metrics["lrp"] == pytest.approx(0.5)  # (0 + 1) / 2
        assert metrics["lrp_fn"] == pytest.approx(0.5)
        # loc is undefined for cat 2 (no TP) and averages over cat 1 only
        assert metrics["lrp_loc"] == 0.0
        assert metrics["ne"] == 0.0


class TestDetectionSetSemantics:
    def test_max_dets_caps_ranked_metrics_only(self):
        gt = box(2, 2)
        far1, far2 = box(20, 20), box(26, 26)
        ds, dets = scene([(gt, 1)],
                         [(far1, 1, 0.9), (far2, 1, 0.8), (gt, 1, 0.7)])
        capped, _ = evaluate(ds, dets, EvalConfig(max_dets=2))
        assert capped["map"] == 0.0  # the TP fell off the ranked list
        assert capped["f1"] == pytest.approx(0.5)  # 1 TP, 2 FP, 0 FN
        full, _ = evaluate(ds, dets, EvalConfig(max_dets=3))
        assert full["map"] > 0.0

    def test_min_score_filters_the_f1_path(self):
        gt = box(2, 2)
        junk = [(box(20, 20), 1, 0.1), (box(26, 26), 1, 0.1)]
        ds, dets = scene([(gt, 1)], [(gt, 1, 0.9)] + junk)
        raw, _ = evaluate(ds, dets)
        cut, _ = evaluate(ds, dets, EvalConfig(min_score=0.2))
        assert raw["f1"] == pytest.approx(2 / 4)  # 1 TP, 2 FP
        assert cut["f1"] == 1.0
        assert raw["map"] == cut["map"] == 1.0  # junk ranks below the TP

    def test_fp_tp_curve_known_values(self):
        gt = box(2, 2)
        ds, dets = scene([(gt, 1)], [(box(20, 20), 1, 0.9), (gt, 1, 0.8)])
        metrics, _ = evaluate(ds, dets)
        curve = metrics["fp_tp_curve"]
        assert curve["0.00"] is None  # rank 1 has no TP yet
        assert all(curve[f"{b / 10:.2f}"] == 1.0 for b in range(1, 11))


class TestNamingErrorPath:
    def test_relabeled_copy_counts(self):
        a, b = box(2, 2), box(20, 20)
        ds, dets = scene([(a, 1), (b, 2)],
                         [(a, 1, 0.9), (b, 2, 0.9), (a, 2, 0.5)],
                         n_categories=2)
        metrics, _ = evaluate(ds, dets)
        assert metrics["ne"] == pytest.approx(0.5)
        assert metrics["ne_mismatch_count"] == 1
        assert metrics["n_gt"] == 2


class TestDegenerateInputs:
    def test_no_detections_at_all(self):
        ds, _ = scene([(box(2, 2), 1)], [])
        metrics, _ = evaluate(ds, {})
        assert metrics["map"] == 0.0
        assert metrics["f1"] == 0.0
        assert metrics["dc"] == 0.0
        assert all(c == 0 for row in metrics["dc_cells"] for c in row)
        assert metrics["ne"] == 0.0
        assert metrics["lrp"] == 1.0 and metrics["lrp_fn"] == 1.0
        assert metrics["lrp_loc"] is None and metrics["lrp_fp"] is None
        assert metrics["olrp"] == 1.0

    def test_image_without_entries_is_fine(self):
        ds, dets = scene([(box(2, 2), 1)], [(box(2, 2), 1, 0.9)])
        ds.images[2] = ImageInfo(2, H, W)
        ds.gts_by_image[2] = []
        metrics, _ = evaluate(ds, dets)
        assert metrics["map"] == 1.0

    def test_no_ground_truth_anywhere(self):
        ds, dets = scene([], [(box(2, 2), 1, 0.9)])
        metrics, _ = evaluate(ds, dets)
        assert metrics["map"] is None
        assert metrics["ne"] is None
        assert metrics["lrp"] is None and metrics["olrp"] is None


class TestBuildReport:
    def test_structure_and_serializability(self):
        ds, _ = generate(SynthConfig(n_images=3, seed=1))
        result = DetectionLoadResult(perfect_detector(ds), rejected_bad_score=2,
                                     rejected_empty_mask=1)
        report = build_report(ds, result, EvalConfig(verify=True),
                              source={"gt": "a.json", "dt": "b.json"})
        for key in ("version", "created_at", "config", "counts", "metrics", "verify"):
            assert key in report
        assert report["counts"] == {
            "n_images": 3, "n_categories": 1,
            "n_ground_truths": ds.n_ground_truths,
            "n_detections": ds.n_ground_truths,
            "rejected_bad_score": 2, "rejected_empty_mask": 1,
        }
        assert report["config"]["gt"] == "a.json"
        assert report["config"]["iou_thrs"][0] == 0.5
        assert "threads" not in report["config"]
        datetime.fromisoformat(report["created_at"])
        json.dumps(report)  # everything must be plain JSON types

    def test_accepts_plain_mapping(self):
        ds, dets = scene([(box(2, 2), 1)], [(box(2, 2), 1, 1.0)])
        report = build_report(ds, dets)
        assert report["metrics"]["map"] == 1.0
        assert "verify" not in report
