"""Dataset-level evaluation: one pass over the images, one JSON report.

Metric paths and their detection sets:

- AP / mAP and LRP / oLRP rank detections by confidence and cap each image
  at ``max_dets`` (top confidences, ties by file order) before matching.
- F1 and the FP:TP ratio curve use every emitted detection with score >=
  ``min_score`` (default 0, so every detection), uncapped.
- Duplicate confusion and naming error see the full unfiltered detection
  set; their own confidence grid does the thresholding.

Per-image work is independent and runs on a thread pool; the reduction
happens on the calling thread in image-id order, so results are identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .coco import Dataset, DetectionLoadResult
from .hedging import (
    DEFAULT_DC_CONF_THRS,
    DEFAULT_DC_IOU_THRS,
    DcConfig,
    DetectionGraph,
    dc_single,
    duplicate_confusion,
    naming_error,
)
from .lrp import lrp_from_matching, olrp_scan
from .mask import decode, iou_matrix, pairwise_iou
from .matching import confidence_order, greedy_match, greedy_match_from_ious
from .oracles import ap_naive, dc_bruteforce, match_bruteforce
from .pr import (
    average_precision,
    build_pr_curve,
    f1_from_counts,
    fp_tp_ratio_curve,
    mean_ap,
)

DEFAULT_AP_IOU_THRS = tuple(np.arange(50, 100, 5) / 100.0)  # 0.50 .. 0.95

VERIFY_TOL = 1e-9
VERIFY_MAX_GRAPH = 8  # path enumeration stays feasible up to here


@dataclass(frozen=True)
class EvalConfig:
    """Fully resolved evaluation parameters, echoed into every report."""

    iou_thrs: tuple[float, ...] = DEFAULT_AP_IOU_THRS
    dc_iou_thrs: tuple[float, ...] = DEFAULT_DC_IOU_THRS
    dc_conf_thrs: tuple[float, ...] = DEFAULT_DC_CONF_THRS
    f1_iou_thr: float = 0.5
    lrp_iou_thr: float = 0.5
    min_score: float = 0.0
    max_dets: int = 100
    threads: int = 1
    verify: bool = False
    verify_seed: int = 0

    def __post_init__(self):
        if not self.iou_thrs:
            raise ValueError("iou_thrs must be non-empty")
        for t in (*self.iou_thrs, self.f1_iou_thr, self.lrp_iou_thr):
            if not 0.0 < t < 1.0:
                raise ValueError(f"IoU thresholds must lie in (0, 1), got {t}")
        DcConfig(self.dc_iou_thrs, self.dc_conf_thrs)  # reuse its validation
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must lie in [0, 1]")
        if self.max_dets < 1:
            raise ValueError("max_dets must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.verify_seed < 0:
            raise ValueError("verify_seed must be non-negative")


@dataclass
class _ImageSlice:
    """Everything the reduction needs from one image."""

    ranked: dict  # cat -> scores, per-threshold TP flags, LRP flags/IoUs
    plain: dict  # cat -> scores, TP flags, tp count, n_det (F1 path)
    dc_groups: list  # (scores, pairwise IoU) per category with detections
    ne_item: tuple  # (det x gt IoU matrix, det labels, gt labels)
    n_gt: dict  # cat -> ground-truth count


def _flags(match) -> np.ndarray:
    return np.array([g is not None for g in match.det_to_gt], dtype=bool)


def _image_slice(gts, dets, cfg: EvalConfig) -> _ImageSlice:
    det_masks = [decode(d.mask) for d in dets]
    gt_masks = [decode(g.mask) for g in gts]
    scores = np.array([d.score for d in dets], dtype=np.float64)
    det_cats = np.array([d.category_id for d in dets], dtype=np.int64)
    gt_cats = np.array([g.category_id for g in gts], dtype=np.int64)

    if len(dets) > cfg.max_dets:
        capped = np.sort(confidence_order(scores)[:cfg.max_dets])
    else:
        capped = np.arange(len(dets))

    ranked, plain, dc_groups, n_gt = {}, {}, [], {}
    for cat in sorted(set(det_cats.tolist()) | set(gt_cats.tolist())):
        d_all = np.flatnonzero(det_cats == cat)
        g_idx = np.flatnonzero(gt_cats == cat)
        n_gt[cat] = int(g_idx.size)
        ious_full = iou_matrix([det_masks[i] for i in d_all],
                               [gt_masks[i] for i in g_idx])

        rows = np.flatnonzero(np.isin(d_all, capped))
        ious = ious_full[rows]
        s = scores[d_all[rows]]
        flags_by_t = {
            t: _flags(greedy_match_from_ious(ious, s, t)) for t in cfg.iou_thrs
        }
        lres = greedy_match_from_ious(ious, s, cfg.lrp_iou_thr)
        ranked[cat] = {
            "scores": s,
            "flags": flags_by_t,
            "lrp_flags": _flags(lres),
            "lrp_ious": np.asarray(lres.det_iou, dtype=np.float64),
        }

        rows = np.flatnonzero(scores[d_all] >= cfg.min_score)
        s = scores[d_all[rows]]
        fres = greedy_match_from_ious(ious_full[rows], s, cfg.f1_iou_thr)
        plain[cat] = {"scores": s, "flags": _flags(fres),
                      "tp": fres.n_tp, "n_det": int(rows.size)}

        if d_all.size:
            dc_groups.append((scores[d_all],
                              pairwise_iou([det_masks[i] for i in d_all])))

    ne_item = (iou_matrix(det_masks, gt_masks), det_cats.tolist(), gt_cats.tolist())
    return _ImageSlice(ranked, plain, dc_groups, ne_item, n_gt)


def _compute_slices(dataset: Dataset, dets_by_image, cfg: EvalConfig):
    ids = sorted(dataset.images)

    def work(image_id):
        return _image_slice(dataset.gts_by_image.get(image_id, []),
                            dets_by_image.get(image_id, []), cfg)

    if cfg.threads == 1:
        return ids, [work(i) for i in ids]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return ids, list(pool.map(work, ids))


def _mean_defined(values) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def _concat(chunks) -> np.ndarray:
    return np.concatenate(chunks) if chunks else np.zeros(0)


def evaluate(dataset: Dataset, dets_by_image, cfg: EvalConfig | None = None
             ) -> tuple[dict, dict | None]:
    """Compute the report's ``metrics`` object (and ``verify``, if enabled).

    ``dets_by_image`` maps image id to its Detection list; images without an
    entry count as having no detections.
    """
    cfg = cfg or EvalConfig()
    ids, slices = _compute_slices(dataset, dets_by_image, cfg)
    cats = sorted(dataset.categories)

    n_gt = {c: 0 for c in cats}
    ap_scores = {c: [] for c in cats}
    ap_flags = {c: {t: [] for t in cfg.iou_thrs} for c in cats}
    lrp_flags = {c: [] for c in cats}
    lrp_ious = {c: [] for c in cats}
    f1_tp = {c: 0 for c in cats}
    f1_det = {c: 0 for c in cats}
    pool_scores, pool_flags = [], []
    dc_groups, ne_items = [], []

    for sl in slices:
        for cat, count in sl.n_gt.items():
            n_gt[cat] += count
        for cat, r in sl.ranked.items():
            ap_scores[cat].append(r["scores"])
            for t in cfg.iou_thrs:
                ap_flags[cat][t].append(r["flags"][t])
            lrp_flags[cat].append(r["lrp_flags"])
            lrp_ious[cat].append(r["lrp_ious"])
        for cat, p in sl.plain.items():
            f1_tp[cat] += p["tp"]
            f1_det[cat] += p["n_det"]
            pool_scores.append(p["scores"])
            pool_flags.append(p["flags"])
        dc_groups.extend(sl.dc_groups)
        ne_items.append(sl.ne_item)

    curves = {}
    ap = {c: {} for c in cats}
    for cat in cats:
        scores = _concat(ap_scores[cat])
        for t in cfg.iou_thrs:
            curve = build_pr_curve(scores, _concat(ap_flags[cat][t]),
                                   n_gt[cat], t, cat)
            curves[(cat, t)] = curve
            ap[cat][t] = average_precision(curve)

    lrp_by_cat, olrp_by_cat = {}, {}
    for cat in cats:
        if n_gt[cat] == 0:
            continue
        flags = _concat(lrp_flags[cat]).astype(bool)
        ious = _concat(lrp_ious[cat])
        res = lrp_from_matching(ious[flags], int((~flags).sum()),
                                n_gt[cat] - int(flags.sum()), cfg.lrp_iou_thr)
        lrp_by_cat[cat] = res
        best, _ = olrp_scan(_concat(ap_scores[cat]), flags, ious,
                            n_gt[cat], cfg.lrp_iou_thr)
        olrp_by_cat[cat] = best.lrp

    total_gt = sum(n_gt.values())
    total_tp = sum(f1_tp.values())
    total_det = sum(f1_det.values())
    pooled = build_pr_curve(_concat(pool_scores), _concat(pool_flags),
                            total_gt, cfg.f1_iou_thr)
    bins = np.linspace(0.0, 1.0, 11)
    ratios = fp_tp_ratio_curve(pooled, bins)

    dc_res = duplicate_confusion(dc_groups, DcConfig(cfg.dc_iou_thrs, cfg.dc_conf_thrs))
    ne_res = naming_error(ne_items)

    metrics = {
        "map": mean_ap([ap[c][t] for c in cats for t in cfg.iou_thrs]),
        "ap_per_category": {str(c): mean_ap(ap[c].values()) for c in cats},
        "f1": f1_from_counts(total_tp, total_det - total_tp, total_gt - total_tp),
        "f1_per_category": {
            str(c): f1_from_counts(f1_tp[c], f1_det[c] - f1_tp[c], n_gt[c] - f1_tp[c])
            for c in cats
        },
        "dc": dc_res.dc,
        "dc_grid": dc_res.grid,
        "dc_cells": dc_res.cells,
        "ne": ne_res.ne,
        "ne_mismatch_count": ne_res.mismatches,
        "n_gt": ne_res.n_gt,
        "lrp": _mean_defined(r.lrp for r in lrp_by_cat.values()),
        "lrp_loc": _mean_defined(r.lrp_loc for r in lrp_by_cat.values()),
        "lrp_fp": _mean_defined(r.lrp_fp for r in lrp_by_cat.values()),
        "lrp_fn": _mean_defined(r.lrp_fn for r in lrp_by_cat.values()),
        "olrp": _mean_defined(olrp_by_cat.values()),
        "fp_tp_curve": {f"{b:.2f}": r for b, r in zip(bins, ratios)},
    }
    verify = _verify(dataset, dets_by_image, curves, cfg) if cfg.verify else None
    return metrics, verify


def _verify(dataset: Dataset, dets_by_image, curves, cfg: EvalConfig) -> dict:
    """Re-run a deterministic sample through the brute-force references.

    Checks greedy matching per sampled image, duplicate confusion on small
    graphs from those images, and the 101-point AP of every category at the
    first IoU threshold.
    """
    rng = np.random.default_rng(cfg.verify_seed)
    ids = sorted(dataset.images)
    k = max(1, round(0.01 * len(ids)))
    picks = sorted(rng.choice(len(ids), size=k, replace=False).tolist())
    ok = True
    matches_checked = graphs_checked = 0

    t0 = cfg.iou_thrs[0]
    dc_t, dc_v = cfg.dc_iou_thrs[0], cfg.dc_conf_thrs[0]
    for image_id in (ids[i] for i in picks):
        gts = dataset.gts_by_image.get(image_id, [])
        dets = dets_by_image.get(image_id, [])
        det_masks = [decode(d.mask) for d in dets]
        gt_masks = [decode(g.mask) for g in gts]
        scores = np.array([d.score for d in dets], dtype=np.float64)
        det_cats = [d.category_id for d in dets]
        gt_cats = [g.category_id for g in gts]
        for cat in sorted(set(det_cats) | set(gt_cats)):
            dm = [m for m, c in zip(det_masks, det_cats) if c == cat]
            gm = [m for m, c in zip(gt_masks, gt_cats) if c == cat]
            s = scores[[c == cat for c in det_cats]]
            got = greedy_match(dm, s, gm, t0)
            want = match_bruteforce(dm, s, gm, t0)
            matches_checked += len(dm)
            if got.det_to_gt != want.det_to_gt or got.gt_to_det != want.gt_to_det:
                ok = False
            if not np.allclose(got.det_iou, want.det_iou, atol=VERIFY_TOL):
                ok = False
            keep = np.flatnonzero(s >= dc_v)
            if keep.size > VERIFY_MAX_GRAPH:
                # induced subgraph keeps path enumeration feasible while
                # still exercising the production algorithm on real data
                keep = np.sort(rng.choice(keep, size=VERIFY_MAX_GRAPH, replace=False))
            if keep.size >= 2:
                pious = pairwise_iou([dm[i] for i in keep])
                g = DetectionGraph.from_ious(s[keep], pious, dc_t)
                graphs_checked += 1
                if abs(dc_single(g) - dc_bruteforce(g)) > VERIFY_TOL:
                    ok = False

    for cat in sorted(dataset.categories):
        curve = curves[(cat, t0)]
        want_ap = ap_naive(curve.is_tp, curve.n_gt)
        got_ap = average_precision(curve)
        if (want_ap is None) != (got_ap is None):
            ok = False
        elif want_ap is not None and abs(want_ap - got_ap) > VERIFY_TOL:
            ok = False

    return {"images_checked": len(picks), "graphs_checked": graphs_checked,
            "matches_checked": matches_checked, "ok": ok}


def build_report(dataset: Dataset, detections, cfg: EvalConfig | None = None,
                 source: dict | None = None) -> dict:
    """Assemble the full report dict (see schemas/report.schema.json).

    ``detections`` is a DetectionLoadResult or a plain image-id -> list
    mapping. ``source`` holds extra config entries to record (input paths,
    requested metric names); worker-count and other non-semantic run options
    stay out so identical inputs give identical reports.
    """
    cfg = cfg or EvalConfig()
    if isinstance(detections, DetectionLoadResult):
        by_image = detections.by_image
        rejected = (detections.rejected_bad_score, detections.rejected_empty_mask)
    else:
        by_image = detections
        rejected = (0, 0)
    metrics, verify = evaluate(dataset, by_image, cfg)
    report = {
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": {
            **(source or {}),
            "iou_thrs": [float(t) for t in cfg.iou_thrs],
            "dc_iou_thrs": [float(t) for t in cfg.dc_iou_thrs],
            "dc_conf_thrs": [float(v) for v in cfg.dc_conf_thrs],
            "f1_iou_thr": cfg.f1_iou_thr,
            "lrp_iou_thr": cfg.lrp_iou_thr,
            "min_score": cfg.min_score,
            "max_dets": cfg.max_dets,
        },
        "counts": {
            "n_images": len(dataset.images),
            "n_categories": len(dataset.categories),
            "n_ground_truths": dataset.n_ground_truths,
            "n_detections": sum(len(v) for v in by_image.values()),
            "rejected_bad_score": rejected[0],
            "rejected_empty_mask": rejected[1],
        },
        "metrics": metrics,
    }
    if verify is not None:
        report["verify"] = verify
    return report
