"""Duplicate-removal algorithms: classical mask NMS, matrix NMS, soft NMS,
and semantic sorting + semantic NMS.

The classical three compare detection pairs, so their per-image cost grows
quadratically with the number of detections. Semantic NMS instead treats the
per-category semantic mask as an occupancy budget: a detection is kept iff at
least ``thr`` of its pixels are still unclaimed, and keeping it subtracts its
pixels from the budget. One pass, no pairwise comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .coco import Detection, SemanticMaskSet
from .mask import decode, iou_matrix
from .matching import confidence_order

METHODS = ("mask", "matrix", "soft", "semantic")
DECAYS = ("gaussian", "linear")
SCORE_MODES = ("averaged", "original", "sum")

# post-NMS floors: matrix/soft defaults are the permissive values whose
# long low-confidence tails semantic NMS is designed to avoid
DEFAULT_SCORE_FLOORS = {"mask": 0.0, "matrix": 0.05, "soft": 0.001, "semantic": 0.0}


@dataclass(frozen=True)
class NmsConfig:
    method: str = "semantic"
    iou_thr: float = 0.5
    score_floor: float | None = None  # None picks the method default
    occupancy_thr: float = 0.5
    decay: str = "gaussian"
    sigma: float = 2.0
    score_mode: str = "averaged"  # semantic output scores

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.decay not in DECAYS:
            raise ValueError(f"unknown decay {self.decay!r}")
        if self.score_mode not in SCORE_MODES:
            raise ValueError(f"unknown score mode {self.score_mode!r}")
        if self.score_floor is None:
            object.__setattr__(self, "score_floor", DEFAULT_SCORE_FLOORS[self.method])
        for name in ("iou_thr", "score_floor", "occupancy_thr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def mask_nms(masks, scores, categories, iou_thr: float = 0.5) -> list[int]:
    """Greedy pairwise suppression; returns kept indices in ingestion order.

    A detection survives iff its IoU with every already-kept detection of
    the same category stays below ``iou_thr``. The kept list is rescanned
    for each candidate, which is the O(n^2) baseline behaviour the bench
    harness measures.
    """
    categories = np.asarray(categories)
    kept: list[int] = []
    for k in confidence_order(scores):
        suppressed = False
        for j in kept:
            if categories[j] != categories[k]:
                continue
            inter = np.count_nonzero(masks[j] & masks[k])
            if inter:
                union = np.count_nonzero(masks[j]) + np.count_nonzero(masks[k]) - inter
                if inter / union >= iou_thr:
                    suppressed = True
                    break
        if not suppressed:
            kept.append(int(k))
    return sorted(kept)


def _decay_ratio(ious: np.ndarray, cmax: np.ndarray, decay: str, sigma: float) -> np.ndarray:
    if decay == "gaussian":
        return np.exp(-(ious**2 - cmax[:, None] ** 2) / sigma)
    return (1.0 - ious) / (1.0 - cmax[:, None])


def matrix_nms(masks, scores, categories, decay: str = "gaussian", sigma: float = 2.0) -> np.ndarray:
    """Parallel rescoring: each score is decayed by the most suppressive
    higher-ranked same-category overlap, discounted by how suppressed that
    detection is itself. Returns the new score vector (ingestion order)."""
    scores = np.asarray(scores, dtype=np.float64)
    categories = np.asarray(categories)
    out = scores.copy()
    for c in np.unique(categories):
        idx = np.flatnonzero(categories == c)
        if len(idx) < 2:
            continue
        ranked = idx[confidence_order(scores[idx])]
        ious = np.triu(iou_matrix([masks[i] for i in ranked], [masks[i] for i in ranked]), k=1)
        cmax = ious.max(axis=0)  # per rank: worst overlap with anything above
        out[ranked] = scores[ranked] * _decay_ratio(ious, cmax, decay, sigma).min(axis=0)
    return out


def soft_nms(masks, scores, categories, decay: str = "gaussian", sigma: float = 2.0,
             iou_thr: float = 0.5) -> np.ndarray:
    """Sequential rescoring: repeatedly commit the highest-scored remaining
    detection and decay what's left by overlap with it. ``iou_thr`` gates
    the linear decay only; gaussian decays every overlap."""
    scores = np.asarray(scores, dtype=np.float64)
    categories = np.asarray(categories)
    out = scores.copy()
    for c in np.unique(categories):
        idx = np.flatnonzero(categories == c)
        cur = scores[idx].copy()
        remaining = list(range(len(idx)))
        while remaining:
            r = max(remaining, key=lambda i: (cur[i], -i))
            remaining.remove(r)
            if not remaining:
                break
            rest = [masks[idx[i]] for i in remaining]
            ious = iou_matrix([masks[idx[r]]], rest)[0]
            if decay == "gaussian":
                weights = np.exp(-(ious**2) / sigma)
            else:
                weights = np.where(ious >= iou_thr, 1.0 - ious, 1.0)
            cur[remaining] *= weights
        out[idx] = cur
    return out


def semantic_sort(masks, scores, categories, semantic: dict[int, np.ndarray]):
    """Rescore by agreement with the per-category semantic masks and reorder.

    combined = tau + precision-against-semantic + (1 - IoU-with-semantic);
    high precision rewards detections inside their class region, low IoU
    penalises ones pretending to be the whole region. Returns (order,
    combined) with ties broken by original tau, then ingestion order. A
    category with no semantic mask counts as an empty mask.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    combined = np.empty(n)
    for k in range(n):
        m = masks[k]
        sem = semantic.get(categories[k])
        area = np.count_nonzero(m)
        if sem is None or area == 0:
            pr, iou = 0.0, 0.0
        else:
            inter = np.count_nonzero(m & sem)
            pr = inter / area
            union = area + np.count_nonzero(sem) - inter
            iou = inter / union if union else 0.0
        combined[k] = scores[k] + pr + (1.0 - iou)
    order = np.lexsort((np.arange(n), -scores, -combined))
    return order, combined


def semantic_nms(masks, categories, semantic: dict[int, np.ndarray], thr: float = 0.5) -> list[bool]:
    """Single-pass occupancy suppression over pre-sorted detections.

    ``semantic`` is the working budget and is consumed in place; pass
    copies if the originals matter. Returns per-detection keep flags in the
    given order. No detection is ever compared against another one.
    """
    flat: dict[int, np.ndarray] = {c: m.reshape(-1) for c, m in semantic.items()}
    keep: list[bool] = []
    for k, m in enumerate(masks):
        budget = flat.get(categories[k])
        idx = np.flatnonzero(m.reshape(-1))
        if budget is None or idx.size == 0:
            keep.append(False)
            continue
        overlap = np.count_nonzero(budget[idx]) / idx.size
        if overlap >= thr:
            keep.append(True)
            budget[idx] = False
        else:
            keep.append(False)
    return keep


def _semantic_pass(dets: list[Detection], sem_set: SemanticMaskSet, cfg: NmsConfig) -> list[Detection]:
    masks = [decode(d.mask) for d in dets]
    scores = [d.score for d in dets]
    categories = [d.category_id for d in dets]
    order, combined = semantic_sort(masks, scores, categories, sem_set.masks)
    working = {c: m.copy() for c, m in sem_set.masks.items()}
    ordered_masks = [masks[i] for i in order]
    ordered_cats = [categories[i] for i in order]
    keep = semantic_nms(ordered_masks, ordered_cats, working, cfg.occupancy_thr)
    out = []
    for pos, i in enumerate(order):
        if not keep[pos]:
            continue
        if cfg.score_mode == "original":
            score = dets[i].score
        elif cfg.score_mode == "sum":
            score = float(combined[i])
        else:
            score = float(combined[i]) / 3.0
        if score >= cfg.score_floor:
            out.append(replace(dets[i], score=score))
    return out


def run_nms(dets_by_image: dict[int, list[Detection]], cfg: NmsConfig,
            semantic_sets: dict[int, SemanticMaskSet] | None = None) -> dict[int, list[Detection]]:
    """Apply the configured method image by image.

    Output preserves ingestion order for the pairwise methods (scores of
    mask NMS survivors are untouched; matrix/soft survivors carry decayed
    scores). The semantic method emits survivors in processing order with
    scores per cfg.score_mode: 'original' tau, the raw rescoring 'sum', or
    that sum 'averaged' into [0, 1] (default, keeps output files reloadable).
    """
    if cfg.method == "semantic" and semantic_sets is None:
        raise ValueError("semantic NMS requires semantic masks")
    out: dict[int, list[Detection]] = {}
    for image_id, dets in dets_by_image.items():
        if not dets:
            out[image_id] = []
            continue
        if cfg.method == "semantic":
            out[image_id] = _semantic_pass(dets, semantic_sets[image_id], cfg)
            continue
        masks = [decode(d.mask) for d in dets]
        scores = np.array([d.score for d in dets], dtype=np.float64)
        categories = [d.category_id for d in dets]
        if cfg.method == "mask":
            kept = [dets[i] for i in mask_nms(masks, scores, categories, cfg.iou_thr)]
        else:
            if cfg.method == "matrix":
                rescored = matrix_nms(masks, scores, categories, cfg.decay, cfg.sigma)
            else:
                rescored = soft_nms(masks, scores, categories, cfg.decay, cfg.sigma, cfg.iou_thr)
            kept = [replace(d, score=float(s)) for d, s in zip(dets, rescored)]
        out[image_id] = [d for d in kept if d.score >= cfg.score_floor]
    return out
