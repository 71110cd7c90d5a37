"""Timing harness contrasting pairwise mask NMS with single-pass semantic NMS.

The scene is the pathological hedging case: disjoint base masks, each
cloned into identical lower-confidence duplicates. Pairwise suppression
must compare every candidate against the kept set (quadratic in the
detection count at a fixed image size), while the occupancy pass touches
each detection once. The image size stays constant across scene sizes so
per-operation pixel cost does not drift into the scaling measurement.
"""

from __future__ import annotations

import time
from statistics import median

import numpy as np

from .nms import mask_nms, semantic_nms, semantic_sort

SIDE = 128  # fixed canvas
CELL = 6  # px pitch between base masks
MASK = 4  # base mask square side
CATEGORY = 1


def build_hedged_scene(n: int, dup_factor: int = 4, seed: int = 0):
    """``n`` single-category detections on a fixed canvas.

    n/dup_factor disjoint base squares score in [0.9, 1.0); each base gets
    dup_factor-1 identical copies scoring in [0.1, 0.9). Ingestion order is
    shuffled. Returns (masks, scores, categories, semantic) where semantic
    maps the category to the union of base masks.
    """
    if n < dup_factor or n % dup_factor:
        raise ValueError(f"n must be a positive multiple of dup_factor, got {n}")
    n_base = n // dup_factor
    per_row = (SIDE - 2) // CELL
    if n_base > per_row * per_row:
        raise ValueError(f"{n_base} base masks do not fit the {SIDE}x{SIDE} canvas")
    rng = np.random.default_rng(seed)

    base_masks = []
    for i in range(n_base):
        m = np.zeros((SIDE, SIDE), dtype=bool)
        r = 1 + (i // per_row) * CELL
        c = 1 + (i % per_row) * CELL
        m[r:r + MASK, c:c + MASK] = True
        base_masks.append(m)

    masks, scores = [], []
    for i, base in enumerate(base_masks):
        masks.append(base)
        scores.append(rng.uniform(0.9, 1.0))
        for _ in range(dup_factor - 1):
            masks.append(base)
            scores.append(rng.uniform(0.1, 0.9))

    order = rng.permutation(n)
    masks = [masks[i] for i in order]
    scores = np.asarray(scores, dtype=np.float64)[order]
    categories = np.full(n, CATEGORY, dtype=np.int64)
    semantic = {CATEGORY: np.logical_or.reduce(base_masks)}
    return masks, scores, categories, semantic


def _run_mask(masks, scores, categories, semantic):
    return mask_nms(masks, scores, categories, iou_thr=0.5)


def _run_semantic(masks, scores, categories, semantic):
    working = {c: m.copy() for c, m in semantic.items()}
    order, _ = semantic_sort(masks, scores, categories, semantic)
    ordered = [masks[i] for i in order]
    cats = [int(categories[i]) for i in order]
    return semantic_nms(ordered, cats, working, thr=0.5)


BENCH_METHODS = {"mask": _run_mask, "semantic": _run_semantic}


def run_bench(sizes=(100, 400, 1600), dup_factor: int = 4, seed: int = 0,
              repeats: int = 5) -> list[dict]:
    """Median wall time per (size, method); rows ready for the CSV writer."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    rows = []
    for n in sizes:
        scene = build_hedged_scene(n, dup_factor, seed)
        for name, fn in BENCH_METHODS.items():
            times = []
            for _ in range(repeats):
                start = time.perf_counter()
                fn(*scene)
                times.append(time.perf_counter() - start)
            rows.append({"n": int(n), "method": name, "seconds": median(times)})
    return rows
