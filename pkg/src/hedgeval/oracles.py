"""Brute-force reference implementations.

Everything here restates a production computation from first principles,
with no shared acceleration structures, so the two can be checked against
each other. The test suite is the primary consumer; ``eval --verify``
reruns a sample of user data through these and fails loudly on divergence.
Performance is deliberately not a concern.
"""

from __future__ import annotations

import numpy as np

from .hedging import DetectionGraph
from .matching import MatchResult


def bottleneck_bruteforce(g: DetectionGraph) -> np.ndarray:
    """All-pairs max-over-paths min-confidence by enumerating simple paths.

    Feasible for graphs up to ~8 vertices; the DFS walks every simple path
    from every source, tracking the running minimum vertex confidence.
    """
    m = len(g.confidences)
    taus = np.asarray(g.confidences, dtype=np.float64)
    adj = [np.flatnonzero(g.adjacency[i]).tolist() for i in range(m)]
    best = np.zeros((m, m))
    visited = [False] * m

    def walk(start: int, node: int, low: float):
        for nxt in adj[node]:
            if visited[nxt]:
                continue
            reach = min(low, taus[nxt])
            if reach > best[start, nxt]:
                best[start, nxt] = reach
            visited[nxt] = True
            walk(start, nxt, reach)
            visited[nxt] = False

    for s in range(m):
        visited[s] = True
        walk(s, s, taus[s])
        visited[s] = False
    return best


def dc_bruteforce(g: DetectionGraph) -> float:
    """Duplicate confusion of one graph, expanded term by term."""
    taus = np.asarray(g.confidences, dtype=np.float64)
    m = len(taus)
    if m == 0:
        return 0.0
    c = bottleneck_bruteforce(g)
    total = 0.0
    for i in range(m):
        for j in range(m):
            if j != i:
                total += taus[j] * c[i, j] / taus[i]
    return total / m


def ap_naive(is_tp, n_gt: int) -> float | None:
    """101-point interpolated AP recomputed from scratch at each sample.

    ``is_tp`` is the TP/FP flag sequence in rank (descending confidence)
    order. For every recall sample the precision is re-counted directly
    over the prefix ranks, then the max over qualifying ranks is taken.
    """
    if n_gt == 0:
        return None
    flags = list(is_tp)
    total = 0.0
    for sample in range(101):
        r = sample / 100.0
        best = 0.0
        tp = 0
        for rank, flag in enumerate(flags, start=1):
            if flag:
                tp += 1
            if tp / n_gt >= r:
                best = max(best, tp / rank)
        total += best
    return total / 101.0


def match_bruteforce(det_masks, det_scores, gt_masks, iou_thr: float) -> MatchResult:
    """Literal transcription of the greedy matching definition.

    Selection sort over confidences, per-pair pixel counting for IoU,
    nothing shared with the production path.
    """
    n_det, n_gt = len(det_masks), len(gt_masks)
    remaining = list(range(n_det))
    det_to_gt: list[int | None] = [None] * n_det
    det_iou = [0.0] * n_det
    gt_to_det: list[int | None] = [None] * n_gt
    taken = set()
    while remaining:
        # highest confidence first; earliest ingestion wins ties
        d = max(remaining, key=lambda k: (det_scores[k], -k))
        remaining.remove(d)
        best_gt, best_iou = None, 0.0
        for gi in range(n_gt):
            if gi in taken:
                continue
            inter = int(np.count_nonzero(det_masks[d] & gt_masks[gi]))
            union = int(np.count_nonzero(det_masks[d] | gt_masks[gi]))
            v = inter / union if union else 0.0
            if v >= iou_thr and (best_gt is None or v > best_iou):
                best_gt, best_iou = gi, v
        if best_gt is not None:
            taken.add(best_gt)
            det_to_gt[d] = best_gt
            det_iou[d] = best_iou
            gt_to_det[best_gt] = d
    return MatchResult(det_to_gt, det_iou, gt_to_det)
