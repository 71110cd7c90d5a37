"""Hedging measures: duplicate confusion and naming error.

Duplicate confusion looks at one (image, category) group of detections at a
time. Detections whose masks overlap at IoU >= t form a graph; the
connectivity c_ij of two detections is the best achievable "weakest link"
confidence over simple paths between them, and the per-graph score averages
the confidence-weighted, relatively-scaled connectivity over all ordered
pairs. The dataset-level number averages that over a grid of IoU and
confidence thresholds, mirroring how mAP averages over IoU thresholds.

Naming error counts detections that localise some ground truth (category-
agnostic IoU >= 0.5 argmax match) but carry the wrong label, averaged over
the total number of ground truths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import agnostic_match_from_ious

DEFAULT_DC_IOU_THRS = tuple(np.arange(50, 100, 5) / 100.0)  # 0.50 .. 0.95
DEFAULT_DC_CONF_THRS = tuple(np.arange(1, 10) / 10.0)  # 0.1 .. 0.9


@dataclass(frozen=True)
class DcConfig:
    """Threshold grids for duplicate confusion."""

    iou_thrs: tuple[float, ...] = DEFAULT_DC_IOU_THRS
    conf_thrs: tuple[float, ...] = DEFAULT_DC_CONF_THRS

    def __post_init__(self):
        for v in (*self.iou_thrs, *self.conf_thrs):
            if not 0.0 < v < 1.0:
                raise ValueError(f"thresholds must lie in (0, 1), got {v}")
        if not self.iou_thrs or not self.conf_thrs:
            raise ValueError("threshold grids must be non-empty")


class DetectionGraph:
    """Overlap graph of one (image, category) detection group.

    Vertices are detections weighted by confidence; the adjacency holds
    edges between detections whose masks overlap at or above the build
    threshold. Undirected, no self-edges.
    """

    def __init__(self, confidences, adjacency):
        confidences = np.asarray(confidences, dtype=np.float64)
        adjacency = np.asarray(adjacency, dtype=bool)
        m = confidences.shape[0]
        if adjacency.shape != (m, m):
            raise ValueError(f"adjacency shape {adjacency.shape} does not match {m} vertices")
        if m and (adjacency.diagonal().any() or not np.array_equal(adjacency, adjacency.T)):
            raise ValueError("adjacency must be symmetric with an empty diagonal")
        self.confidences = confidences
        self.adjacency = adjacency

    @classmethod
    def from_ious(cls, confidences, pair_ious, iou_thr: float) -> "DetectionGraph":
        """Build from a pairwise detection IoU matrix."""
        pair_ious = np.asarray(pair_ious, dtype=np.float64)
        adj = pair_ious >= iou_thr
        np.fill_diagonal(adj, False)
        return cls(confidences, adj)

    def __len__(self) -> int:
        return len(self.confidences)


def bottleneck_connectivity(g: DetectionGraph) -> np.ndarray:
    """All-pairs maximum-bottleneck connectivity over vertex confidences.

    The bottleneck of a path is the minimum confidence over all its
    vertices, endpoints included. For paths of length >= 1 that equals the
    minimum edge strength min(tau_u, tau_v) along the path, so the maximum
    over paths is realised on a maximum spanning forest of edge strengths:
    process edges strongest-first with union-find and record the merge
    strength for every newly connected pair. Unconnected pairs stay 0.
    """
    m = len(g)
    c = np.zeros((m, m))
    if m < 2:
        return c
    taus = g.confidences
    ii, jj = np.nonzero(np.triu(g.adjacency, k=1))
    if ii.size == 0:
        return c
    strength = np.minimum(taus[ii], taus[jj])
    order = np.argsort(-strength, kind="stable")

    parent = list(range(m))
    members: list[list[int]] = [[v] for v in range(m)]

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in order:
        ra, rb = find(ii[e]), find(jj[e])
        if ra == rb:
            continue
        if len(members[ra]) < len(members[rb]):
            ra, rb = rb, ra
        a, b = members[ra], members[rb]
        c[np.ix_(a, b)] = strength[e]
        c[np.ix_(b, a)] = strength[e]
        parent[rb] = ra
        members[ra] = a + b
        members[rb] = []
    return c


def dc_single(g: DetectionGraph) -> float:
    """Duplicate confusion of one graph: mean over detections i of
    sum_{j != i} tau_j * c_ij / tau_i."""
    m = len(g)
    if m == 0:
        return 0.0
    taus = g.confidences
    c = bottleneck_connectivity(g)
    return float((c * taus[None, :] / taus[:, None]).sum() / m)


@dataclass
class DcResult:
    """Grid breakdown of duplicate confusion.

    ``grid[ti][vi]`` is the mean per-cell score at iou_thrs[ti],
    conf_thrs[vi]; ``cells[ti][vi]`` counts the (image, category) cells
    that still held a detection there. A threshold combination with no
    populated cells scores 0 (emitting nothing trivially gives zero
    duplicate confusion).
    """

    dc: float
    grid: list[list[float]]
    cells: list[list[int]]
    config: DcConfig = field(default_factory=DcConfig)


def duplicate_confusion(groups, cfg: DcConfig | None = None) -> DcResult:
    """Aggregate duplicate confusion over (image, category) groups.

    ``groups`` is an iterable of (confidences, pair_ious) pairs, one per
    (image, category) cell with at least one detection; ``pair_ious`` is the
    full pairwise IoU matrix of that cell's detection masks.
    """
    cfg = cfg or DcConfig()
    groups = [(np.asarray(s, dtype=np.float64), np.asarray(m, dtype=np.float64)) for s, m in groups]
    grid = [[0.0] * len(cfg.conf_thrs) for _ in cfg.iou_thrs]
    cells = [[0] * len(cfg.conf_thrs) for _ in cfg.iou_thrs]
    for vi, v in enumerate(cfg.conf_thrs):
        filtered = []
        for scores, ious in groups:
            keep = np.flatnonzero(scores >= v)
            if keep.size:
                filtered.append((scores[keep], ious[np.ix_(keep, keep)]))
        for ti, t in enumerate(cfg.iou_thrs):
            values = [dc_single(DetectionGraph.from_ious(s, m, t)) for s, m in filtered]
            cells[ti][vi] = len(values)
            grid[ti][vi] = float(np.mean(values)) if values else 0.0
    dc = float(np.mean([v for row in grid for v in row]))
    return DcResult(dc=dc, grid=grid, cells=cells, config=cfg)


@dataclass
class NeResult:
    ne: float | None  # None when the image set has no ground truths
    mismatches: int
    n_gt: int


def naming_error(image_items) -> NeResult:
    """Naming error over an image set.

    ``image_items`` yields (det_gt_ious, det_labels, gt_labels) per image,
    where ``det_gt_ious`` is the category-agnostic (n_det, n_gt) IoU matrix
    of all detections against all ground truths of that image.
    """
    mismatches = 0
    n_gt = 0
    for ious, det_labels, gt_labels in image_items:
        n_gt += len(gt_labels)
        assignment = agnostic_match_from_ious(np.asarray(ious, dtype=np.float64))
        for j, gi in enumerate(assignment):
            if gi is not None and det_labels[j] != gt_labels[gi]:
                mismatches += 1
    return NeResult(
        ne=mismatches / n_gt if n_gt else None,
        mismatches=mismatches,
        n_gt=n_gt,
    )
