"""Synthetic part-counting scenes for exercising the metrics end to end.

Each image drops a fixed number of rigid elongated parts (capsules: a
rectangle with semicircular caps) near the image center. Parts are placed
sequentially, so a later part occludes everything under it; a ground-truth
mask holds only the part's visible pixels, and parts occluded down to zero
pixels are dropped. All parts share the single category "nail".

``perfect_detector`` turns the ground truth back into detections, optionally
injecting controlled hedging: low-confidence spatially-jittered duplicates
and/or wrong-category copies of each instance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .coco import (
    CategoryInfo,
    Dataset,
    Detection,
    GroundTruthInstance,
    ImageInfo,
    SemanticMaskSet,
    write_ground_truth,
    write_semantic_masks,
)
from .mask import decode, encode

CATEGORY_ID = 1
CATEGORY_NAME = "nail"

PLACEMENT_TRIES = 10_000

# A duplicate that no longer overlaps what it duplicates is just noise, and
# heavily occluded slivers can lose most of their pixels under a fixed-size
# shift. Jitter offsets are retried until the copy still resembles the
# original at this IoU, falling back to an exact copy.
JITTER_MIN_IOU = 0.55


@dataclass(frozen=True)
class SynthConfig:
    """Resolved generator parameters; echoed verbatim into config.json."""

    n_images: int = 100
    parts_per_image: int = 10
    height: int = 256
    width: int = 256
    sigma_frac: float = 1.0 / 6.0
    length_range: tuple[float, float] = (48.0, 72.0)
    width_range: tuple[float, float] = (6.0, 10.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("n_images must be at least 1")
        if self.parts_per_image < 1:
            raise ValueError("parts_per_image must be at least 1")
        if self.height < 1 or self.width < 1:
            raise ValueError("image size must be positive")
        if not self.sigma_frac > 0:
            raise ValueError("sigma_frac must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name, (lo, hi) in (("length_range", self.length_range),
                               ("width_range", self.width_range)):
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got ({lo}, {hi})")
        if self.width_range[0] <= 0:
            raise ValueError("part width must be positive")
        # A capsule's total extent is length + width (the caps add width/2
        # at each end), so the largest part must fit inside the image.
        extent = self.length_range[1] + self.width_range[1]
        if extent >= min(self.height, self.width):
            raise ValueError(
                f"part larger than image: max extent {extent} does not fit "
                f"inside {self.height}x{self.width}"
            )


def render_capsule(height: int, width: int, cx: float, cy: float,
                   length: float, cap_width: float, theta: float) -> np.ndarray:
    """Rasterize a capsule: pixels whose center lies within cap_width/2 of
    the spine segment. The spine has the given length, is centered on
    (cx, cy), and is rotated by theta radians."""
    half, r = length / 2.0, cap_width / 2.0
    ux, uy = np.cos(theta), np.sin(theta)
    p0 = (cx - half * ux, cy - half * uy)
    p1 = (cx + half * ux, cy + half * uy)

    xmin, xmax = min(p0[0], p1[0]) - r, max(p0[0], p1[0]) + r
    ymin, ymax = min(p0[1], p1[1]) - r, max(p0[1], p1[1]) + r
    c0 = max(0, int(np.floor(xmin - 0.5)))
    c1 = min(width - 1, int(np.ceil(xmax + 0.5)))
    r0 = max(0, int(np.floor(ymin - 0.5)))
    r1 = min(height - 1, int(np.ceil(ymax + 0.5)))
    out = np.zeros((height, width), dtype=bool)
    if c1 < c0 or r1 < r0:
        return out

    xs = np.arange(c0, c1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(r0, r1 + 1, dtype=np.float64) + 0.5
    px = xs[None, :] - p0[0]
    py = ys[:, None] - p0[1]
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    seg_len2 = vx * vx + vy * vy
    if seg_len2 > 0:
        t = np.clip((px * vx + py * vy) / seg_len2, 0.0, 1.0)
    else:
        t = 0.0
    dx = px - t * vx
    dy = py - t * vy
    out[r0:r1 + 1, c0:c1 + 1] = dx * dx + dy * dy <= r * r
    return out


def _place(cfg: SynthConfig, rng: np.random.Generator,
           length: float, cap_width: float, theta: float) -> tuple[float, float]:
    """Sample a center from the truncated normal by rejection: resample until
    the whole capsule lies inside the image."""
    half, r = length / 2.0, cap_width / 2.0
    ext_x = half * abs(np.cos(theta)) + r
    ext_y = half * abs(np.sin(theta)) + r
    for _ in range(PLACEMENT_TRIES):
        cx = rng.normal(cfg.width / 2.0, cfg.sigma_frac * cfg.width)
        cy = rng.normal(cfg.height / 2.0, cfg.sigma_frac * cfg.height)
        if ext_x <= cx <= cfg.width - ext_x and ext_y <= cy <= cfg.height - ext_y:
            return cx, cy
    raise RuntimeError(
        f"could not place a part inside the {cfg.height}x{cfg.width} image "
        f"after {PLACEMENT_TRIES} tries"
    )


def generate_image(cfg: SynthConfig, image_index: int) -> list[np.ndarray]:
    """Visible-pixel masks of one scene, in draw order, empties dropped.

    Each image has its own RNG stream derived from (seed, image_index), so
    results do not depend on how generation is scheduled across images.
    """
    rng = np.random.default_rng((cfg.seed, image_index))
    canvas = np.zeros((cfg.height, cfg.width), dtype=np.int32)
    for part in range(cfg.parts_per_image):
        length = rng.uniform(*cfg.length_range)
        cap_width = rng.uniform(*cfg.width_range)
        theta = rng.uniform(0.0, np.pi)
        cx, cy = _place(cfg, rng, length, cap_width, theta)
        canvas[render_capsule(cfg.height, cfg.width, cx, cy, length, cap_width, theta)] = part + 1
    visible = []
    for part in range(cfg.parts_per_image):
        m = canvas == part + 1
        if m.any():
            visible.append(m)
    return visible


def generate(cfg: SynthConfig, out_dir=None) -> tuple[Dataset, dict[int, SemanticMaskSet]]:
    """Build the dataset and per-image semantic masks (union of GT pixels).

    When ``out_dir`` is given, writes annotations.json, a semantic/ mask
    directory, and config.json there.
    """
    images: dict[int, ImageInfo] = {}
    gts_by_image: dict[int, list[GroundTruthInstance]] = {}
    semantic: dict[int, SemanticMaskSet] = {}
    ann_id = 1
    for index in range(cfg.n_images):
        image_id = index + 1
        images[image_id] = ImageInfo(image_id, cfg.height, cfg.width)
        gts = []
        union = np.zeros((cfg.height, cfg.width), dtype=bool)
        for m in generate_image(cfg, index):
            gts.append(GroundTruthInstance(image_id, ann_id, CATEGORY_ID, encode(m)))
            ann_id += 1
            union |= m
        gts_by_image[image_id] = gts
        masks = {CATEGORY_ID: union} if union.any() else {}
        semantic[image_id] = SemanticMaskSet(image_id, masks)

    dataset = Dataset(images, {CATEGORY_ID: CategoryInfo(CATEGORY_ID, CATEGORY_NAME)},
                      gts_by_image)
    if out_dir is not None:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        write_ground_truth(dataset, root / "annotations.json")
        write_semantic_masks(semantic.values(), root / "semantic")
        with open(root / "config.json", "w") as f:
            json.dump(asdict(cfg), f, indent=2)
            f.write("\n")
    return dataset, semantic


def shift_mask(mask: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate a mask by whole pixels, filling vacated space with zeros."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    out[max(dy, 0):h + min(dy, 0), max(dx, 0):w + min(dx, 0)] = \
        mask[max(-dy, 0):h + min(-dy, 0), max(-dx, 0):w + min(-dx, 0)]
    return out


def _jittered(dense: np.ndarray, rng: np.random.Generator, jitter_px: int) -> np.ndarray:
    offsets = [(dy, dx)
               for dy in range(-jitter_px, jitter_px + 1)
               for dx in range(-jitter_px, jitter_px + 1)
               if (dy, dx) != (0, 0)]
    area = np.count_nonzero(dense)
    for i in rng.permutation(len(offsets)):
        dy, dx = offsets[i]
        shifted = shift_mask(dense, dy, dx)
        inter = np.count_nonzero(shifted & dense)
        union = area + np.count_nonzero(shifted) - inter
        if union and inter / union >= JITTER_MIN_IOU:
            return shifted
    return dense.copy()


def perfect_detector(dataset: Dataset, spatial_copies: int = 0,
                     category_noise: float = 0.0, conf_step: float = 0.05,
                     jitter_px: int = 2, seed: int = 0) -> dict[int, list[Detection]]:
    """Emit every GT mask as a confidence-1.0 detection, plus optional hedges.

    Spatial hedging adds ``spatial_copies`` jittered duplicates per instance
    at confidence 1.0 - conf_step*rank (rank 1..k), all below every original.
    Category hedging adds, with probability ``category_noise`` per instance,
    one exact-mask copy relabeled to another category from the dataset table.
    """
    if spatial_copies < 0:
        raise ValueError("spatial_copies must be non-negative")
    if not 0.0 <= category_noise <= 1.0:
        raise ValueError("category_noise must lie in [0, 1]")
    if jitter_px < 1:
        raise ValueError("jitter_px must be at least 1")
    max_rank = spatial_copies + (1 if category_noise > 0 else 0)
    if conf_step <= 0 or conf_step * max_rank >= 1:
        raise ValueError(
            f"conf_step {conf_step} with {max_rank} hedges per instance pushes "
            "confidences out of (0, 1]"
        )
    if category_noise > 0 and len(dataset.categories) < 2:
        raise ValueError("category_noise requires at least two categories in the dataset")

    out: dict[int, list[Detection]] = {}
    for image_id in dataset.images:
        gts = dataset.gts_by_image.get(image_id, [])
        rng = np.random.default_rng((seed, image_id, 1))
        dets = [Detection(image_id, gt.category_id, 1.0, gt.mask) for gt in gts]
        for gt in gts:
            dense = decode(gt.mask)
            rank = 0
            for _ in range(spatial_copies):
                rank += 1
                copy = encode(_jittered(dense, rng, jitter_px))
                dets.append(Detection(image_id, gt.category_id, 1.0 - conf_step * rank, copy))
            if category_noise > 0 and rng.random() < category_noise:
                rank += 1
                others = sorted(c for c in dataset.categories if c != gt.category_id)
                wrong = others[rng.integers(len(others))]
                dets.append(Detection(image_id, wrong, 1.0 - conf_step * rank, gt.mask))
        out[image_id] = dets
    return out
