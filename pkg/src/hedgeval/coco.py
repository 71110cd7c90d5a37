"""COCO-format file I/O: ground-truth annotations, detection results, and
per-category semantic masks.

All masks are validated at ingestion (dimensions, pixel-count consistency,
non-emptiness) so downstream metric code never sees malformed data, and
errors carry the offending annotation/record so bad files are debuggable.
Rejected detection records are counted rather than silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mask import MalformedRleError, RleMask, decode, decompress_leb, encode, rasterize_polygon

DERIVE_FROM_GT = "derive-from-gt"
DERIVE_FROM_DT = "derive-from-dt"


class LoadError(ValueError):
    """A file failed structural validation at ingestion."""


@dataclass(frozen=True)
class ImageInfo:
    id: int
    height: int
    width: int


@dataclass(frozen=True)
class CategoryInfo:
    id: int
    name: str


@dataclass(frozen=True)
class GroundTruthInstance:
    image_id: int
    instance_id: int
    category_id: int
    mask: RleMask


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    score: float
    mask: RleMask


@dataclass
class SemanticMaskSet:
    """One dense binary mask per category for a single image."""

    image_id: int
    masks: dict[int, np.ndarray]

    def mask_for(self, category_id: int, height: int, width: int) -> np.ndarray:
        got = self.masks.get(category_id)
        return got if got is not None else np.zeros((height, width), dtype=bool)


@dataclass
class Dataset:
    images: dict[int, ImageInfo]
    categories: dict[int, CategoryInfo]
    gts_by_image: dict[int, list[GroundTruthInstance]]

    @property
    def n_ground_truths(self) -> int:
        return sum(len(v) for v in self.gts_by_image.values())


@dataclass
class DetectionLoadResult:
    by_image: dict[int, list[Detection]]
    rejected_bad_score: int = 0
    rejected_empty_mask: int = 0

    @property
    def n_loaded(self) -> int:
        return sum(len(v) for v in self.by_image.values())


def _require(record: dict, keys, what: str):
    for k in keys:
        if k not in record:
            raise LoadError(f"{what} is missing required field '{k}'")


def decode_segmentation(seg, height: int, width: int) -> RleMask:
    """Accept compressed RLE, raw-counts RLE, or a polygon list."""
    if isinstance(seg, dict):
        _require(seg, ("size", "counts"), "segmentation object")
        h, w = (int(v) for v in seg["size"])
        if (h, w) != (height, width):
            raise LoadError(f"segmentation size {h}x{w} does not match image {height}x{width}")
        if isinstance(seg["counts"], str):
            return decompress_leb(seg["counts"], h, w)
        return RleMask(h, w, tuple(int(c) for c in seg["counts"]))
    if isinstance(seg, list):
        if not seg or not all(isinstance(p, list) for p in seg):
            raise LoadError("polygon segmentation must be a non-empty list of coordinate lists")
        dense = np.zeros((height, width), dtype=bool)
        for poly in seg:
            dense |= rasterize_polygon(poly, height, width)
        return encode(dense)
    raise LoadError(f"unsupported segmentation of type {type(seg).__name__}")


def load_ground_truth(path) -> Dataset:
    """Read a COCO annotation file into the validated domain model."""
    with open(path) as f:
        raw = json.load(f)
    _require(raw, ("images", "annotations", "categories"), f"annotation file {path}")

    images: dict[int, ImageInfo] = {}
    for rec in raw["images"]:
        _require(rec, ("id", "height", "width"), "image record")
        info = ImageInfo(int(rec["id"]), int(rec["height"]), int(rec["width"]))
        images[info.id] = info
    categories: dict[int, CategoryInfo] = {}
    for rec in raw["categories"]:
        _require(rec, ("id", "name"), "category record")
        categories[int(rec["id"])] = CategoryInfo(int(rec["id"]), str(rec["name"]))

    gts_by_image: dict[int, list[GroundTruthInstance]] = {i: [] for i in images}
    for rec in raw["annotations"]:
        _require(rec, ("id", "image_id", "category_id", "segmentation"), "annotation")
        ann_id = rec["id"]
        try:
            if int(rec.get("iscrowd", 0)):
                raise LoadError("iscrowd annotations are not supported")
            image_id = int(rec["image_id"])
            category_id = int(rec["category_id"])
            if image_id not in images:
                raise LoadError(f"references unknown image {image_id}")
            if category_id not in categories:
                raise LoadError(f"references unknown category {category_id}")
            img = images[image_id]
            mask = decode_segmentation(rec["segmentation"], img.height, img.width)
            if mask.area == 0:
                raise LoadError("mask is empty")
        except (LoadError, MalformedRleError, ValueError) as e:
            raise LoadError(f"annotation {ann_id}: {e}") from e
        gts_by_image[image_id].append(
            GroundTruthInstance(image_id, int(ann_id), category_id, mask)
        )
    return Dataset(images, categories, gts_by_image)


def load_detections(path, dataset: Dataset) -> DetectionLoadResult:
    """Read a COCO results array, validating against the dataset tables."""
    with open(path) as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise LoadError(f"detection file {path} must hold a JSON array")
    out = DetectionLoadResult({i: [] for i in dataset.images})
    for idx, rec in enumerate(raw):
        _require(rec, ("image_id", "category_id", "score", "segmentation"), f"detection {idx}")
        try:
            image_id = int(rec["image_id"])
            category_id = int(rec["category_id"])
            if image_id not in dataset.images:
                raise LoadError(f"references unknown image {image_id}")
            if category_id not in dataset.categories:
                raise LoadError(f"references unknown category {category_id}")
            score = float(rec["score"])
            img = dataset.images[image_id]
            mask = decode_segmentation(rec["segmentation"], img.height, img.width)
        except (LoadError, MalformedRleError, ValueError) as e:
            raise LoadError(f"detection {idx}: {e}") from e
        if not 0.0 <= score <= 1.0:
            out.rejected_bad_score += 1
            continue
        if mask.area == 0:
            out.rejected_empty_mask += 1
            continue
        out.by_image[image_id].append(Detection(image_id, category_id, score, mask))
    return out


def _union_masks(image: ImageInfo, groups) -> dict[int, np.ndarray]:
    masks: dict[int, np.ndarray] = {}
    for category_id, rles in groups.items():
        dense = np.zeros((image.height, image.width), dtype=bool)
        for r in rles:
            dense |= decode(r)
        masks[category_id] = dense
    return masks


def load_semantic_masks(source, dataset: Dataset, detections: dict[int, list[Detection]] | None = None,
                        conf_floor: float = 0.5) -> dict[int, SemanticMaskSet]:
    """Produce one SemanticMaskSet per dataset image.

    ``source`` is a directory path (layout semantic/<image_id>/<category_id>.json,
    one RLE object per file; absent files mean an empty mask), or one of the
    modes 'derive-from-gt' (union of GT masks per category) and
    'derive-from-dt' (union of detection masks per category with score >=
    conf_floor, requires ``detections``).
    """
    out: dict[int, SemanticMaskSet] = {}
    if source == DERIVE_FROM_GT:
        for image_id, img in dataset.images.items():
            groups: dict[int, list[RleMask]] = {}
            for gt in dataset.gts_by_image[image_id]:
                groups.setdefault(gt.category_id, []).append(gt.mask)
            out[image_id] = SemanticMaskSet(image_id, _union_masks(img, groups))
        return out
    if source == DERIVE_FROM_DT:
        if detections is None:
            raise ValueError("derive-from-dt requires detections")
        for image_id, img in dataset.images.items():
            groups = {}
            for det in detections.get(image_id, []):
                if det.score >= conf_floor:
                    groups.setdefault(det.category_id, []).append(det.mask)
            out[image_id] = SemanticMaskSet(image_id, _union_masks(img, groups))
        return out

    root = Path(source)
    for image_id, img in dataset.images.items():
        img_dir = root / str(image_id)
        if not img_dir.is_dir():
            raise LoadError(f"semantic mask directory missing image entry {img_dir}")
        masks: dict[int, np.ndarray] = {}
        for category_id in dataset.categories:
            fp = img_dir / f"{category_id}.json"
            if not fp.exists():
                continue
            with open(fp) as f:
                seg = json.load(f)
            try:
                rle = decode_segmentation(seg, img.height, img.width)
            except (LoadError, MalformedRleError, ValueError) as e:
                raise LoadError(f"semantic mask {fp}: {e}") from e
            masks[category_id] = decode(rle)
        out[image_id] = SemanticMaskSet(image_id, masks)
    return out


def detection_to_json(det: Detection) -> dict:
    return {
        "image_id": det.image_id,
        "category_id": det.category_id,
        "score": det.score,
        "segmentation": det.mask.to_json(),
    }


def write_detections(dets, path) -> None:
    """Write detections as a COCO results array (load_detections inverse)."""
    records = [detection_to_json(d) for d in dets]
    with open(path, "w") as f:
        json.dump(records, f)


def write_ground_truth(dataset: Dataset, path) -> None:
    """Write a Dataset as a COCO annotation file (load_ground_truth inverse)."""
    raw = {
        "images": [
            {"id": i.id, "height": i.height, "width": i.width}
            for i in dataset.images.values()
        ],
        "annotations": [
            {
                "id": gt.instance_id,
                "image_id": gt.image_id,
                "category_id": gt.category_id,
                "iscrowd": 0,
                "area": gt.mask.area,
                "segmentation": gt.mask.to_json(),
            }
            for gts in dataset.gts_by_image.values()
            for gt in gts
        ],
        "categories": [{"id": c.id, "name": c.name} for c in dataset.categories.values()],
    }
    with open(path, "w") as f:
        json.dump(raw, f)


def write_semantic_masks(sets, out_dir) -> None:
    """Write SemanticMaskSets in the directory layout load_semantic_masks reads.

    Empty category masks are skipped; absence and all-zero are equivalent
    on the read side.
    """
    root = Path(out_dir)
    for sem in sets:
        img_dir = root / str(sem.image_id)
        img_dir.mkdir(parents=True, exist_ok=True)
        for category_id in sorted(sem.masks):
            dense = sem.masks[category_id]
            if not dense.any():
                continue
            with open(img_dir / f"{category_id}.json", "w") as f:
                json.dump(encode(dense).to_json(), f)


def write_report(report: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
