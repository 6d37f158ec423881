"""File formats: annotations (JSON), proposals (CSV), heat maps (PGM/CSV).

Annotations follow a minimal COCO-style layout with ``bbox = [x, y, w, h]``;
in memory every box is ``[x1, y1, x2, y2]``.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROPOSAL_HEADER = ["image_id", "x1", "y1", "x2", "y2", "score"]


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class ImageRecord:
    id: int
    width: float
    height: float
    gts: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    categories: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _num(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError(f"{what}: expected a number, got {value!r}")
    if not np.isfinite(value):
        raise DataError(f"{what}: value is not finite")
    return float(value)


def read_annotations(path) -> dict[int, ImageRecord]:
    """Parse an annotation file into ``{image_id: ImageRecord}`` (sorted by id)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise DataError(f"{path}: expected an object with an 'images' list")
    anns = doc.get("annotations", [])
    if not isinstance(anns, list):
        raise DataError(f"{path}: 'annotations' must be a list")

    images: dict[int, ImageRecord] = {}
    for k, rec in enumerate(doc["images"]):
        if not isinstance(rec, dict) or not {"id", "width", "height"} <= set(rec):
            raise DataError(f"images[{k}]: needs id, width and height")
        img_id = rec["id"]
        if isinstance(img_id, bool) or not isinstance(img_id, int):
            raise DataError(f"images[{k}]: id must be an integer, got {img_id!r}")
        if img_id in images:
            raise DataError(f"images[{k}]: duplicate image id {img_id}")
        w = _num(rec["width"], f"images[{k}] (id {img_id}) width")
        h = _num(rec["height"], f"images[{k}] (id {img_id}) height")
        if w <= 0 or h <= 0:
            raise DataError(f"images[{k}] (id {img_id}): non-positive size {w}x{h}")
        images[img_id] = ImageRecord(img_id, w, h)

    boxes: dict[int, list] = {i: [] for i in images}
    cats: dict[int, list] = {i: [] for i in images}
    for k, rec in enumerate(anns):
        if not isinstance(rec, dict) or not {"image_id", "bbox"} <= set(rec):
            raise DataError(f"annotations[{k}]: needs image_id and bbox")
        img_id = rec["image_id"]
        if img_id not in images:
            raise DataError(f"annotations[{k}]: dangling image_id {img_id!r} (no such image)")
        bbox = rec["bbox"]
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise DataError(f"annotations[{k}]: bbox must be [x, y, w, h]")
        x, y, w, h = (_num(v, f"annotations[{k}] bbox") for v in bbox)
        if w <= 0 or h <= 0:
            raise DataError(f"annotations[{k}] (image {img_id}): negative or zero bbox size w={w} h={h}")
        boxes[img_id].append([x, y, x + w, y + h])
        cats[img_id].append(int(rec.get("category_id", 0)))

    for i, img in images.items():
        img.gts = np.asarray(boxes[i], dtype=np.float64).reshape(-1, 4)
        img.categories = np.asarray(cats[i], dtype=np.int64)
    return dict(sorted(images.items()))


def write_annotations(path, images) -> None:
    """Write ``ImageRecord`` objects (or anything with the same attributes)."""
    out_images, out_anns = [], []
    for img in sorted(images, key=lambda r: r.id):
        out_images.append({"id": int(img.id), "width": _plain(img.width), "height": _plain(img.height)})
        cats = getattr(img, "categories", None)
        for j, (x1, y1, x2, y2) in enumerate(np.asarray(img.gts, dtype=np.float64).reshape(-1, 4)):
            out_anns.append({
                "image_id": int(img.id),
                "bbox": [_plain(x1), _plain(y1), _plain(x2 - x1), _plain(y2 - y1)],
                "category_id": int(cats[j]) if cats is not None and len(cats) > j else 0,
            })
    doc = {"images": out_images, "annotations": out_anns}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _plain(v):
    """Integers stay integers in JSON, other floats keep full precision."""
    v = float(v)
    return int(v) if v.is_integer() else v


def write_proposals(path, proposals: dict) -> None:
    """``proposals`` maps image id to ``(boxes, scores)``.

    Images are written in ascending id order and rows within an image in
    descending score order (stable, so equal scores keep their input order).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROPOSAL_HEADER)
        for img_id in sorted(proposals):
            boxes, scores = proposals[img_id]
            boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
            scores = np.asarray(scores, dtype=np.float64).reshape(-1)
            for i in np.argsort(-scores, kind="stable"):
                w.writerow([img_id, *(repr(float(v)) for v in boxes[i]), repr(float(scores[i]))])


def read_proposals(path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Parse a proposal CSV into ``{image_id: (boxes, scores)}``, rows kept in file order."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header != PROPOSAL_HEADER:
        raise DataError(f"{path}: expected header {','.join(PROPOSAL_HEADER)}, got {header}")
    table = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # header-only files
        try:
            table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError:
            pass
    if table is None or table.shape[1] != 6 or not _table_ok(table):
        table = _parse_rows(path)  # slow path, raises a line-specific diagnostic
    ids = table[:, 0].astype(np.int64)
    order = np.argsort(ids, kind="stable")
    keys, starts = np.unique(ids[order], return_index=True)
    out = {}
    for img_id, rows in zip(keys, np.split(table[order], starts[1:])):
        out[int(img_id)] = (rows[:, 1:5].copy(), rows[:, 5].copy())
    return out


def _table_ok(table: np.ndarray) -> bool:
    return bool(
        np.all(np.isfinite(table))
        and np.all(table[:, 0] == np.round(table[:, 0]))
        and np.all(table[:, 3] >= table[:, 1])
        and np.all(table[:, 4] >= table[:, 2])
    )


def _parse_rows(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise DataError(f"{path}:{line}: expected 6 fields, got {len(row)}")
            try:
                img_id = int(row[0])
                x1, y1, x2, y2, s = (float(v) for v in row[1:])
            except ValueError:
                raise DataError(f"{path}:{line}: unparseable row {row}") from None
            if not np.all(np.isfinite([x1, y1, x2, y2, s])):
                raise DataError(f"{path}:{line}: non-finite value")
            if x2 < x1 or y2 < y1:
                raise DataError(f"{path}:{line}: box has negative size ({x1}, {y1}, {x2}, {y2})")
            rows.append((img_id, x1, y1, x2, y2, s))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 6)


def quantize(grid) -> np.ndarray:
    """Map values in [0, 1] to bytes with ``round(v * 255)`` (halves round up)."""
    g = np.clip(np.asarray(grid, dtype=np.float64), 0.0, 1.0)
    return np.floor(g * 255 + 0.5).astype(np.uint8)


def write_heatmap(grid, path, fmt: str = "pgm") -> None:
    """Write a 2-D grid as binary PGM (P5, maxval 255) or as CSV floats."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"heat map must be 2-D, got shape {g.shape}")
    if fmt == "pgm":
        h, w = g.shape
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + quantize(g).tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in g:
                w.writerow([repr(float(v)) for v in row])
    else:
        raise ValueError(f"unknown heat map format {fmt!r} (use 'pgm' or 'csv')")


def read_heatmap(path) -> np.ndarray:
    """Read a heat map written by :func:`write_heatmap`; PGM values come back in [0, 1]."""
    data = Path(path).read_bytes()
    if data.startswith(b"P5"):
        parts = data.split(maxsplit=4)
        w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
        pixels = np.frombuffer(parts[4], dtype=np.uint8, count=w * h)
        return pixels.reshape(h, w) / maxval
    return np.loadtxt(path, delimiter=",", ndmin=2)
