"""Dataset ingestion: MNIST-style IDX pairs, label-first CSV, synthetic blobs.

Data source specs (used by the CLI) are compact strings:
    idx:IMAGES,LABELS[,SCALE]       IDX image/label pair, default scale 1/255
    csv:PATH                        label,feature,feature,... per line
    synth:KEY=VAL,...               keys: n (per class), centers (preset
                                    "grid2d:C"), dim, classes, sigma, seed
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError, UsageError
from .propcert import LabeledDataset

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, n, path, offset):
    buf = fh.read(n)
    if len(buf) != n:
        raise ParseError(f"{path}: truncated at byte offset {offset} "
                         f"(wanted {n} bytes, got {len(buf)})")
    return buf


def load_idx_images(path) -> np.ndarray:
    """Raw IDX image tensor as n x (rows*cols) uint8, flattened row-major."""
    with _open_maybe_gzip(path) as fh:
        header = _read_exact(fh, 16, path, 0)
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise ParseError(f"{path}: bad magic 0x{magic:08x} at offset 0 "
                             f"(expected 0x{IDX_IMAGES_MAGIC:08x})")
        payload = _read_exact(fh, count * rows * cols, path, 16)
        extra = fh.read(1)
    if extra:
        raise ParseError(f"{path}: trailing bytes after payload "
                         f"(offset {16 + count * rows * cols})")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)


def load_idx_labels(path) -> np.ndarray:
    with _open_maybe_gzip(path) as fh:
        header = _read_exact(fh, 8, path, 0)
        magic, count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise ParseError(f"{path}: bad magic 0x{magic:08x} at offset 0 "
                             f"(expected 0x{IDX_LABELS_MAGIC:08x})")
        payload = _read_exact(fh, count, path, 8)
        extra = fh.read(1)
    if extra:
        raise ParseError(f"{path}: trailing bytes after payload (offset {8 + count})")
    return np.frombuffer(payload, dtype=np.uint8).astype(np.int64)


def load_idx_pair(images_path, labels_path, scale: float = 1.0 / 255.0
                  ) -> LabeledDataset:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ParseError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}")
    return LabeledDataset(images.astype(np.float64) * scale, labels)


def load_csv(path) -> LabeledDataset:
    """Each line: integer label, then features, comma-separated, no header."""
    labels, rows = [], []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
                if width < 2:
                    raise ParseError(f"{path}: line {lineno}: need a label "
                                     "and at least one feature")
            elif len(parts) != width:
                raise ParseError(f"{path}: line {lineno}: expected {width} "
                                 f"fields, got {len(parts)}")
            try:
                label = int(parts[0])
                feats = [float(v) for v in parts[1:]]
            except ValueError as e:
                raise ParseError(f"{path}: line {lineno}: {e}") from e
            if not all(np.isfinite(feats)):
                raise ParseError(f"{path}: line {lineno}: non-finite feature")
            labels.append(label)
            rows.append(feats)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), np.array(labels))


def save_csv(data: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label, row in zip(data.labels, data.points):
            fh.write(",".join([str(int(label))] + [repr(float(v)) for v in row]))
            fh.write("\n")


def synth_clusters(n_per_class: int, centers, sigma: float,
                   seed: int) -> LabeledDataset:
    """Gaussian blobs, one class per center, deterministic by seed."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[0] < 2:
        raise UsageError("need at least two cluster centers")
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for k, center in enumerate(centers):
        pts = center + sigma * rng.standard_normal((n_per_class, centers.shape[1]))
        points.append(pts)
        labels.append(np.full(n_per_class, k))
    return LabeledDataset(np.vstack(points), np.concatenate(labels))


def grid_centers(n_classes: int, dim: int = 2, spacing: float = 4.0) -> np.ndarray:
    """Well-separated centers on an axis-aligned grid."""
    pts = []
    if dim == 1:
        for k in range(n_classes):
            pts.append([k * spacing])
        return np.array(pts, dtype=np.float64)
    side = int(np.ceil(np.sqrt(n_classes)))
    for k in range(n_classes):
        coord = np.zeros(dim)
        coord[0] = (k % side) * spacing
        coord[1] = (k // side) * spacing
        pts.append(coord)
    return np.array(pts)


def load_spec(spec: str) -> LabeledDataset:
    """Parse a data source spec string (see module docstring)."""
    if ":" not in spec:
        raise UsageError(f"malformed data spec {spec!r}")
    kind, rest = spec.split(":", 1)
    if kind == "csv":
        return load_csv(rest)
    if kind == "idx":
        parts = rest.split(",")
        if len(parts) not in (2, 3):
            raise UsageError("idx spec needs IMAGES,LABELS[,SCALE]")
        scale = float(parts[2]) if len(parts) == 3 else 1.0 / 255.0
        return load_idx_pair(parts[0], parts[1], scale)
    if kind == "synth":
        params = {"n": 100, "classes": 2, "dim": 2, "sigma": 0.5, "seed": 0,
                  "spacing": 4.0}
        if rest:
            for kv in rest.split(","):
                if "=" not in kv:
                    raise UsageError(f"malformed synth parameter {kv!r}")
                key, val = kv.split("=", 1)
                if key not in params:
                    raise UsageError(f"unknown synth parameter {key!r}")
                params[key] = type(params[key])(val)
        centers = grid_centers(int(params["classes"]), int(params["dim"]),
                               float(params["spacing"]))
        return synth_clusters(int(params["n"]), centers,
                              float(params["sigma"]), int(params["seed"]))
    raise UsageError(f"unknown data source kind {kind!r}")
