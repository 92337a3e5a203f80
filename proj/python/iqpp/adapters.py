"""File writers for externally computed inputs.

Model code (backbones, autoencoders, detectors) produces arrays; these
helpers turn them into files the engine loads. They depend only on the
standard library and numpy.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

EMBEDDING_MAGIC = b"IQPPEMB1"
MATRIX_MAGIC = b"IQPPMAT1"

HIGHER_IS_BETTER = "HIGHER_IS_BETTER"
HIGHER_IS_HARDER = "HIGHER_IS_HARDER"


def l2_normalize(values: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; zero rows raise ValueError."""
    values = np.asarray(values, dtype=np.float64)
    norms = np.linalg.norm(values, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero row")
    return values / norms


def _check_ids(ids: Sequence[str], rows: int) -> None:
    if len(ids) != rows:
        raise ValueError(f"{len(ids)} ids for {rows} rows")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids")


def write_embeddings_binary(ids: Sequence[str], values: np.ndarray, path: str | Path) -> Path:
    """Write an IQPPEMB1 file: magic, u32 dim, u64 count, length-prefixed ids, f32 rows."""
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ValueError("values must be 2-D")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite embedding value")
    _check_ids(ids, values.shape[0])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as out:
        out.write(EMBEDDING_MAGIC)
        out.write(struct.pack("<IQ", values.shape[1], values.shape[0]))
        for i in ids:
            raw = i.encode("utf-8")
            out.write(struct.pack("<H", len(raw)))
            out.write(raw)
        out.write(values.tobytes())
    return path


def write_embeddings_jsonl(ids: Sequence[str], values: np.ndarray, path: str | Path) -> Path:
    """One {"id": ..., "v": [...]} object per line."""
    values = np.asarray(values, dtype=np.float32)
    _check_ids(ids, values.shape[0])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as out:
        for i, row in zip(ids, values):
            out.write(json.dumps({"id": i, "v": [float(v) for v in row]}) + "\n")
    return path


def write_scores(
    scores: Mapping[str, float],
    path: str | Path,
    name: str | None = None,
    orientation: str = HIGHER_IS_HARDER,
) -> Path:
    """Score TSV with predictor and orientation headers."""
    if orientation not in (HIGHER_IS_BETTER, HIGHER_IS_HARDER):
        raise ValueError(f"unknown orientation {orientation!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as out:
        out.write(f"# predictor={name or path.stem}\n")
        out.write(f"# orientation={orientation}\n")
        for query_id in sorted(scores):
            value = float(scores[query_id])
            if not math.isfinite(value):
                raise ValueError(f"non-finite score for {query_id!r}")
            out.write(f"{query_id}\t{value!r}\n")
    return path


def write_detections(
    detections: Mapping[str, Iterable[tuple[float, float]]], path: str | Path
) -> Path:
    """JSONL of {"id": ..., "boxes": [{"w": ..., "h": ...}]}, boxes as (width, height)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as out:
        for query_id in sorted(detections):
            boxes = []
            for w, h in detections[query_id]:
                if not (w > 0 and h > 0):
                    raise ValueError(f"box sides must be positive for {query_id!r}")
                boxes.append({"w": float(w), "h": float(h)})
            out.write(json.dumps({"id": query_id, "boxes": boxes}) + "\n")
    return path


def read_similarity_matrices(path: str | Path) -> list[tuple[str, np.ndarray]]:
    """Read the engine's IQPPMAT1 matrices: u32 count, then (u16 id length, id, u32 size, f64 values)."""
    data = Path(path).read_bytes()
    if data[:8] != MATRIX_MAGIC:
        raise ValueError("not a similarity matrix file")
    (count,) = struct.unpack_from("<I", data, 8)
    offset = 12
    out = []
    for _ in range(count):
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        query_id = data[offset : offset + length].decode("utf-8")
        offset += length
        (size,) = struct.unpack_from("<I", data, offset)
        offset += 4
        values = np.frombuffer(data, dtype="<f8", count=size * size, offset=offset)
        offset += 8 * size * size
        out.append((query_id, values.reshape(size, size).copy()))
    if offset != len(data):
        raise ValueError("trailing bytes in similarity matrix file")
    return out
