"""Standalone writer for the LAGO0001 bundle format.

Layout (all multi-byte values little-endian):
  bytes 0-7   magic "LAGO0001"
  bytes 8-35  header, 7 uint32: d, H, W, Y, m, M, flags
              flags bit0 = ground truth present, bit1 = templates present
  payload     float32: grid [H*W*d], full embedding [d], prototypes [Y*d],
              descriptions [Y*m*d] (absent if m == 0), templates [Y*d]
              (iff bit1), proposals [M*4] as (x, y, w, h)
  trailer     uint32 ground-truth class index (iff bit0)

A sibling .json manifest mirrors the header plus image_id and class names.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"LAGO0001"
FLAG_GROUND_TRUTH = 1 << 0
FLAG_TEMPLATES = 1 << 1
_HEADER = struct.Struct("<7I")


@dataclass
class BundlePayload:
    image_id: str
    grid: np.ndarray  # (H, W, d)
    full_embedding: np.ndarray  # (d,)
    prototypes: np.ndarray  # (Y, d)
    descriptions: np.ndarray | None  # (Y, m, d)
    templates: np.ndarray | None  # (Y, d)
    proposals: np.ndarray  # (M, 4) as (x, y, w, h)
    class_names: list[str]
    ground_truth: int | None = None


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def write_bundle(payload: BundlePayload, path: Path | str) -> None:
    path = Path(path)
    h, w, d = payload.grid.shape
    y = payload.prototypes.shape[0]
    m = 0 if payload.descriptions is None else payload.descriptions.shape[1]
    n_prop = payload.proposals.shape[0]
    flags = 0
    if payload.ground_truth is not None:
        flags |= FLAG_GROUND_TRUTH
    if payload.templates is not None:
        flags |= FLAG_TEMPLATES

    parts = [MAGIC, _HEADER.pack(d, h, w, y, m, n_prop, flags)]
    parts.append(_f32(payload.grid))
    parts.append(_f32(payload.full_embedding))
    parts.append(_f32(payload.prototypes))
    if m:
        parts.append(_f32(payload.descriptions))
    if payload.templates is not None:
        parts.append(_f32(payload.templates))
    parts.append(_f32(payload.proposals))
    if payload.ground_truth is not None:
        parts.append(struct.pack("<I", payload.ground_truth))
    path.write_bytes(b"".join(parts))

    manifest = {
        "magic": MAGIC.decode("ascii"),
        "dim": d,
        "grid_h": h,
        "grid_w": w,
        "num_classes": y,
        "descriptions_per_class": m,
        "num_proposals": n_prop,
        "flags": flags,
        "image_id": payload.image_id,
        "class_names": payload.class_names,
    }
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
