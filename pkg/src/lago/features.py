"""Per-image feature bundles: patch-grid data model, crop pooling, and bit-exact
binary file I/O (magic "LAGO0001" + sibling JSON manifest)."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lago import kernels
from lago.geometry import BoundingBox
from lago.textbank import ClassEntry, ClassTextBank
from lago.vecmath import DegenerateVectorError, cosine, l2_normalize  # noqa: F401

MAGIC = b"LAGO0001"
FLAG_GROUND_TRUTH = 1 << 0
FLAG_TEMPLATES = 1 << 1

# Stored coordinates are float32; clamp invariants are checked to this slack.
CLAMP_TOL = 1e-6
UNIT_NORM_TOL = 1e-6


class BundleFormatError(ValueError):
    """Base class for bundle decode failures."""


class MagicMismatchError(BundleFormatError):
    """File does not start with the LAGO0001 magic."""


class DimMismatchError(BundleFormatError):
    """Manifest header fields disagree with the binary payload."""


class TruncatedPayloadError(BundleFormatError):
    """Payload ends before the header-implied length."""


@dataclass(eq=False)
class PatchGrid:
    """Dense (H, W, d) field of patch embeddings; all crop features pool from it."""

    cells: np.ndarray
    _mean_unit: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.cells = np.ascontiguousarray(self.cells, dtype=np.float64)
        if self.cells.ndim != 3 or min(self.cells.shape) < 1:
            raise ValueError("grid must be a nonempty (H, W, d) array")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError("grid cells must be finite")

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def dim(self) -> int:
        return int(self.cells.shape[2])

    def mean_unit(self) -> np.ndarray:
        """Normalized mean of all cells (pooling fallback for degenerate boxes)."""
        if self._mean_unit is None:
            mean = self.cells.mean(axis=(0, 1))
            unit_e0 = np.zeros(self.dim)
            unit_e0[0] = 1.0
            self._mean_unit = l2_normalize(mean, fallback=unit_e0)
        return self._mean_unit


def pool_crop_embedding(grid: PatchGrid, b: BoundingBox) -> np.ndarray:
    """Unit-norm area-weighted pool of the grid cells under a clamped box."""
    return kernels.pool_crop(grid.cells, b.x, b.y, b.w, b.h, grid.mean_unit())


def full_image_embedding(grid: PatchGrid) -> np.ndarray:
    """Normalized mean of all cells; equals pooling the full-image box."""
    return np.array(grid.mean_unit())


@dataclass(eq=False)
class FeatureBundle:
    """Everything the engine needs for one image."""

    image_id: str
    grid: PatchGrid
    full_embedding: np.ndarray  # (d,) unit norm
    proposals: list[BoundingBox]
    text_bank: ClassTextBank
    ground_truth: int | None = None

    def __post_init__(self) -> None:
        self.full_embedding = np.asarray(self.full_embedding, dtype=np.float64)
        d = self.grid.dim
        if self.full_embedding.shape != (d,):
            raise ValueError("full embedding dimension must match the grid")
        if self.text_bank.dim != d:
            raise ValueError("text bank dimension must match the grid")
        if len(self.proposals) < 1:
            raise ValueError("a bundle needs at least one proposal")

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def num_classes(self) -> int:
        return self.text_bank.num_classes


def validate_bundle(bundle: FeatureBundle) -> None:
    """Invariant suite: dims, unit norms, finiteness, clamped proposals."""
    d = bundle.grid.dim
    if not np.all(np.isfinite(bundle.full_embedding)):
        raise ValueError("full embedding must be finite")
    if abs(np.linalg.norm(bundle.full_embedding) - 1.0) > UNIT_NORM_TOL:
        raise ValueError("full embedding must be unit norm")
    for entry in bundle.text_bank.classes:
        if abs(np.linalg.norm(entry.prototype) - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"prototype for {entry.name!r} must be unit norm")
        if entry.descriptions is not None and entry.descriptions.shape[1] != d:
            raise ValueError("description dimension mismatch")
        if entry.template is not None and entry.template.shape != (d,):
            raise ValueError("template dimension mismatch")
    for b in bundle.proposals:
        if b.w <= 0 or b.h <= 0:
            raise ValueError("proposal sides must be positive")
        if (
            b.x < -CLAMP_TOL
            or b.y < -CLAMP_TOL
            or b.x + b.w > 1.0 + CLAMP_TOL
            or b.y + b.h > 1.0 + CLAMP_TOL
        ):
            raise ValueError(f"proposal {b} is not clamped to the image")


# --- binary format -----------------------------------------------------------
#
# bytes 0-7   magic "LAGO0001"
# bytes 8-35  header, 7 little-endian uint32: d, H, W, Y, m, M, flags
# payload     little-endian float32, in order:
#               grid [H*W*d] (row-major, cell-major then component)
#               full embedding [d]
#               class prototypes [Y*d]
#               description embeddings [Y*m*d]    (absent if m == 0)
#               template embeddings [Y*d]         (iff flags bit1)
#               proposals [M*4] as (x, y, w, h)
#             ground-truth class index, uint32    (iff flags bit0)
#
# A sibling <stem>.json manifest repeats the header plus image_id and class
# names for human inspection; the binary is authoritative.

_HEADER = struct.Struct("<7I")
_MANIFEST_FIELDS = ("dim", "grid_h", "grid_w", "num_classes", "descriptions_per_class", "num_proposals", "flags")


def manifest_path(path: Path | str) -> Path:
    return Path(path).with_suffix(".json")


def _f32_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def save_bundle(bundle: FeatureBundle, path: Path | str) -> None:
    """Write the binary bundle and its sibling JSON manifest."""
    path = Path(path)
    bank = bundle.text_bank
    d, hh, ww = bundle.dim, bundle.grid.height, bundle.grid.width
    y = bank.num_classes
    m = bank.descriptions_per_class
    mm = len(bundle.proposals)
    flags = 0
    if bundle.ground_truth is not None:
        flags |= FLAG_GROUND_TRUTH
    if bank.has_templates:
        flags |= FLAG_TEMPLATES

    parts = [MAGIC, _HEADER.pack(d, hh, ww, y, m, mm, flags)]
    parts.append(_f32_bytes(bundle.grid.cells))
    parts.append(_f32_bytes(bundle.full_embedding))
    parts.append(_f32_bytes(np.stack([c.prototype for c in bank.classes])))
    if m:
        parts.append(_f32_bytes(np.stack([c.descriptions for c in bank.classes])))
    if flags & FLAG_TEMPLATES:
        parts.append(_f32_bytes(np.stack([c.template for c in bank.classes])))
    parts.append(_f32_bytes(np.array([b.as_tuple() for b in bundle.proposals])))
    if flags & FLAG_GROUND_TRUTH:
        parts.append(struct.pack("<I", bundle.ground_truth))
    path.write_bytes(b"".join(parts))

    manifest = {
        "magic": MAGIC.decode("ascii"),
        "dim": d,
        "grid_h": hh,
        "grid_w": ww,
        "num_classes": y,
        "descriptions_per_class": m,
        "num_proposals": mm,
        "flags": flags,
        "image_id": bundle.image_id,
        "class_names": bank.class_names(),
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_bundle(path: Path | str) -> FeatureBundle:
    """Read a bundle file; raises a distinct BundleFormatError subclass on
    magic mismatch, manifest/payload disagreement, or truncation."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise MagicMismatchError(f"{path}: missing {MAGIC.decode('ascii')} magic")
    if len(raw) < len(MAGIC) + _HEADER.size:
        raise TruncatedPayloadError(f"{path}: header is incomplete")
    d, hh, ww, y, m, mm, flags = _HEADER.unpack_from(raw, len(MAGIC))

    manifest = None
    mpath = manifest_path(path)
    if mpath.exists():
        manifest = json.loads(mpath.read_text())
        header = dict(zip(_MANIFEST_FIELDS, (d, hh, ww, y, m, mm, flags)))
        for key, val in header.items():
            if key in manifest and int(manifest[key]) != val:
                raise DimMismatchError(
                    f"{path}: manifest {key}={manifest[key]} but payload has {val}"
                )

    n_floats = hh * ww * d + d + y * d + y * m * d + mm * 4
    if flags & FLAG_TEMPLATES:
        n_floats += y * d
    expected = len(MAGIC) + _HEADER.size + 4 * n_floats + (4 if flags & FLAG_GROUND_TRUTH else 0)
    if len(raw) < expected:
        raise TruncatedPayloadError(f"{path}: expected {expected} bytes, got {len(raw)}")
    if len(raw) > expected:
        raise BundleFormatError(f"{path}: {len(raw) - expected} trailing bytes")

    floats = np.frombuffer(raw, dtype="<f4", count=n_floats, offset=len(MAGIC) + _HEADER.size)
    floats = floats.astype(np.float64)
    pos = 0

    def take(n: int) -> np.ndarray:
        nonlocal pos
        out = floats[pos : pos + n]
        pos += n
        return out

    grid = PatchGrid(take(hh * ww * d).reshape(hh, ww, d))
    full = take(d)
    prototypes = take(y * d).reshape(y, d)
    descriptions = take(y * m * d).reshape(y, m, d) if m else None
    templates = take(y * d).reshape(y, d) if flags & FLAG_TEMPLATES else None
    proposals = [BoundingBox(*(float(v) for v in row)) for row in take(mm * 4).reshape(mm, 4)]
    ground_truth = None
    if flags & FLAG_GROUND_TRUTH:
        (ground_truth,) = struct.unpack_from("<I", raw, expected - 4)

    if manifest is not None:
        image_id = str(manifest.get("image_id", path.stem))
        names = [str(n) for n in manifest.get("class_names", [])]
        if len(names) != y:
            names = [f"class_{i}" for i in range(y)]
    else:
        image_id = path.stem
        names = [f"class_{i}" for i in range(y)]

    classes = [
        ClassEntry(
            name=names[i],
            prototype=prototypes[i],
            descriptions=descriptions[i] if descriptions is not None else None,
            template=templates[i] if templates is not None else None,
        )
        for i in range(y)
    ]
    bundle = FeatureBundle(
        image_id=image_id,
        grid=grid,
        full_embedding=full,
        proposals=proposals,
        text_bank=ClassTextBank(classes=classes),
        ground_truth=int(ground_truth) if ground_truth is not None else None,
    )
    return bundle
