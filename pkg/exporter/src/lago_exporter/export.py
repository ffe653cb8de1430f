"""Batch export: encode images and class descriptions, generate proposals, and
serialize one bundle per image."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from lago_exporter.encoders import EncoderBackend
from lago_exporter.format import BundlePayload, write_bundle
from lago_exporter.proposals import mask_proposals

log = logging.getLogger("lago_exporter")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


@dataclass
class ClassSpec:
    name: str
    descriptions: list[str]
    template: str | None = None


@dataclass
class ExportJob:
    images: list[Path]
    classes: list[ClassSpec]
    out_dir: Path
    grid: int = 14
    max_proposals: int = 8

    def __post_init__(self) -> None:
        if self.grid < 1:
            raise ValueError("grid must be >= 1")
        if not 1 <= self.max_proposals <= 8:
            raise ValueError("max_proposals must be in 1..8")
        if len(self.classes) < 2:
            raise ValueError("need at least two classes")
        if any(not c.descriptions for c in self.classes):
            raise ValueError("every class needs at least one description")


def load_class_specs(path: Path | str) -> list[ClassSpec]:
    """classes.json: {"name": [descriptions...]} or
    {"name": {"descriptions": [...] | "path/to.txt", "template": "..."}}.
    A string value is a path to a text file with one description per line."""
    path = Path(path)
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ValueError("classes.json must map class names to descriptions")
    specs = []
    for name, value in data.items():
        template = None
        if isinstance(value, dict):
            template = value.get("template")
            value = value.get("descriptions", [])
        if isinstance(value, str):
            lines = (path.parent / value).read_text().splitlines()
            descriptions = [line.strip() for line in lines if line.strip()]
        else:
            descriptions = [str(v) for v in value]
        specs.append(ClassSpec(name=name, descriptions=descriptions, template=template))
    return specs


def find_images(directory: Path | str) -> list[Path]:
    root = Path(directory)
    return sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _pad_uniform(classes: list[ClassSpec]) -> int:
    # every class carries the same m; shorter lists repeat their last entry
    m = max(len(c.descriptions) for c in classes)
    for c in classes:
        while len(c.descriptions) < m:
            c.descriptions.append(c.descriptions[-1])
    return m


def encode_text_bank(
    classes: list[ClassSpec], encoder: EncoderBackend
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Returns (prototypes (Y, d), descriptions (Y, m, d), templates or None)."""
    m = _pad_uniform(classes)
    descriptions = np.stack([encoder.encode_texts(c.descriptions) for c in classes])
    prototypes = descriptions.mean(axis=1)
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)
    templates = None
    if all(c.template for c in classes):
        templates = encoder.encode_texts([c.template for c in classes])
    return prototypes, descriptions, templates


def export_bundle(job: ExportJob, encoder: EncoderBackend) -> list[Path]:
    """Export every readable image; per-image failures are logged and skipped.

    Returns the written bundle paths; raises RuntimeError when all images fail.
    """
    job.out_dir.mkdir(parents=True, exist_ok=True)
    prototypes, descriptions, templates = encode_text_bank(job.classes, encoder)
    written = []
    for image_path in job.images:
        try:
            with Image.open(image_path) as image:
                image.load()
                grid, full = encoder.encode_image(image, job.grid)
                proposals = mask_proposals(image, job.max_proposals)
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            log.warning("skipping %s: %s", image_path.name, exc)
            continue
        payload = BundlePayload(
            image_id=image_path.stem,
            grid=grid,
            full_embedding=full,
            prototypes=prototypes,
            descriptions=descriptions,
            templates=templates,
            proposals=proposals,
            class_names=[c.name for c in job.classes],
        )
        out = job.out_dir / f"{image_path.stem}.lago"
        write_bundle(payload, out)
        written.append(out)
    if job.images and not written:
        raise RuntimeError("every image failed to export")
    return written
