"""Deterministic synthetic scenes with known ground truth, plus the exhaustive
lattice box-search oracle used to judge greedy search quality."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lago.features import FeatureBundle, PatchGrid, full_image_embedding
from lago.geometry import BoundingBox, clamp_to_image, generate_neighbors
from lago.search import ScoredCrop, score_box
from lago.textbank import ClassEntry, ClassTextBank, pool_class_descriptions
from lago.vecmath import l2_normalize, quantize_f32


class InvalidSceneError(ValueError):
    """Scene specification that cannot be generated."""


@dataclass(frozen=True)
class SceneSpec:
    grid_h: int
    grid_w: int
    dim: int
    num_classes: int
    descriptions_per_class: int
    objects: tuple[tuple[int, BoundingBox], ...]  # (class index, box); objects[0] is the target
    noise_sigma: float
    seed: int

    def __post_init__(self) -> None:
        if self.dim < 2 or self.num_classes < 2:
            raise InvalidSceneError("need dim >= 2 and at least two classes")
        if self.grid_h < 1 or self.grid_w < 1:
            raise InvalidSceneError("grid must be nonempty")
        if self.descriptions_per_class < 1:
            raise InvalidSceneError("need at least one description per class")
        if not self.objects:
            raise InvalidSceneError("need at least one object")
        for cls, _ in self.objects:
            if not 0 <= cls < self.num_classes:
                raise InvalidSceneError(f"object class {cls} out of range")
        if self.noise_sigma < 0:
            raise InvalidSceneError("noise sigma must be >= 0")


# Purpose-split substreams so adding draws to one never shifts another.
_PURPOSES = {"prototypes": 1, "descriptions": 2, "noise": 3, "proposals": 4}

# Jitter applied to object boxes when deriving proposals.
_PROPOSAL_DELTA = 0.3
_PROPOSAL_RHO = 0.25
_RANDOM_PROPOSAL_SCALE = (0.2, 0.7)


def _rng(seed: int, purpose: str) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _PURPOSES[purpose]]))
    )


def scene_prototypes(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Class prototypes (Y, d) and the background prototype, as generated for
    the scene (float32-quantized, same stream as make_scene)."""
    rng = _rng(spec.seed, "prototypes")
    y = spec.num_classes
    vectors = rng.standard_normal((y + 1, spec.dim))
    vectors = np.stack([l2_normalize(v) for v in vectors])
    if spec.dim >= y + 1:
        # One Gram-Schmidt sweep: near-orthogonal prototypes.
        for k in range(1, y + 1):
            for j in range(k):
                vectors[k] -= np.dot(vectors[k], vectors[j]) * vectors[j]
            fallback = np.zeros(spec.dim)
            fallback[k % spec.dim] = 1.0
            vectors[k] = l2_normalize(vectors[k], fallback=fallback)
    vectors = quantize_f32(vectors)
    return vectors[:y], vectors[y]


def _covering_class(spec: SceneSpec, cx: float, cy: float) -> int | None:
    for cls, box in spec.objects:
        if box.x <= cx < box.x + box.w and box.y <= cy < box.y + box.h:
            return cls
    return None


def make_scene(spec: SceneSpec) -> FeatureBundle:
    """Generate the feature bundle for a scene; identical specs give identical
    bundles bit for bit (float64 generation, float32 storage lattice)."""
    prototypes, background = scene_prototypes(spec)
    hh, ww, d = spec.grid_h, spec.grid_w, spec.dim

    noise = _rng(spec.seed, "noise").standard_normal((hh, ww, d))
    cells = np.empty((hh, ww, d))
    for i in range(hh):
        for j in range(ww):
            cls = _covering_class(spec, (j + 0.5) / ww, (i + 0.5) / hh)
            base = background if cls is None else prototypes[cls]
            if spec.noise_sigma > 0:
                cells[i, j] = l2_normalize(base + spec.noise_sigma * noise[i, j])
            else:
                cells[i, j] = base
    grid = PatchGrid(quantize_f32(cells))

    rng_desc = _rng(spec.seed, "descriptions")
    classes = []
    for y in range(spec.num_classes):
        perturb = rng_desc.standard_normal((spec.descriptions_per_class, d))
        if spec.noise_sigma > 0:
            descs = np.stack(
                [l2_normalize(prototypes[y] + 0.5 * spec.noise_sigma * p) for p in perturb]
            )
        else:
            descs = np.tile(prototypes[y], (spec.descriptions_per_class, 1))
        descs = quantize_f32(descs)
        classes.append(
            ClassEntry(
                name=f"class_{y}",
                prototype=quantize_f32(pool_class_descriptions(descs)),
                descriptions=descs,
            )
        )
    bank = ClassTextBank(classes=classes)

    rng_prop = _rng(spec.seed, "proposals")
    proposals = []
    for _, box in spec.objects:
        neighbors = generate_neighbors(box, _PROPOSAL_DELTA, _PROPOSAL_RHO)
        proposals.append(neighbors[int(rng_prop.integers(len(neighbors)))])
    lo, hi = _RANDOM_PROPOSAL_SCALE
    u = rng_prop.random(4)
    w = lo + (hi - lo) * u[2]
    h = lo + (hi - lo) * u[3]
    proposals.append(clamp_to_image(BoundingBox(u[0] - 0.5 * w, u[1] - 0.5 * h, w, h)))
    proposals = [
        BoundingBox(*(float(np.float32(v)) for v in b.as_tuple())) for b in proposals
    ]

    return FeatureBundle(
        image_id=f"scene-{spec.seed:016x}",
        grid=grid,
        full_embedding=quantize_f32(full_image_embedding(grid)),
        proposals=proposals,
        text_bank=bank,
        ground_truth=spec.objects[0][0],
    )


def brute_force_best_box(
    bundle: FeatureBundle,
    w_text: np.ndarray | None,
    gamma: float,
    quantize: int,
    min_box: float = 0.05,
) -> ScoredCrop:
    """Exhaustive max of score_box over the 1/Q lattice of clamped boxes.

    Ties go to the lexicographically smallest (x, y, w, h); the enumeration
    is in that order, so keeping strict improvements implements the rule.
    """
    if quantize < 2:
        raise ValueError("quantize must be >= 2")
    q = quantize
    best: ScoredCrop | None = None
    for ix in range(q):
        x = ix / q
        for iy in range(q):
            y = iy / q
            for iw in range(1, q - ix + 1):
                w = iw / q
                if w < min_box:
                    continue
                for ih in range(1, q - iy + 1):
                    h = ih / q
                    if h < min_box:
                        continue
                    crop = score_box(bundle, BoundingBox(x, y, w, h), w_text, gamma)
                    if best is None or crop.s_combined > best.s_combined:
                        best = crop
    assert best is not None
    return best


def lattice_size(quantize: int, min_box: float = 0.05) -> int:
    """Number of boxes brute_force_best_box enumerates."""
    q = quantize
    per_axis = sum(
        1 for i0 in range(q) for n in range(1, q - i0 + 1) if n / q >= min_box
    )
    return per_axis * per_axis


# --- benchmark suite ------------------------------------------------------------

DEFAULT_SUITE_SEED = 20_260_800
DEFAULT_SUITE_SIZE = 200


def benchmark_scene_spec(index: int, base_seed: int = DEFAULT_SUITE_SEED) -> SceneSpec:
    """One scene of the seeded benchmark family.

    Each scene has one dominant target object plus one or two smaller
    distractor objects of other classes, at a noise level where full-image
    classification is fallible but a clean crop on the target is decisive.
    """
    rng = np.random.default_rng(base_seed + index)
    num_classes = 5
    target = int(rng.integers(num_classes))
    tw, th = rng.uniform(0.3, 0.45, 2)
    tx = rng.uniform(0.02, 0.98 - tw)
    ty = rng.uniform(0.02, 0.98 - th)
    objects = [(target, BoundingBox(float(tx), float(ty), float(tw), float(th)))]
    for _ in range(int(rng.integers(1, 3))):
        cls = int((target + 1 + rng.integers(num_classes - 1)) % num_classes)
        dw, dh = rng.uniform(0.12, 0.22, 2)
        dx = rng.uniform(0.0, 1.0 - dw)
        dy = rng.uniform(0.0, 1.0 - dh)
        objects.append((cls, BoundingBox(float(dx), float(dy), float(dw), float(dh))))
    return SceneSpec(
        grid_h=8,
        grid_w=8,
        dim=16,
        num_classes=num_classes,
        descriptions_per_class=3,
        objects=tuple(objects),
        noise_sigma=float(rng.uniform(0.25, 0.4)),
        seed=base_seed + index,
    )


def default_benchmark_suite(
    n_scenes: int = DEFAULT_SUITE_SIZE, base_seed: int = DEFAULT_SUITE_SEED
) -> list[SceneSpec]:
    return [benchmark_scene_spec(i, base_seed) for i in range(n_scenes)]


# --- suite descriptors --------------------------------------------------------


def spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "grid_h": spec.grid_h,
        "grid_w": spec.grid_w,
        "dim": spec.dim,
        "num_classes": spec.num_classes,
        "descriptions_per_class": spec.descriptions_per_class,
        "objects": [[cls, list(box.as_tuple())] for cls, box in spec.objects],
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
    }


def spec_from_dict(data: dict) -> SceneSpec:
    return SceneSpec(
        grid_h=int(data["grid_h"]),
        grid_w=int(data["grid_w"]),
        dim=int(data["dim"]),
        num_classes=int(data["num_classes"]),
        descriptions_per_class=int(data["descriptions_per_class"]),
        objects=tuple(
            (int(cls), BoundingBox(*(float(v) for v in box))) for cls, box in data["objects"]
        ),
        noise_sigma=float(data["noise_sigma"]),
        seed=int(data["seed"]),
    )


def load_suite(path: Path | str) -> list[SceneSpec]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("a scene suite file is a JSON list of scene specs")
    return [spec_from_dict(item) for item in data]


def save_suite(specs: list[SceneSpec], path: Path | str) -> None:
    Path(path).write_text(json.dumps([spec_to_dict(s) for s in specs], indent=2) + "\n")
