import numpy as np
import pytest

from lago.features import FeatureBundle, PatchGrid
from lago.geometry import BoundingBox
from lago.synth import SceneSpec, make_scene
from lago.textbank import ClassEntry, ClassTextBank
from lago.vecmath import l2_normalize


def unit(*values) -> np.ndarray:
    return l2_normalize(np.array(values, dtype=np.float64))


def tiny_bank(dim: int = 4, classes: int = 2) -> ClassTextBank:
    entries = []
    for y in range(classes):
        proto = np.zeros(dim)
        proto[y % dim] = 1.0
        entries.append(ClassEntry(name=f"class_{y}", prototype=proto))
    return ClassTextBank(classes=entries)


def flat_bundle(dim: int = 4) -> FeatureBundle:
    """1x1 grid: every box pools to the same vector, all scores equal."""
    cell = np.zeros((1, 1, dim))
    cell[0, 0] = unit(*range(1, dim + 1))
    grid = PatchGrid(cell)
    return FeatureBundle(
        image_id="flat",
        grid=grid,
        full_embedding=grid.mean_unit(),
        proposals=[BoundingBox(0.3, 0.3, 0.4, 0.4)],
        text_bank=tiny_bank(dim),
    )


def two_object_spec(seed: int = 123, sigma: float = 0.25) -> SceneSpec:
    return SceneSpec(
        grid_h=8,
        grid_w=8,
        dim=16,
        num_classes=5,
        descriptions_per_class=3,
        objects=(
            (1, BoundingBox(0.15, 0.2, 0.35, 0.35)),
            (3, BoundingBox(0.62, 0.6, 0.22, 0.22)),
        ),
        noise_sigma=sigma,
        seed=seed,
    )


@pytest.fixture
def scene_bundle():
    return make_scene(two_object_spec())


@pytest.fixture
def clean_scene_bundle():
    return make_scene(two_object_spec(seed=7, sigma=0.0))
