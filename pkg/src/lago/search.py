"""Box scoring and proposal-centered coarse-to-fine greedy search.

Each search walks a proposal through translate/rescale neighborhoods, first
with coarse then fine step sizes, accumulating every scored box; the harvest
is an IoU-diverse top-k of the visited set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from lago.features import FeatureBundle, pool_crop_embedding
from lago.geometry import BoundingBox, clamp_to_image, diverse_top_k_indices, generate_neighbors
from lago.vecmath import cosine


class CropOrigin(Enum):
    PROPOSAL_SEARCH = "proposal_search"
    RANDOM_COMPLETION = "random_completion"
    FULL_IMAGE = "full_image"


@dataclass(eq=False)
class ScoredCrop:
    box: BoundingBox
    embedding: np.ndarray
    s_visual: float
    s_text: float | None
    s_combined: float
    origin: CropOrigin
    gamma: float = 0.0


@dataclass(frozen=True)
class StageParams:
    steps: int
    delta: float
    rho: float


@dataclass(frozen=True)
class SearchConfig:
    coarse: StageParams = StageParams(steps=14, delta=0.35, rho=0.30)
    fine: StageParams = StageParams(steps=10, delta=0.12, rho=0.10)
    epsilon: float = 1e-4
    k: int = 4
    tau_search: float = 0.6
    min_box: float = 0.05

    def __post_init__(self) -> None:
        for stage in (self.coarse, self.fine):
            if stage.steps < 1 or stage.delta <= 0 or not 0 < stage.rho < 1:
                raise ValueError(f"invalid stage parameters {stage}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.tau_search <= 1:
            raise ValueError("tau_search must be in (0, 1]")
        if self.min_box <= 0:
            raise ValueError("min_box must be positive")


def score_box(
    bundle: FeatureBundle,
    b: BoundingBox,
    w_text: np.ndarray | None = None,
    gamma: float = 0.0,
    origin: CropOrigin = CropOrigin.PROPOSAL_SEARCH,
) -> ScoredCrop:
    """Pool a crop embedding and score it.

    s_visual is cosine against the full-image embedding (class-agnostic crop
    quality); s_text is cosine against the text prototype when one is given;
    the combined score is (1-gamma)*s_visual + gamma*s_text.
    """
    if w_text is None and gamma != 0.0:
        raise ValueError("gamma must be 0 when no text target is given")
    embedding = pool_crop_embedding(bundle.grid, b)
    s_visual = cosine(embedding, bundle.full_embedding)
    if w_text is None:
        s_text = None
        s_combined = s_visual
    else:
        s_text = cosine(embedding, w_text)
        s_combined = (1.0 - gamma) * s_visual + gamma * s_text
    return ScoredCrop(
        box=b,
        embedding=embedding,
        s_visual=s_visual,
        s_text=s_text,
        s_combined=s_combined,
        origin=origin,
        gamma=gamma,
    )


@dataclass
class SearchTrace:
    """Diagnostics for one proposal-centered search."""

    accepted_scores: list[float] = field(default_factory=list)
    visited_count: int = 0
    steps_per_stage: list[int] = field(default_factory=list)


@dataclass
class SearchResult:
    crops: list[ScoredCrop]
    trace: SearchTrace


def run_search(
    bundle: FeatureBundle,
    b0: BoundingBox,
    w_text: np.ndarray | None,
    gamma: float,
    cfg: SearchConfig,
) -> SearchResult:
    """Coarse-to-fine greedy search from one proposal, with trace."""
    b = clamp_to_image(b0)
    visited: dict[tuple[float, float, float, float], ScoredCrop] = {}

    def score_once(box: BoundingBox) -> ScoredCrop:
        key = box.as_tuple()
        crop = visited.get(key)
        if crop is None:
            crop = score_box(bundle, box, w_text, gamma)
            visited[key] = crop
        return crop

    current = score_once(b)
    trace = SearchTrace(accepted_scores=[current.s_combined])
    for stage in (cfg.coarse, cfg.fine):
        steps = 0
        for _ in range(stage.steps):
            neighbors = [score_once(nb) for nb in generate_neighbors(current.box, stage.delta, stage.rho)]
            steps += 1
            # Sub-minimum boxes stay in the visited set but are never moved to.
            eligible = [c for c in neighbors if c.box.w >= cfg.min_box and c.box.h >= cfg.min_box]
            if not eligible:
                break
            best = max(eligible, key=lambda c: c.s_combined)
            if best.s_combined - current.s_combined < cfg.epsilon:
                break
            current = best
            trace.accepted_scores.append(current.s_combined)
        trace.steps_per_stage.append(steps)

    trace.visited_count = len(visited)
    crops = list(visited.values())
    idx = diverse_top_k_indices(
        [c.box for c in crops], [c.s_combined for c in crops], cfg.k, cfg.tau_search
    )
    return SearchResult(crops=[crops[i] for i in idx], trace=trace)


def search_top_k_crops(
    bundle: FeatureBundle,
    b0: BoundingBox,
    w_text: np.ndarray | None,
    gamma: float,
    cfg: SearchConfig,
) -> list[ScoredCrop]:
    """IoU-diverse top-k crops harvested from one proposal-centered search."""
    return run_search(bundle, b0, w_text, gamma, cfg).crops
