"""Two-stage region discovery: class-agnostic search, intermediate prediction and
confidence, confidence-mapped guidance strength, text-guided refinement, merge."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lago.features import FeatureBundle
from lago.geometry import diverse_top_k_indices
from lago.search import ScoredCrop, SearchConfig, search_top_k_crops
from lago.textbank import (
    ClassEntry,
    ClassTextBank,
    class_similarities,
    stage2_prototype,
    template_reweight,
)
from lago.vecmath import cosine, l2_normalize, softmax


@dataclass(frozen=True)
class ConfidencePolicy:
    mode: str = "margin"  # "softmax_max" or "margin"
    softmax_temperature: float = 0.05

    def __post_init__(self) -> None:
        if self.mode not in ("softmax_max", "margin"):
            raise ValueError(f"unknown confidence mode {self.mode!r}")
        if self.softmax_temperature <= 0:
            raise ValueError("softmax temperature must be positive")


@dataclass(frozen=True)
class GammaPolicy:
    """Piecewise-linear monotone map from confidence to guidance strength."""

    c_lo: float = 0.05
    c_hi: float = 0.40
    gamma_min: float = 0.0
    gamma_max: float = 0.7

    def __post_init__(self) -> None:
        if not 0 <= self.c_lo < self.c_hi <= 1:
            raise ValueError("need 0 <= c_lo < c_hi <= 1")
        if not 0 <= self.gamma_min <= self.gamma_max <= 1:
            raise ValueError("need 0 <= gamma_min <= gamma_max <= 1")


@dataclass(frozen=True)
class PipelineConfig:
    search: SearchConfig = field(default_factory=SearchConfig)
    confidence: ConfidencePolicy = field(default_factory=ConfidencePolicy)
    gamma: GammaPolicy = field(default_factory=GammaPolicy)
    tau_z: float = 0.2
    k1: int = 3  # crops pooled into the ensemble embedding
    n1: int = 3  # stage-1 seeds re-searched in stage 2
    k_global: int = 8  # stage-1 cross-proposal cap
    k_final: int = 3  # merged ranked-crop cap
    stage2: bool = True
    use_template_reweight: bool = False
    template_tau: float = 10.0


@dataclass(eq=False)
class StageOneResult:
    crops: list[ScoredCrop]
    z1: np.ndarray
    predicted: int
    confidence: float
    gamma: float
    w_text: np.ndarray
    pi: np.ndarray


def effective_bank(bundle: FeatureBundle, cfg: PipelineConfig) -> ClassTextBank:
    """Bank with prototypes optionally rebuilt by template-guided reweighting."""
    bank = bundle.text_bank
    if not cfg.use_template_reweight:
        return bank
    if not bank.has_templates or bank.descriptions_per_class == 0:
        return bank
    classes = [
        ClassEntry(
            name=c.name,
            prototype=template_reweight(c.descriptions, c.template, cfg.template_tau),
            descriptions=c.descriptions,
            template=c.template,
        )
        for c in bank.classes
    ]
    return ClassTextBank(classes=classes)


def stage1_discover(
    bundle: FeatureBundle,
    cfg: SearchConfig,
    k_global: int = 8,
) -> list[ScoredCrop]:
    """Visual-only search from every proposal, deduplicated across proposals."""
    union: list[ScoredCrop] = []
    for b0 in bundle.proposals:
        union.extend(search_top_k_crops(bundle, b0, None, 0.0, cfg))
    idx = diverse_top_k_indices(
        [c.box for c in union], [c.s_combined for c in union], k_global, cfg.tau_search
    )
    return [union[i] for i in idx]


def mean_pool_top_crops(crops: list[ScoredCrop], k1: int) -> np.ndarray:
    """Normalized mean embedding of the k1 best crops."""
    if not crops:
        raise ValueError("no crops to pool")
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    top = sorted(crops, key=lambda c: c.s_combined, reverse=True)[:k1]
    return l2_normalize(np.mean([c.embedding for c in top], axis=0))


def predict_confidence(z: np.ndarray, policy: ConfidencePolicy) -> tuple[int, float]:
    """Argmax class plus a softmax- or margin-based confidence in [0, 1]."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] < 2:
        raise ValueError("need at least two classes")
    predicted = int(np.argmax(z))
    p = softmax(z / policy.softmax_temperature)
    if policy.mode == "softmax_max":
        confidence = float(p[predicted])
    else:
        rest = np.delete(p, predicted)
        confidence = float(p[predicted] - rest.max())
    return predicted, confidence


def gamma_map(c: float, policy: GammaPolicy) -> float:
    """Monotone piecewise-linear confidence -> guidance strength."""
    if c <= policy.c_lo:
        return policy.gamma_min
    if c >= policy.c_hi:
        return policy.gamma_max
    t = (c - policy.c_lo) / (policy.c_hi - policy.c_lo)
    return policy.gamma_min + (policy.gamma_max - policy.gamma_min) * t


def stage2_refine(
    bundle: FeatureBundle,
    seeds: list[ScoredCrop],
    w_text: np.ndarray,
    gamma: float,
    cfg: SearchConfig,
    n1: int = 3,
) -> list[ScoredCrop]:
    """Text-guided re-search from the n1 best stage-1 crops."""
    if not seeds:
        raise ValueError("stage-2 refinement needs at least one seed")
    top = sorted(seeds, key=lambda c: c.s_combined, reverse=True)[:n1]
    union: list[ScoredCrop] = []
    for seed in top:
        union.extend(search_top_k_crops(bundle, seed.box, w_text, gamma, cfg))
    return union


def rescore_crop(crop: ScoredCrop, w_text: np.ndarray | None, gamma: float) -> ScoredCrop:
    """Same box/embedding, combined score recomputed on the given basis."""
    if w_text is None:
        s_text = None
        s_combined = crop.s_visual
        gamma = 0.0
    else:
        s_text = cosine(crop.embedding, w_text)
        s_combined = (1.0 - gamma) * crop.s_visual + gamma * s_text
    return ScoredCrop(
        box=crop.box,
        embedding=crop.embedding,
        s_visual=crop.s_visual,
        s_text=s_text,
        s_combined=s_combined,
        origin=crop.origin,
        gamma=gamma,
    )


def merge_and_refine(
    c1: list[ScoredCrop],
    c2: list[ScoredCrop],
    w_text: np.ndarray | None,
    gamma: float,
    tau_search: float,
    k_final: int,
) -> list[ScoredCrop]:
    """Union of both stages rescored on one (w_text, gamma) basis, deduplicated
    and ranked by combined score."""
    if not c1:
        raise ValueError("stage-1 crop set must be nonempty")
    rescored = [rescore_crop(c, w_text, gamma) for c in c1 + c2]
    idx = diverse_top_k_indices(
        [c.box for c in rescored], [c.s_combined for c in rescored], k_final, tau_search
    )
    return [rescored[i] for i in idx]


def run_two_stage(
    bundle: FeatureBundle,
    cfg: PipelineConfig,
) -> tuple[list[ScoredCrop], StageOneResult]:
    """Full two-stage region discovery; returns ranked crops plus intermediates."""
    bank = effective_bank(bundle, cfg)
    c1 = stage1_discover(bundle, cfg.search, cfg.k_global)
    v_ens = mean_pool_top_crops(c1, cfg.k1)
    z1 = class_similarities(v_ens, bank)
    predicted, confidence = predict_confidence(z1, cfg.confidence)
    gamma = gamma_map(confidence, cfg.gamma)
    w_text, pi = stage2_prototype(z1, cfg.tau_z, bank)
    # At gamma == 0 the refined objective reduces to the visual one, so the
    # stage-2 re-search is skipped; the pipeline is then exactly stage 1 only.
    if cfg.stage2 and gamma > 0.0:
        c2 = stage2_refine(bundle, c1, w_text, gamma, cfg.search, cfg.n1)
    else:
        c2 = []
    ranked = merge_and_refine(c1, c2, w_text, gamma, cfg.search.tau_search, cfg.k_final)
    stage_one = StageOneResult(
        crops=c1,
        z1=z1,
        predicted=predicted,
        confidence=confidence,
        gamma=gamma,
        w_text=w_text,
        pi=pi,
    )
    return ranked, stage_one
