"""View completion, object/context channel assignment, dual-channel aggregation,
and the end-to-end per-image classifier."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from lago.features import FeatureBundle
from lago.geometry import FULL_IMAGE, BoundingBox, clamp_to_image, iou
from lago.search import CropOrigin, ScoredCrop, score_box
from lago.textbank import ClassTextBank, class_similarities
from lago.two_stage import PipelineConfig, StageOneResult, effective_bank, run_two_stage
from lago.vecmath import cosine, softmax


@dataclass(frozen=True)
class AggregationConfig:
    tau_v: float = 0.05  # visual softmax temperature
    tau_t: float = 0.05  # text softmax temperature
    beta: float = 0.3  # visual/text mix within a channel
    alpha_dc: float = 0.6  # object/context mix
    lam: float = 0.8  # dual-channel/full-image mix
    tau_rand: float = 0.95  # random-completion IoU threshold
    views: int = 16  # total view count V
    scale_lo: float = 0.3
    scale_hi: float = 0.8
    filter_full_image: bool = False  # include the full-image box in the IoU filter
    max_rejects: int = 64  # sampling rejections allowed per slot

    def __post_init__(self) -> None:
        if self.tau_v <= 0 or self.tau_t <= 0:
            raise ValueError("softmax temperatures must be positive")
        for name in ("beta", "alpha_dc", "lam"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 < self.tau_rand <= 1:
            raise ValueError("tau_rand must be in (0, 1]")
        if self.views < 2:
            raise ValueError("need at least two views")
        if not 0 < self.scale_lo <= self.scale_hi <= 1:
            raise ValueError("invalid crop scale range")


@dataclass(eq=False)
class ViewSet:
    """Fixed-length view list; invalid padded slots are never read downstream."""

    crops: list[ScoredCrop | None]
    valid: list[bool]
    full_logits: np.ndarray

    def valid_crops(self) -> list[ScoredCrop]:
        return [c for c, ok in zip(self.crops, self.valid) if ok and c is not None]


def view_rng(rng_seed: int, image_id: str, label: str) -> np.random.Generator:
    """Deterministic per-image generator, split by purpose label."""
    digest = hashlib.sha256(f"{label}:{image_id}".encode()).digest()
    words = struct.unpack("<8I", digest)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([rng_seed & 0xFFFFFFFFFFFFFFFF, *words])))


def sample_random_box(rng: np.random.Generator, scale_lo: float, scale_hi: float) -> BoundingBox:
    """Uniform center, uniform side lengths in the scale range, clamped."""
    u = rng.random(4)
    w = scale_lo + (scale_hi - scale_lo) * u[2]
    h = scale_lo + (scale_hi - scale_lo) * u[3]
    return clamp_to_image(BoundingBox(u[0] - 0.5 * w, u[1] - 0.5 * h, w, h))


def complete_views(
    ranked: list[ScoredCrop],
    bundle: FeatureBundle,
    cfg: AggregationConfig,
    rng_seed: int,
    *,
    w_text: np.ndarray | None = None,
    gamma: float = 0.0,
    bank: ClassTextBank | None = None,
) -> ViewSet:
    """Fill V slots: full image, then ranked crops, then IoU-filtered random
    completion crops; leftover slots are padded invalid."""
    if not ranked:
        raise ValueError("ranked crop list must be nonempty")
    bank = bank or bundle.text_bank
    full_logits = class_similarities(bundle.full_embedding, bank)

    full_crop = ScoredCrop(
        box=FULL_IMAGE,
        embedding=np.array(bundle.full_embedding),
        s_visual=1.0,
        s_text=cosine(bundle.full_embedding, w_text) if w_text is not None else None,
        s_combined=1.0 if w_text is None else (1.0 - gamma) * 1.0 + gamma * cosine(bundle.full_embedding, w_text),
        origin=CropOrigin.FULL_IMAGE,
        gamma=gamma if w_text is not None else 0.0,
    )
    slots: list[ScoredCrop | None] = [full_crop]
    slots.extend(ranked[: cfg.views - 1])

    accepted = [c.box for c in ranked[: cfg.views - 1]]
    if cfg.filter_full_image:
        accepted.append(FULL_IMAGE)
    rng = view_rng(rng_seed, bundle.image_id, "completion")
    while len(slots) < cfg.views:
        box = None
        rejects = 0
        while rejects < cfg.max_rejects:
            candidate = sample_random_box(rng, cfg.scale_lo, cfg.scale_hi)
            if all(iou(candidate, a) < cfg.tau_rand for a in accepted):
                box = candidate
                break
            rejects += 1
        if box is None:
            break  # sampling exhausted; pad the rest
        accepted.append(box)
        slots.append(score_box(bundle, box, w_text, gamma, origin=CropOrigin.RANDOM_COMPLETION))

    valid = [True] * len(slots)
    while len(slots) < cfg.views:
        slots.append(None)
        valid.append(False)
    return ViewSet(crops=slots, valid=valid, full_logits=full_logits)


def assign_channels(vs: ViewSet) -> tuple[list[ScoredCrop], list[ScoredCrop]]:
    """Split valid views into object (search) and context (random) channels;
    the full image stays out and contributes through its own logits."""
    objects = [c for c in vs.valid_crops() if c.origin is CropOrigin.PROPOSAL_SEARCH]
    contexts = [c for c in vs.valid_crops() if c.origin is CropOrigin.RANDOM_COMPLETION]
    return objects, contexts


def mix_weights(
    s_visual: np.ndarray,
    s_text: np.ndarray,
    tau_v: float,
    tau_t: float,
    beta: float,
) -> np.ndarray:
    """Within-channel crop weights: (1-beta)*softmax(sv/tau_v) + beta*softmax(st/tau_t)."""
    p = softmax(np.asarray(s_visual, dtype=np.float64) / tau_v)
    q = softmax(np.asarray(s_text, dtype=np.float64) / tau_t)
    return (1.0 - beta) * p + beta * q


def channel_weights(
    crops: list[ScoredCrop],
    w_text: np.ndarray | None,
    tau_v: float,
    tau_t: float,
    beta: float,
) -> np.ndarray:
    """mix_weights over a channel; missing text scores are recomputed against w_text."""
    if not crops:
        raise ValueError("cannot weight an empty channel")
    sv = np.array([c.s_visual for c in crops])
    st = np.empty(len(crops))
    for i, c in enumerate(crops):
        if c.s_text is not None:
            st[i] = c.s_text
        elif w_text is not None:
            st[i] = cosine(c.embedding, w_text)
        elif beta == 0.0:
            st[i] = 0.0  # unused: beta=0 ignores the text side
        else:
            raise ValueError("text scores unavailable and no text prototype given")
    return mix_weights(sv, st, tau_v, tau_t, beta)


def dual_channel_logits(
    z_o: np.ndarray | None,
    z_c: np.ndarray | None,
    alpha_dc: float,
) -> np.ndarray | None:
    """alpha-mix of the channel logits; an empty channel passes the other through."""
    if z_o is None and z_c is None:
        return None
    if z_o is None:
        return np.array(z_c, dtype=np.float64)
    if z_c is None:
        return np.array(z_o, dtype=np.float64)
    return alpha_dc * np.asarray(z_o, dtype=np.float64) + (1.0 - alpha_dc) * np.asarray(z_c, dtype=np.float64)


def fuse_channels(
    z_o: np.ndarray | None,
    z_c: np.ndarray | None,
    z_full: np.ndarray,
    alpha_dc: float,
    lam: float,
) -> np.ndarray:
    """Object/context fusion then interpolation with the full-image logits.

    With both channels empty the result is the full-image logits unchanged.
    """
    z_dc = dual_channel_logits(z_o, z_c, alpha_dc)
    if z_dc is None:
        return np.array(z_full, dtype=np.float64)
    return lam * z_dc + (1.0 - lam) * np.asarray(z_full, dtype=np.float64)


@dataclass(eq=False)
class AggregateDetail:
    object_weights: np.ndarray | None
    context_weights: np.ndarray | None
    z_o: np.ndarray | None
    z_c: np.ndarray | None
    z_dc: np.ndarray
    z_full: np.ndarray


def aggregate(
    objects: list[ScoredCrop],
    contexts: list[ScoredCrop],
    z_full: np.ndarray,
    object_sims: list[np.ndarray],
    context_sims: list[np.ndarray],
    cfg: AggregationConfig,
    w_text: np.ndarray | None = None,
) -> tuple[np.ndarray, AggregateDetail]:
    """Weighted per-channel sums of crop similarity vectors, fused into final logits."""
    w_o = z_o = None
    if objects:
        w_o = channel_weights(objects, w_text, cfg.tau_v, cfg.tau_t, cfg.beta)
        z_o = np.einsum("i,ik->k", w_o, np.stack(object_sims))
    w_c = z_c = None
    if contexts:
        w_c = channel_weights(contexts, w_text, cfg.tau_v, cfg.tau_t, cfg.beta)
        z_c = np.einsum("i,ik->k", w_c, np.stack(context_sims))
    z_final = fuse_channels(z_o, z_c, z_full, cfg.alpha_dc, cfg.lam)
    z_dc = dual_channel_logits(z_o, z_c, cfg.alpha_dc)
    if z_dc is None:
        z_dc = np.array(z_full, dtype=np.float64)
    detail = AggregateDetail(
        object_weights=w_o,
        context_weights=w_c,
        z_o=z_o,
        z_c=z_c,
        z_dc=z_dc,
        z_full=np.asarray(z_full, dtype=np.float64),
    )
    return z_final, detail


@dataclass(eq=False)
class InferenceResult:
    image_id: str
    z_final: np.ndarray
    predicted: int
    confidence: float
    gamma: float
    ranked: list[ScoredCrop]
    stage_one: StageOneResult
    views: ViewSet
    objects: list[ScoredCrop]
    contexts: list[ScoredCrop]
    detail: AggregateDetail
    object_sims: list[np.ndarray] = field(default_factory=list)
    context_sims: list[np.ndarray] = field(default_factory=list)


def classify(
    bundle: FeatureBundle,
    pipe_cfg: PipelineConfig,
    agg_cfg: AggregationConfig,
    rng_seed: int = 0,
    strategy: str = "lago",
) -> InferenceResult:
    """Two-stage discovery, view completion, dual-channel aggregation, argmax.

    strategy="random" is the region-selection ablation: the ranked crops are
    replaced by uniformly random boxes (same count, same per-image seed) while
    everything else runs unchanged.
    """
    if strategy not in ("lago", "random"):
        raise ValueError(f"unknown strategy {strategy!r}")
    ranked, stage_one = run_two_stage(bundle, pipe_cfg)
    bank = effective_bank(bundle, pipe_cfg)

    if strategy == "random":
        n = min(len(ranked), agg_cfg.views - 1)
        rng = view_rng(rng_seed, bundle.image_id, "ablation")
        ranked = [
            score_box(
                bundle,
                sample_random_box(rng, agg_cfg.scale_lo, agg_cfg.scale_hi),
                stage_one.w_text,
                stage_one.gamma,
                origin=CropOrigin.PROPOSAL_SEARCH,
            )
            for _ in range(n)
        ]

    views = complete_views(
        ranked,
        bundle,
        agg_cfg,
        rng_seed,
        w_text=stage_one.w_text,
        gamma=stage_one.gamma,
        bank=bank,
    )
    objects, contexts = assign_channels(views)
    object_sims = [class_similarities(c.embedding, bank) for c in objects]
    context_sims = [class_similarities(c.embedding, bank) for c in contexts]
    z_final, detail = aggregate(
        objects, contexts, views.full_logits, object_sims, context_sims, agg_cfg, stage_one.w_text
    )
    return InferenceResult(
        image_id=bundle.image_id,
        z_final=z_final,
        predicted=int(np.argmax(z_final)),
        confidence=stage_one.confidence,
        gamma=stage_one.gamma,
        ranked=ranked,
        stage_one=stage_one,
        views=views,
        objects=objects,
        contexts=contexts,
        detail=detail,
        object_sims=object_sims,
        context_sims=context_sims,
    )
