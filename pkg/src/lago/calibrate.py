"""Grid search over the three fusion weights on cached per-crop scores."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lago.aggregation import AggregationConfig, InferenceResult, fuse_channels, mix_weights


@dataclass(eq=False)
class CachedChannel:
    s_visual: np.ndarray  # (n,)
    s_text: np.ndarray  # (n,)
    sims: np.ndarray  # (n, Y)

    @property
    def size(self) -> int:
        return int(self.s_visual.shape[0])


@dataclass(eq=False)
class CachedImage:
    image_id: str
    label: int
    z_full: np.ndarray
    objects: CachedChannel | None
    contexts: CachedChannel | None


@dataclass(frozen=True)
class CalibrationResult:
    beta: float
    alpha_dc: float
    lam: float
    accuracy: float


def cache_entry_from_result(result: InferenceResult, label: int) -> CachedImage:
    """Freeze the channel-tagged scores of one classified image."""

    def channel(crops, sims) -> CachedChannel | None:
        if not crops:
            return None
        return CachedChannel(
            s_visual=np.array([c.s_visual for c in crops]),
            s_text=np.array([0.0 if c.s_text is None else c.s_text for c in crops]),
            sims=np.stack(sims),
        )

    return CachedImage(
        image_id=result.image_id,
        label=label,
        z_full=np.array(result.detail.z_full),
        objects=channel(result.objects, result.object_sims),
        contexts=channel(result.contexts, result.context_sims),
    )


def _predict(entry: CachedImage, beta: float, alpha_dc: float, lam: float, cfg: AggregationConfig) -> int:
    z_o = z_c = None
    if entry.objects is not None:
        w = mix_weights(entry.objects.s_visual, entry.objects.s_text, cfg.tau_v, cfg.tau_t, beta)
        z_o = np.einsum("i,ik->k", w, entry.objects.sims)
    if entry.contexts is not None:
        w = mix_weights(entry.contexts.s_visual, entry.contexts.s_text, cfg.tau_v, cfg.tau_t, beta)
        z_c = np.einsum("i,ik->k", w, entry.contexts.sims)
    z_final = fuse_channels(z_o, z_c, entry.z_full, alpha_dc, lam)
    return int(np.argmax(z_final))


def grid_search(
    cache: list[CachedImage],
    betas: list[float],
    alphas: list[float],
    lambdas: list[float],
    cfg: AggregationConfig | None = None,
) -> CalibrationResult:
    """Exhaustively evaluate every (beta, alpha_dc, lambda) triple on the cache.

    Ties go to the lexicographically smallest triple; the cache is read-only.
    """
    if not cache:
        raise ValueError("score cache is empty")
    if not (betas and alphas and lambdas):
        raise ValueError("all three grids must be nonempty")
    cfg = cfg or AggregationConfig()
    best: CalibrationResult | None = None
    for beta in sorted(set(betas)):
        for alpha in sorted(set(alphas)):
            for lam in sorted(set(lambdas)):
                correct = sum(
                    1 for e in cache if _predict(e, beta, alpha, lam, cfg) == e.label
                )
                acc = correct / len(cache)
                if best is None or acc > best.accuracy:
                    best = CalibrationResult(beta=beta, alpha_dc=alpha, lam=lam, accuracy=acc)
    assert best is not None
    return best


# --- cache files ---------------------------------------------------------------


def save_cache_entry(entry: CachedImage, path: Path | str) -> None:
    def channel(c: CachedChannel | None):
        if c is None:
            return None
        return {
            "s_visual": c.s_visual.tolist(),
            "s_text": c.s_text.tolist(),
            "sims": c.sims.tolist(),
        }

    data = {
        "image_id": entry.image_id,
        "label": entry.label,
        "z_full": entry.z_full.tolist(),
        "objects": channel(entry.objects),
        "contexts": channel(entry.contexts),
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_cache(directory: Path | str) -> list[CachedImage]:
    def channel(data) -> CachedChannel | None:
        if data is None:
            return None
        return CachedChannel(
            s_visual=np.array(data["s_visual"], dtype=np.float64),
            s_text=np.array(data["s_text"], dtype=np.float64),
            sims=np.array(data["sims"], dtype=np.float64),
        )

    entries = []
    for path in sorted(Path(directory).glob("*.json")):
        data = json.loads(path.read_text())
        entries.append(
            CachedImage(
                image_id=str(data["image_id"]),
                label=int(data["label"]),
                z_full=np.array(data["z_full"], dtype=np.float64),
                objects=channel(data["objects"]),
                contexts=channel(data["contexts"]),
            )
        )
    return entries
