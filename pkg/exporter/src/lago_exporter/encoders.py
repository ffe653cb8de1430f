"""Image/text encoder backends.

The stub backend is fully deterministic and dependency-light, for tests and
offline runs; the CLIP backend adapts a pretrained vision-language model and
is imported lazily so the package works without torch installed.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np
from PIL import Image


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm < 1e-30:
        out = np.zeros_like(v)
        out[..., 0] = 1.0
        return out
    return v / norm


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return np.stack([_unit(row) for row in m])


class EncoderBackend(Protocol):
    dim: int

    def encode_image(self, image: Image.Image, grid: int) -> tuple[np.ndarray, np.ndarray]:
        """Returns (patch grid (grid, grid, dim), full-image embedding (dim,))."""
        ...

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        """Returns one embedding row per text, unit norm."""
        ...


class StubEncoder:
    """Deterministic featureizer: block color statistics through a fixed random
    projection for images, hashed seeded vectors for texts.

    Not a learned model; exists so the export pipeline can run and be tested
    end to end without downloading weights.
    """

    def __init__(self, dim: int = 32):
        self.dim = dim
        seed = np.frombuffer(hashlib.sha256(b"stub-encoder").digest(), dtype=np.uint32)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed.tolist())))
        # 12 block statistics: RGB means/stds, gradients, position encodings
        self._projection = rng.standard_normal((12, dim))

    def _block_features(self, block: np.ndarray, iy: int, ix: int, n: int) -> np.ndarray:
        rgb = block.reshape(-1, 3)
        mean = rgb.mean(axis=0)
        std = rgb.std(axis=0)
        gy = np.abs(np.diff(block.mean(axis=2), axis=0)).mean() if block.shape[0] > 1 else 0.0
        gx = np.abs(np.diff(block.mean(axis=2), axis=1)).mean() if block.shape[1] > 1 else 0.0
        pos = [iy / max(1, n - 1), ix / max(1, n - 1)]
        feats = np.array([*mean, *std, gy, gx, *pos, mean.max(), mean.min()])
        return feats @ self._projection

    def encode_image(self, image: Image.Image, grid: int) -> tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
        hh, ww = arr.shape[:2]
        ys = np.linspace(0, hh, grid + 1).astype(int)
        xs = np.linspace(0, ww, grid + 1).astype(int)
        cells = np.zeros((grid, grid, self.dim))
        for i in range(grid):
            for j in range(grid):
                block = arr[ys[i] : max(ys[i + 1], ys[i] + 1), xs[j] : max(xs[j + 1], xs[j] + 1)]
                cells[i, j] = _unit(self._block_features(block, i, j, grid))
        full = _unit(cells.mean(axis=(0, 1)))
        return cells, full

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        rows = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = np.frombuffer(digest, dtype=np.uint32)
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed.tolist())))
            rows.append(_unit(rng.standard_normal(self.dim)))
        return np.stack(rows)


class ClipEncoder:
    """Frozen CLIP adapter: spatial vision tokens projected into the shared
    space form the patch grid; pooled projections give the global and text
    embeddings.  Requires torch + transformers and downloaded weights.
    """

    def __init__(self, model_id: str = "openai/clip-vit-base-patch32"):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_id).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.dim = int(self.model.config.projection_dim)

    def encode_image(self, image: Image.Image, grid: int) -> tuple[np.ndarray, np.ndarray]:
        torch = self._torch
        inputs = self.processor(images=image.convert("RGB"), return_tensors="pt")
        with torch.no_grad():
            vision = self.model.vision_model(**inputs)
            tokens = self.model.visual_projection(
                self.model.vision_model.post_layernorm(vision.last_hidden_state[:, 1:])
            )[0]
            full = self.model.get_image_features(**inputs)[0]
        side = int(round(tokens.shape[0] ** 0.5))
        cells = tokens.reshape(side, side, -1).numpy().astype(np.float64)
        cells = np.stack([_unit_rows(row) for row in cells])
        if side != grid:
            # average-pool token grid down / repeat up to the requested size
            idx = np.linspace(0, side, grid + 1).astype(int)
            pooled = np.zeros((grid, grid, self.dim))
            for i in range(grid):
                for j in range(grid):
                    block = cells[idx[i] : max(idx[i + 1], idx[i] + 1), idx[j] : max(idx[j + 1], idx[j] + 1)]
                    pooled[i, j] = _unit(block.mean(axis=(0, 1)))
            cells = pooled
        return cells, _unit(full.numpy().astype(np.float64))

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        inputs = self.processor(text=texts, return_tensors="pt", padding=True, truncation=True)
        with torch.no_grad():
            feats = self.model.get_text_features(**inputs).numpy().astype(np.float64)
        return _unit_rows(feats)


def make_encoder(name: str, model_id: str | None = None, dim: int = 32) -> EncoderBackend:
    if name == "stub":
        return StubEncoder(dim=dim)
    if name == "clip":
        return ClipEncoder(model_id) if model_id else ClipEncoder()
    raise ValueError(f"unknown encoder backend {name!r}")
