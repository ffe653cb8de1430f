"""Class text representations: description pooling, template reweighting, and the
adaptive soft text prototype built from intermediate logits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lago.vecmath import cosine, l2_normalize, softmax


@dataclass(eq=False)
class ClassEntry:
    """One class: pooled prototype plus optional raw descriptions/template."""

    name: str
    prototype: np.ndarray  # (d,) unit norm
    descriptions: np.ndarray | None = None  # (m, d)
    template: np.ndarray | None = None  # (d,)


@dataclass(eq=False)
class ClassTextBank:
    classes: list[ClassEntry]

    def __post_init__(self) -> None:
        if len(self.classes) < 2:
            raise ValueError("a text bank needs at least two classes")
        d = self.classes[0].prototype.shape[0]
        for c in self.classes:
            if c.prototype.shape != (d,):
                raise ValueError("inconsistent prototype dimensions")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return int(self.classes[0].prototype.shape[0])

    @property
    def descriptions_per_class(self) -> int:
        d0 = self.classes[0].descriptions
        return 0 if d0 is None else int(d0.shape[0])

    @property
    def has_templates(self) -> bool:
        return self.classes[0].template is not None

    def class_names(self) -> list[str]:
        return [c.name for c in self.classes]

    def prototypes_matrix(self) -> np.ndarray:
        return np.stack([c.prototype for c in self.classes])


def _weighted_pool(descriptions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # Shared combine path so uniform reweighting and mean pooling agree bit-for-bit.
    return l2_normalize(weights @ descriptions)


def pool_class_descriptions(descriptions: np.ndarray) -> np.ndarray:
    """Mean of the description embeddings, L2-normalized."""
    descriptions = np.asarray(descriptions, dtype=np.float64)
    if descriptions.ndim != 2 or descriptions.shape[0] < 1:
        raise ValueError("descriptions must be a nonempty (m, d) array")
    m = descriptions.shape[0]
    return _weighted_pool(descriptions, np.full(m, 1.0 / m))


def template_reweight(
    descriptions: np.ndarray,
    template: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Softmax-weighted description pool, sharpened toward the class template.

    Weights are softmax(tau * <template, description_i>); uniform alignments
    reduce exactly to mean pooling.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    descriptions = np.asarray(descriptions, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    weights = softmax(tau * (descriptions @ template))
    return _weighted_pool(descriptions, weights)


def stage2_prototype(
    z1: np.ndarray,
    tau_z: float,
    bank: ClassTextBank,
) -> tuple[np.ndarray, np.ndarray]:
    """Soft text prototype from intermediate logits.

    Returns (w_text, pi) where pi = softmax(z1 / tau_z) and w_text is the
    pi-weighted combination of class prototypes, L2-normalized.
    """
    if tau_z <= 0.0:
        raise ValueError("tau_z must be positive")
    z1 = np.asarray(z1, dtype=np.float64)
    if z1.shape != (bank.num_classes,):
        raise ValueError("logit vector length must match the class count")
    pi = softmax(z1 / tau_z)
    w_text = l2_normalize(pi @ bank.prototypes_matrix())
    return w_text, pi


def class_similarities(embedding: np.ndarray, bank: ClassTextBank) -> np.ndarray:
    """Cosine similarity of an embedding against every class prototype."""
    return np.array([cosine(embedding, c.prototype) for c in bank.classes])
