"""Fidelity and alignment metrics on desk-scale samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .denoiser import Condition, GMMSpec, log_density
from .errors import ConfigurationError, NumericError

_EIG_FLOOR = 1e-12
_PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Gaussian summary (mean, covariance) of a set of vectors."""

    mean: np.ndarray
    cov: np.ndarray
    count: int = 0

    @classmethod
    def fit(cls, vectors: np.ndarray) -> "EmbeddingSet":
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] < 2:
            raise ConfigurationError("need at least two vectors to fit a covariance")
        cov = np.atleast_2d(np.cov(v, rowvar=False))
        return cls(v.mean(axis=0), 0.5 * (cov + cov.T), v.shape[0])

    @property
    def dim(self) -> int:
        return int(np.size(self.mean))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -_PSD_TOL * scale:
        raise NumericError(f"matrix is not PSD (min eigenvalue {w.min():.3g})")
    w = np.where(w < _EIG_FLOOR, 0.0, w)
    return (v * np.sqrt(w)) @ v.T


def frechet_distance(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The cross term uses the symmetric form (S_a^(1/2) S_b S_a^(1/2))^(1/2),
    which has the same trace.
    """
    if a.dim != b.dim:
        raise ConfigurationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sa, sb = np.atleast_2d(a.cov), np.atleast_2d(b.cov)
    root_a = _psd_sqrt(sa)
    _psd_sqrt(sb)
    cross = _psd_sqrt(root_a @ sb @ root_a)
    diff = np.asarray(a.mean) - np.asarray(b.mean)
    value = float(diff @ diff + np.trace(sa) + np.trace(sb) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def pearson_cc(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size or a.size < 2:
        raise ConfigurationError("pearson_cc needs two vectors of equal length >= 2")
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        raise NumericError("pearson_cc is undefined for zero-variance input")
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True, eq=False)
class FeatureEmbedder:
    """Fixed random network used as a perceptual-style feature extractor.

    Layer 1 is linear with at least as many outputs as inputs, so it is
    injective with probability one; deeper layers apply tanh then a random
    projection. Weights are scaled by 1/sqrt(fan_in).
    """

    dim: int
    depth: int = 3
    width: int = 32
    seed: int = 0
    weights: tuple[np.ndarray, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.dim < 1 or self.depth < 1:
            raise ConfigurationError("embedder needs dim >= 1 and depth >= 1")
        width = max(self.width, self.dim)
        rng = np.random.Generator(np.random.Philox(self.seed))
        mats, fan_in = [], self.dim
        for _ in range(self.depth):
            w = rng.standard_normal((fan_in, width)) / math.sqrt(fan_in)
            w.setflags(write=False)
            mats.append(w)
            fan_in = width
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "weights", tuple(mats))

    def layers(self, x: np.ndarray) -> list[np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ConfigurationError(f"embedder expects dim {self.dim}, got {x.shape[-1]}")
        h = x @ self.weights[0]
        out = [h]
        for w in self.weights[1:]:
            h = np.tanh(h) @ w
            out.append(h)
        return out

    def embed(self, x: np.ndarray) -> np.ndarray:
        return self.layers(x)[-1]


def feature_distance(embedder: FeatureEmbedder, a: np.ndarray, b: np.ndarray) -> float:
    """Sum over layers of the mean squared activation difference."""
    if np.shape(a) != np.shape(b):
        raise ConfigurationError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")
    return float(sum(np.mean((ha - hb) ** 2) for ha, hb in zip(embedder.layers(a), embedder.layers(b))))


def class_log_posterior(gmm: GMMSpec, x: np.ndarray) -> dict[int, np.ndarray]:
    """log p(c | x) for every class label."""
    joint = {
        k: math.log(gmm.class_weights[k]) + log_density(gmm, x, k)
        for k in gmm.classes
    }
    norm = logsumexp(np.stack(list(joint.values())), axis=0)
    return {k: v - norm for k, v in joint.items()}


def alignment_score(gmm: GMMSpec, x: np.ndarray, c: Condition) -> float | np.ndarray:
    """Log posterior probability of class ``c`` given the clean sample ``x``."""
    if c is None:
        raise ConfigurationError("alignment_score needs a class label")
    if int(c) not in gmm.classes:
        raise ConfigurationError(f"unknown class label {c!r}")
    score = class_log_posterior(gmm, x)[int(c)]
    return float(score) if np.ndim(score) == 0 else score


def abs_score_delta(scores_a: np.ndarray, scores_b: np.ndarray) -> float:
    """Mean |score_a - score_b| across paired per-sample scalar scores."""
    a, b = np.asarray(scores_a, dtype=np.float64), np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError("score arrays differ in shape")
    return float(np.mean(np.abs(a - b)))
