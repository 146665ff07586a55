"""Noise predictors.

Anything with a ``predict_noise(x, t, c) -> NoisePrediction`` method can drive
the samplers and editors. Inputs ``x`` may carry leading batch axes; the last
axis is the state dimension. One call counts as one function evaluation
regardless of batch size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .errors import ConfigurationError, DomainError, FixtureError
from .schedule import NoiseSchedule

Condition = Optional[int]  # class label, None = unconditional


@dataclass(frozen=True)
class NoisePrediction:
    eps: np.ndarray
    nfe_cost: int = 1


class Denoiser(Protocol):
    def predict_noise(self, x: np.ndarray, t: int, c: Condition) -> NoisePrediction: ...


@dataclass(frozen=True, eq=False)
class Mixture:
    """Isotropic Gaussian mixture: weights (K,), means (K, dim), variances (K,)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        if not (w.size == mu.shape[0] == var.size) or w.size == 0:
            raise ConfigurationError("weights, means and variances disagree in length")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise ConfigurationError("mixture weights must be >= 0 and sum to 1")
        if np.any(var <= 0):
            raise ConfigurationError("component variances must be > 0")
        for name, val in (("weights", w), ("means", mu), ("variances", var)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact mean and covariance of the mixture."""
        mean = self.weights @ self.means
        centered = self.means - mean
        cov = (centered.T * self.weights) @ centered
        cov += np.eye(self.dim) * float(self.weights @ self.variances)
        return mean, cov

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        k = rng.choice(self.weights.size, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[k] + np.sqrt(self.variances[k])[:, None] * z


@dataclass(frozen=True, eq=False)
class GMMSpec:
    """Class-conditional mixtures plus class priors.

    The unconditional distribution is the prior-weighted pool of all class
    mixtures.
    """

    classes: Mapping[int, Mixture]
    class_weights: Mapping[int, float] = field(default_factory=dict)
    unconditional: Mixture = field(init=False)

    def __post_init__(self) -> None:
        if not self.classes:
            raise ConfigurationError("GMMSpec needs at least one class")
        classes = {int(k): m for k, m in sorted(self.classes.items())}
        dims = {m.dim for m in classes.values()}
        if len(dims) != 1:
            raise ConfigurationError(f"class mixtures disagree on dim: {dims}")
        prior = dict(self.class_weights) or {k: 1.0 / len(classes) for k in classes}
        prior = {int(k): float(v) for k, v in prior.items()}
        if set(prior) != set(classes):
            raise ConfigurationError("class_weights keys must match classes")
        if any(v <= 0 for v in prior.values()) or not math.isclose(
            sum(prior.values()), 1.0, abs_tol=1e-9
        ):
            raise ConfigurationError("class weights must be > 0 and sum to 1")
        pooled = Mixture(
            np.concatenate([prior[k] * m.weights for k, m in classes.items()]),
            np.concatenate([m.means for m in classes.values()]),
            np.concatenate([m.variances for m in classes.values()]),
        )
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "class_weights", prior)
        object.__setattr__(self, "unconditional", pooled)

    @property
    def dim(self) -> int:
        return next(iter(self.classes.values())).dim

    def mixture(self, c: Condition) -> Mixture:
        if c is None:
            return self.unconditional
        try:
            return self.classes[int(c)]
        except KeyError:
            raise ConfigurationError(f"unknown class label {c!r}") from None

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GMMSpec":
        """Build from ``{"classes": {label: {weights, means, variances}}, "class_weights": {...}}``."""
        try:
            classes = {
                int(k): Mixture(v["weights"], v["means"], v["variances"])
                for k, v in doc["classes"].items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed gmm section: {exc}") from exc
        weights = {int(k): v for k, v in doc.get("class_weights", {}).items()}
        built = cls(classes, weights)
        if "dim" in doc and int(doc["dim"]) != built.dim:
            raise ConfigurationError("declared dim does not match the means")
        return built

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "classes": {
                str(k): {
                    "weights": m.weights.tolist(),
                    "means": m.means.tolist(),
                    "variances": m.variances.tolist(),
                }
                for k, m in self.classes.items()
            },
            "class_weights": {str(k): v for k, v in self.class_weights.items()},
        }


def two_class_gmm(dim: int = 2, separation: float = 2.0, spread: float = 0.25) -> GMMSpec:
    """Two classes along the first axis, each a pair of components offset on the second."""
    if dim < 2:
        raise ConfigurationError("two_class_gmm needs dim >= 2")
    classes = {}
    for label, sign in ((0, -1.0), (1, 1.0)):
        means = np.zeros((2, dim))
        means[:, 0] = sign * separation
        means[:, 1] = [-0.75, 0.75]
        classes[label] = Mixture([0.5, 0.5], means, [spread, spread])
    return GMMSpec(classes)


def _diffused(mix: Mixture, alpha_bar: float) -> tuple[np.ndarray, np.ndarray]:
    return math.sqrt(alpha_bar) * mix.means, alpha_bar * mix.variances + (1.0 - alpha_bar)


def _check_input(gmm: GMMSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (gmm.dim,):
        raise ConfigurationError(f"state dim {x.shape[-1:]} != gmm dim {gmm.dim}")
    return x


def log_density(gmm: GMMSpec, x: np.ndarray, c: Condition, alpha_bar: float = 1.0) -> np.ndarray:
    """log p_t(x | c) of the mixture diffused to noise level ``alpha_bar``."""
    x = _check_input(gmm, x)
    mix = gmm.mixture(c)
    means, var = _diffused(mix, alpha_bar)
    sq = np.sum((x[..., None, :] - means) ** 2, axis=-1)
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    comp = logw - 0.5 * gmm.dim * np.log(2 * math.pi * var) - 0.5 * sq / var
    return logsumexp(comp, axis=-1)


def gmm_predict_noise(
    gmm: GMMSpec, x: np.ndarray, t: int, c: Condition, schedule: NoiseSchedule
) -> NoisePrediction:
    """Exact minimum-MSE noise prediction for the diffused mixture.

    eps*(x) = -sqrt(1 - abar_t) * grad log p_t(x | c), where each component
    diffuses to mean sqrt(abar_t) mu_k and variance abar_t s_k^2 + 1 - abar_t.
    """
    x = _check_input(gmm, x)
    if not 1 <= t <= schedule.T:
        raise ConfigurationError(f"timestep {t} outside [1, {schedule.T}]")
    ab = schedule.alpha_bar(t)
    mix = gmm.mixture(c)
    means, var = _diffused(mix, ab)
    diff = x[..., None, :] - means
    sq = np.sum(diff * diff, axis=-1)
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    logits = logw - 0.5 * gmm.dim * np.log(var) - 0.5 * sq / var
    resp = np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))
    eps = math.sqrt(1.0 - ab) * np.einsum("...k,...kd->...d", resp / var, diff)
    return NoisePrediction(eps, 1)


@dataclass(frozen=True, eq=False)
class GMMDenoiser:
    gmm: GMMSpec
    schedule: NoiseSchedule

    def predict_noise(self, x: np.ndarray, t: int, c: Condition) -> NoisePrediction:
        return gmm_predict_noise(self.gmm, x, t, c, self.schedule)


def cfg_predict(base: Denoiser, x: np.ndarray, t: int, c: Condition, w: float) -> NoisePrediction:
    """Classifier-free guidance: eps_u + w (eps_c - eps_u).

    Only one evaluation is spent when ``w == 1`` or ``c`` is None.
    """
    if c is None:
        return base.predict_noise(x, t, None)
    if w == 1.0:
        return base.predict_noise(x, t, c)
    cond = base.predict_noise(x, t, c)
    uncond = base.predict_noise(x, t, None)
    eps = uncond.eps + w * (cond.eps - uncond.eps)
    return NoisePrediction(eps, cond.nfe_cost + uncond.nfe_cost)


def score_oracle_fd(
    gmm: GMMSpec,
    x: np.ndarray,
    t: int,
    c: Condition,
    h: float,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Central finite-difference estimate of the noise prediction at a single point.

    Log densities come from scipy's multivariate normal, independently of
    :func:`gmm_predict_noise`.
    """
    if h <= 0:
        raise DomainError(f"step size must be > 0, got {h}")
    x = _check_input(gmm, x).reshape(-1)
    ab = schedule.alpha_bar(t)
    mix = gmm.mixture(c)
    comps = [
        (math.log(w), multivariate_normal(math.sqrt(ab) * mu, (ab * s2 + 1 - ab) * np.eye(gmm.dim)))
        for w, mu, s2 in zip(mix.weights, mix.means, mix.variances)
        if w > 0
    ]

    def logp(y: np.ndarray) -> float:
        return float(logsumexp([lw + d.logpdf(y) for lw, d in comps]))

    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (logp(x + step) - logp(x - step)) / (2 * h)
    return -math.sqrt(1.0 - ab) * grad


class ScriptedDenoiser:
    """Replays recorded noise predictions keyed by timestep; ignores x and c."""

    def __init__(self, tape: Iterable[tuple[int, Sequence[float]]] | Mapping[int, Sequence[float]]):
        items = tape.items() if isinstance(tape, Mapping) else tape
        self._tape = {int(t): np.asarray(e, dtype=np.float64) for t, e in items}

    def predict_noise(self, x: np.ndarray, t: int, c: Condition) -> NoisePrediction:
        try:
            eps = self._tape[int(t)]
        except KeyError:
            raise FixtureError(f"no recorded prediction for t={t}") from None
        return NoisePrediction(eps.copy(), 1)


def scripted_denoiser(tape) -> ScriptedDenoiser:
    return ScriptedDenoiser(tape)
