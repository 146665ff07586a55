"""Variance schedules, timestep grids and the sigma policy of the reverse update."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, OrderingError

# rounding slack allowed when checking 1 - abar_prev - sigma^2 >= 0
_RADICAND_ULPS = 8 * np.finfo(np.float64).eps


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Discrete variance schedule over the horizon ``1..T``.

    Arrays are indexed from ``t = 1`` at position 0. Use :meth:`alpha_bar`
    for timestep lookups; it applies the ``alpha_bar(0) = 1`` convention so
    the last reverse step lands on clean data.
    """

    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)
    posterior_vars: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ConfigurationError("betas must be a nonempty 1-D vector")
        if not np.all((betas > 0.0) & (betas < 1.0)):
            raise ConfigurationError("every beta must lie in (0, 1)")
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        prev = np.concatenate([[1.0], alpha_bars[:-1]])
        posterior = (1.0 - prev) / (1.0 - alpha_bars) * betas
        object.__setattr__(self, "betas", _readonly(betas))
        object.__setattr__(self, "alphas", _readonly(alphas))
        object.__setattr__(self, "alpha_bars", _readonly(alpha_bars))
        object.__setattr__(self, "posterior_vars", _readonly(posterior))

    @property
    def T(self) -> int:
        return int(self.betas.size)

    def _check(self, t: int, allow_zero: bool = False) -> int:
        t = int(t)
        lo = 0 if allow_zero else 1
        if not lo <= t <= self.T:
            raise ConfigurationError(f"timestep {t} outside [{lo}, {self.T}]")
        return t

    def alpha_bar(self, t: int) -> float:
        t = self._check(t, allow_zero=True)
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        return float(self.betas[self._check(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check(t) - 1])

    def posterior_var(self, t: int, prev: int | None = None) -> float:
        """Variance of q(x_prev | x_t, x_0); ``prev`` defaults to ``t - 1``.

        For ``prev < t - 1`` (skipped steps) the effective beta is
        ``1 - abar_t / abar_prev``.
        """
        t = self._check(t)
        prev = t - 1 if prev is None else int(prev)
        if prev >= t:
            raise OrderingError(f"expected t > prev, got t={t}, prev={prev}")
        ab_t, ab_prev = self.alpha_bar(t), self.alpha_bar(prev)
        return (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev)

    def to_csv(self) -> str:
        lines = ["t,beta,alpha_bar,posterior_var"]
        for t in range(1, self.T + 1):
            lines.append(
                f"{t},{float(self.betas[t - 1])!r},{float(self.alpha_bars[t - 1])!r},"
                f"{float(self.posterior_vars[t - 1])!r}"
            )
        return "\n".join(lines) + "\n"


def build_schedule(
    kind: str = "linear",
    T: int = 1000,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
) -> NoiseSchedule:
    """Construct a schedule of the given ``kind``.

    ``linear`` spaces betas evenly from ``beta_min`` to ``beta_max``;
    ``scaled_linear`` spaces their square roots evenly; ``cosine`` follows the
    squared-cosine alpha-bar curve with betas clipped into the given bounds.
    """
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ConfigurationError(f"T must be a positive integer, got {T!r}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ConfigurationError(
            f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}"
        )
    if kind == "linear":
        betas = np.linspace(beta_min, beta_max, T, dtype=np.float64)
    elif kind == "scaled_linear":
        betas = np.linspace(math.sqrt(beta_min), math.sqrt(beta_max), T) ** 2
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((steps + s) / (1 + s) * math.pi / 2) ** 2
        ab = f / f[0]
        betas = np.clip(1.0 - ab[1:] / ab[:-1], beta_min, beta_max)
    else:
        raise ConfigurationError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(betas)


@dataclass(frozen=True)
class TimestepGrid:
    """Strictly decreasing reverse-time grid; the step after the last entry is t=0."""

    steps: tuple[int, ...]

    def __post_init__(self) -> None:
        steps = tuple(int(s) for s in self.steps)
        if not steps:
            raise ConfigurationError("timestep grid must be nonempty")
        if steps[-1] < 1:
            raise ConfigurationError("grid timesteps must be >= 1")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise OrderingError(f"grid must be strictly decreasing: {steps}")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[int]:
        return iter(self.steps)

    def pairs(self) -> list[tuple[int, int]]:
        """(t, prev) transitions of the reverse sweep, ending at prev = 0."""
        return list(zip(self.steps, self.steps[1:] + (0,)))

    def below(self, t_start: int) -> "TimestepGrid | None":
        """Sub-grid starting at ``t_start`` followed by grid entries below it."""
        if t_start <= 0:
            return None
        rest = tuple(s for s in self.steps if s < t_start)
        return TimestepGrid((int(t_start),) + rest)

    def check_horizon(self, T: int) -> None:
        if self.steps[0] > T:
            raise ConfigurationError(
                f"grid reaches t={self.steps[0]} beyond horizon T={T}"
            )


def select_timesteps(T: int, n_steps: int) -> TimestepGrid:
    """Evenly spaced grid over [1, T] containing T, returned in reverse order."""
    if T < 1 or n_steps < 1:
        raise ConfigurationError("T and n_steps must be >= 1")
    if n_steps > T:
        raise ConfigurationError(f"n_steps={n_steps} exceeds horizon T={T}")
    return TimestepGrid(tuple((i * T) // n_steps for i in range(n_steps, 0, -1)))


@dataclass(frozen=True)
class SigmaPolicy:
    """Noise level of the generalized reverse update.

    ``ddim`` is deterministic, ``ddpm`` uses the posterior variance, ``vci``
    uses ``1 - abar_prev`` (cancelling the directional term) and ``eta``
    scales the DDPM standard deviation by ``eta``.
    """

    mode: str = "ddim"
    eta: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("ddpm", "ddim", "vci", "eta"):
            raise ConfigurationError(f"unknown sigma policy {self.mode!r}")
        if self.mode == "eta" and self.eta < 0:
            raise ConfigurationError("eta must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "SigmaPolicy":
        """Parse ``ddpm``, ``ddim``, ``vci`` or ``eta:<value>``."""
        if text.startswith("eta:"):
            try:
                return cls("eta", float(text[4:]))
            except ValueError as exc:
                raise ConfigurationError(f"bad eta policy {text!r}") from exc
        return cls(text)

    def __str__(self) -> str:
        return f"eta:{self.eta!r}" if self.mode == "eta" else self.mode


def sigma(schedule: NoiseSchedule, t: int, prev: int, policy: SigmaPolicy) -> float:
    if t <= prev:
        raise OrderingError(f"expected t > prev, got t={t}, prev={prev}")
    if prev < 0:
        raise OrderingError("prev must be >= 0")
    if policy.mode == "ddim":
        schedule._check(t)
        return 0.0
    if policy.mode == "vci":
        schedule._check(t)
        return math.sqrt(1.0 - schedule.alpha_bar(prev))
    std = math.sqrt(schedule.posterior_var(t, prev))
    return std if policy.mode == "ddpm" else policy.eta * std


def direction_coefficient(schedule: NoiseSchedule, prev: int, sigma_t: float) -> float:
    """sqrt(1 - abar_prev - sigma^2), the weight of the directional term.

    A residue within rounding of zero is treated as zero, so the VCI policy
    yields exactly 0. Returns NaN for a truly negative radicand; callers
    decide how to fail.
    """
    rest = 1.0 - schedule.alpha_bar(prev)
    radicand = rest - sigma_t * sigma_t
    if abs(radicand) <= _RADICAND_ULPS * max(1.0, rest):
        return 0.0
    if radicand < 0:
        return math.nan
    return math.sqrt(radicand)
