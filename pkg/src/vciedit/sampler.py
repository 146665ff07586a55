"""Forward process, clean-sample estimates, the generalized reverse update and samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .denoiser import Condition, Denoiser, cfg_predict
from .errors import ConfigurationError, PolicyError
from .schedule import NoiseSchedule, SigmaPolicy, TimestepGrid, direction_coefficient, sigma


class RngStream:
    """Seeded Gaussian stream on a counter-based bit generator.

    ``counter`` is the number of normal variates drawn so far; two streams
    with the same seed produce the same sequence on every platform.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.counter = 0
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def normal(self, shape: Sequence[int] | int) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        self.counter += out.size
        return out

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


@dataclass
class Trajectory:
    states: list[tuple[int, np.ndarray]] = field(default_factory=list)
    nfe: int = 0

    @property
    def timesteps(self) -> list[int]:
        return [t for t, _ in self.states]


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ConfigurationError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def forward_step(x_prev: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """One Markov noising step x_{t-1} -> x_t."""
    _same_shape(x_prev, noise)
    return math.sqrt(schedule.alpha(t)) * np.asarray(x_prev) + math.sqrt(schedule.beta(t)) * np.asarray(noise)


def forward_marginal(x0: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    _same_shape(x0, noise)
    ab = schedule.alpha_bar(t)
    return math.sqrt(ab) * np.asarray(x0) + math.sqrt(1.0 - ab) * np.asarray(noise)


def estimate_x0(x_t: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    _same_shape(x_t, eps)
    ab = schedule.alpha_bar(t)
    return (np.asarray(x_t) - math.sqrt(1.0 - ab) * np.asarray(eps)) / math.sqrt(ab)


def reverse_update(
    x_t: np.ndarray,
    t: int,
    prev: int,
    eps: np.ndarray,
    sigma_t: float,
    fresh_noise: np.ndarray,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Generalized reverse step t -> prev.

    sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev - sigma^2) eps + sigma z.
    """
    _same_shape(x_t, fresh_noise)
    coef = direction_coefficient(schedule, prev, sigma_t)
    if math.isnan(coef):
        raise PolicyError(
            f"sigma={sigma_t} too large for prev={prev}: 1 - abar_prev - sigma^2 < 0"
        )
    x0_hat = estimate_x0(x_t, t, eps, schedule)
    out = math.sqrt(schedule.alpha_bar(prev)) * x0_hat
    if coef:
        out = out + coef * eps
    if sigma_t:
        out = out + sigma_t * np.asarray(fresh_noise)
    return out


def sample(
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    grid: TimestepGrid,
    policy: SigmaPolicy,
    c: Condition,
    guidance: float,
    rng: RngStream,
    shape: Sequence[int] | int,
    x_init: np.ndarray | None = None,
    record: bool = True,
) -> tuple[np.ndarray, Trajectory]:
    """Run the reverse sweep over ``grid`` down to t=0.

    Starts from ``x_init`` if given, otherwise from a standard normal draw.
    One fresh normal draw of ``shape`` is consumed per step whatever the
    policy, so the stream position only depends on the grid length.
    """
    grid.check_horizon(schedule.T)
    x = rng.normal(shape) if x_init is None else np.array(x_init, dtype=np.float64)
    traj = Trajectory()
    if record:
        traj.states.append((grid.steps[0], x.copy()))
    for t, prev in grid.pairs():
        pred = cfg_predict(denoiser, x, t, c, guidance)
        traj.nfe += pred.nfe_cost
        s = sigma(schedule, t, prev, policy)
        z = rng.normal(x.shape)
        x = reverse_update(x, t, prev, pred.eps, s, z, schedule)
        if record:
            traj.states.append((prev, x.copy()))
    return x, traj


def resolve_t_start(grid: TimestepGrid, value: float, convention: str = "timestep") -> int:
    """Map a start value onto a raw timestep of ``grid``.

    ``timestep``: ``value`` is a raw timestep and must be 0 or a grid entry.
    ``steps``: ``value`` counts grid steps from the clean end.
    ``fraction``: ``value`` in [0, 1] is the share of grid steps.
    """
    ascending = grid.steps[::-1]
    if convention == "timestep":
        t = int(value)
        if t != value or (t != 0 and t not in grid.steps):
            raise ConfigurationError(f"t_start={value} is not on the grid")
        return t
    if convention == "fraction":
        if not 0.0 <= value <= 1.0:
            raise ConfigurationError("fraction must lie in [0, 1]")
        value = round(value * len(grid))
        convention = "steps"
    if convention == "steps":
        n = int(value)
        if n != value or not 0 <= n <= len(grid):
            raise ConfigurationError(f"cannot invert {value} of {len(grid)} steps")
        return 0 if n == 0 else ascending[n - 1]
    raise ConfigurationError(f"unknown t_start convention {convention!r}")


def ddim_invert(
    denoiser: Denoiser,
    x0: np.ndarray,
    c: Condition,
    grid: TimestepGrid,
    t_start: int,
    guidance: float,
    schedule: NoiseSchedule,
    record: bool = True,
) -> tuple[np.ndarray, Trajectory]:
    """Deterministic inversion of ``x0`` up the grid until ``t_start``.

    Each step prev -> t reuses the noise predicted at (x_prev, t) in the
    sigma = 0 update solved for x_t.
    """
    if t_start > schedule.T:
        raise ConfigurationError(f"t_start={t_start} exceeds horizon T={schedule.T}")
    if t_start != 0 and t_start not in grid.steps:
        raise ConfigurationError(f"t_start={t_start} is not on the grid")
    x = np.array(x0, dtype=np.float64)
    traj = Trajectory()
    if record:
        traj.states.append((0, x.copy()))
    up = [s for s in grid.steps[::-1] if s <= t_start]
    prev = 0
    for t in up:
        pred = cfg_predict(denoiser, x, t, c, guidance)
        traj.nfe += pred.nfe_cost
        ab_prev, ab_t = schedule.alpha_bar(prev), schedule.alpha_bar(t)
        x0_hat = (x - math.sqrt(1.0 - ab_prev) * pred.eps) / math.sqrt(ab_prev)
        x = math.sqrt(ab_t) * x0_hat + math.sqrt(1.0 - ab_t) * pred.eps
        if record:
            traj.states.append((t, x.copy()))
        prev = t
    return x, traj


def ddim_reconstruct(
    denoiser: Denoiser,
    x_start: np.ndarray,
    c: Condition,
    grid: TimestepGrid,
    t_start: int,
    guidance: float,
    schedule: NoiseSchedule,
) -> tuple[np.ndarray, Trajectory]:
    """Deterministic descent from a latent at ``t_start`` to t=0."""
    sub = grid.below(t_start)
    if sub is None:
        return np.array(x_start, dtype=np.float64), Trajectory([(0, np.array(x_start))], 0)
    # no noise is consumed under ddim; the stream only satisfies the signature
    return sample(
        denoiser, schedule, sub, SigmaPolicy("ddim"), c, guidance,
        RngStream(0), np.shape(x_start), x_init=x_start,
    )
