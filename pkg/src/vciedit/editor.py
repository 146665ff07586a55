"""Inversion-free editing (VCI / ControlVCI) and the SDEdit and DDIM-inversion baselines."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .denoiser import Condition, Denoiser, cfg_predict
from .errors import ConfigurationError, DomainError
from .sampler import (
    RngStream,
    ddim_invert,
    ddim_reconstruct,
    estimate_x0,
    forward_marginal,
    sample,
)
from .schedule import NoiseSchedule, SigmaPolicy, TimestepGrid

MODES = ("vci", "control_vci", "sdedit", "ddim_inversion")
_MODE_ALIASES = {"control-vci": "control_vci", "ddim-inv": "ddim_inversion", "ddim_inv": "ddim_inversion"}


def normalize_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ConfigurationError(f"unknown edit mode {mode!r}")
    return mode


@dataclass(frozen=True)
class GuidanceConfig:
    w_src: float = 3.0
    w_tgt: float = 15.0

    def __post_init__(self) -> None:
        if self.w_src < 0 or self.w_tgt < 0:
            raise ConfigurationError("guidance scales must be >= 0")


@dataclass(frozen=True, eq=False)
class EditRequest:
    x0: np.ndarray
    c_src: Condition
    c_tgt: Condition
    grid: TimestepGrid
    mode: str = "control_vci"
    phi: float = 0.61
    guidance: GuidanceConfig = GuidanceConfig()
    t_start: int | None = None
    seed: int = 0
    sdedit_policy: SigmaPolicy = SigmaPolicy("ddpm")

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=np.float64))
        if not 0.0 <= self.phi <= 1.0:
            raise DomainError(f"phi must lie in [0, 1], got {self.phi}")
        needs_start = self.mode in ("sdedit", "ddim_inversion")
        if needs_start and self.t_start is None:
            raise ConfigurationError(f"mode {self.mode} requires t_start")
        if not needs_start and self.t_start is not None:
            raise ConfigurationError(f"mode {self.mode} does not take t_start")
        if not np.all(np.isfinite(self.x0)):
            raise ConfigurationError("input sample must be finite")


@dataclass
class EditResult:
    output: np.ndarray
    nfe: int
    wall_time: float
    # (t, |delta eps|, |eps_cons|, |eps_edit|, var(eps_edit)) per step
    per_step_log: list[tuple[int, float, float, float, float]] = field(default_factory=list)

    def log_csv(self) -> str:
        lines = ["t,delta_norm,cons_norm,edit_norm,edit_var"]
        lines += [f"{t},{a!r},{b!r},{e!r},{v!r}" for t, a, b, e, v in self.per_step_log]
        return "\n".join(lines) + "\n"


def consistent_noise(x_t_src: np.ndarray, x0: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Noise that makes the clean-sample estimate at (x_t_src, t) equal x0 exactly."""
    if t == 0:
        raise DomainError("consistent noise is undefined at t=0")
    if np.shape(x_t_src) != np.shape(x0):
        raise ConfigurationError("x_t and x0 shapes differ")
    ab = schedule.alpha_bar(t)
    return (np.asarray(x_t_src) - math.sqrt(ab) * np.asarray(x0)) / math.sqrt(1.0 - ab)


def blend_edit_noise(delta: np.ndarray, eps_cons: np.ndarray, phi: float, mode: str) -> np.ndarray:
    """Combine the edit direction with the consistent noise.

    ``control_vci`` keeps the second moment at one for unit-variance,
    independent branch predictions: (phi / sqrt 2) delta + sqrt(1 - phi^2) eps_cons.
    ``vci`` adds them unscaled and ignores ``phi``.
    """
    if not 0.0 <= phi <= 1.0:
        raise DomainError(f"phi must lie in [0, 1], got {phi}")
    if np.shape(delta) != np.shape(eps_cons):
        raise ConfigurationError("delta and eps_cons shapes differ")
    mode = normalize_mode(mode)
    if mode == "vci":
        return np.asarray(delta) + np.asarray(eps_cons)
    if mode != "control_vci":
        raise ConfigurationError(f"blend is undefined for mode {mode!r}")
    # exact endpoints: phi=0 must return eps_cons bit-for-bit
    if phi == 0.0:
        return np.array(eps_cons, dtype=np.float64)
    return (phi / math.sqrt(2.0)) * np.asarray(delta) + math.sqrt(1.0 - phi * phi) * np.asarray(eps_cons)


def vci_edit(request: EditRequest, denoiser: Denoiser, schedule: NoiseSchedule) -> EditResult:
    """Dual-branch inversion-free edit.

    Both branches start from the same normal draw and share the per-step
    noise. The source branch is advanced analytically towards x0; its
    prediction only feeds the edit direction.
    """
    if request.mode not in ("vci", "control_vci"):
        raise ConfigurationError(f"vci_edit cannot run mode {request.mode!r}")
    request.grid.check_horizon(schedule.T)
    start = time.perf_counter()
    rng = RngStream(request.seed)
    x0 = request.x0
    g = request.guidance
    x_src = rng.normal(x0.shape)
    x_tgt = x_src.copy()
    nfe = 0
    log = []
    for t, prev in request.grid.pairs():
        p_src = cfg_predict(denoiser, x_src, t, request.c_src, g.w_src)
        p_tgt = cfg_predict(denoiser, x_tgt, t, request.c_tgt, g.w_tgt)
        nfe += p_src.nfe_cost + p_tgt.nfe_cost
        delta = p_tgt.eps - p_src.eps
        eps_cons = consistent_noise(x_src, x0, t, schedule)
        eps_edit = blend_edit_noise(delta, eps_cons, request.phi, request.mode)
        log.append((
            t,
            float(np.linalg.norm(delta)),
            float(np.linalg.norm(eps_cons)),
            float(np.linalg.norm(eps_edit)),
            float(np.var(eps_edit)) if eps_edit.size > 1 else 0.0,
        ))
        z = rng.normal(x0.shape)
        ab_prev = schedule.alpha_bar(prev)
        f_tgt = estimate_x0(x_tgt, t, eps_edit, schedule)
        # f_src equals x0 in exact arithmetic; computing it the same way as
        # f_tgt keeps identical branches bitwise identical, so rounding never
        # leaks into delta for same-prompt or phi=0 edits
        f_src = estimate_x0(x_src, t, eps_cons, schedule)
        if prev == 0:
            x_tgt, x_src = f_tgt, f_src
        else:
            a, b = math.sqrt(ab_prev), math.sqrt(1.0 - ab_prev)
            x_tgt = a * f_tgt + b * z
            x_src = a * f_src + b * z
    return EditResult(x_tgt, nfe, time.perf_counter() - start, log)


def sdedit(request: EditRequest, denoiser: Denoiser, schedule: NoiseSchedule) -> EditResult:
    """Noise x0 to ``t_start`` and resample under the target condition."""
    if request.mode != "sdedit":
        raise ConfigurationError(f"sdedit cannot run mode {request.mode!r}")
    t_start = int(request.t_start)
    if not 0 <= t_start <= schedule.T:
        raise ConfigurationError(f"t_start={t_start} outside [0, {schedule.T}]")
    start = time.perf_counter()
    sub = request.grid.below(t_start)
    if sub is None:
        return EditResult(request.x0.copy(), 0, time.perf_counter() - start)
    rng = RngStream(request.seed)
    x_t = forward_marginal(request.x0, t_start, rng.normal(request.x0.shape), schedule)
    out, traj = sample(
        denoiser, schedule, sub, request.sdedit_policy, request.c_tgt,
        request.guidance.w_tgt, rng, request.x0.shape, x_init=x_t, record=False,
    )
    return EditResult(out, traj.nfe, time.perf_counter() - start)


def ddim_inversion_edit(request: EditRequest, denoiser: Denoiser, schedule: NoiseSchedule) -> EditResult:
    """Invert with the source condition up to ``t_start``, then resample with the target."""
    if request.mode != "ddim_inversion":
        raise ConfigurationError(f"ddim_inversion_edit cannot run mode {request.mode!r}")
    start = time.perf_counter()
    g = request.guidance
    latent, inv = ddim_invert(
        denoiser, request.x0, request.c_src, request.grid, int(request.t_start),
        g.w_src, schedule, record=False,
    )
    out, rec = ddim_reconstruct(
        denoiser, latent, request.c_tgt, request.grid, int(request.t_start), g.w_tgt, schedule
    )
    return EditResult(out, inv.nfe + rec.nfe, time.perf_counter() - start)


def run_edit(request: EditRequest, denoiser: Denoiser, schedule: NoiseSchedule) -> EditResult:
    if request.mode in ("vci", "control_vci"):
        return vci_edit(request, denoiser, schedule)
    if request.mode == "sdedit":
        return sdedit(request, denoiser, schedule)
    return ddim_inversion_edit(request, denoiser, schedule)
