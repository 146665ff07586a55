"""Inversion-free diffusion editing (VCI / ControlVCI) with analytic mixture denoisers."""

from .denoiser import (
    GMMDenoiser,
    GMMSpec,
    Mixture,
    NoisePrediction,
    ScriptedDenoiser,
    cfg_predict,
    gmm_predict_noise,
    score_oracle_fd,
    scripted_denoiser,
    two_class_gmm,
)
from .editor import (
    EditRequest,
    EditResult,
    GuidanceConfig,
    blend_edit_noise,
    consistent_noise,
    ddim_inversion_edit,
    run_edit,
    sdedit,
    vci_edit,
)
from .errors import (
    ConfigurationError,
    DomainError,
    FixtureError,
    FormatError,
    NumericError,
    OrderingError,
    PolicyError,
    VCIError,
)
from .metrics import (
    EmbeddingSet,
    FeatureEmbedder,
    alignment_score,
    feature_distance,
    frechet_distance,
    pearson_cc,
)
from .sampler import (
    RngStream,
    Trajectory,
    ddim_invert,
    ddim_reconstruct,
    estimate_x0,
    forward_marginal,
    forward_step,
    reverse_update,
    sample,
)
from .schedule import NoiseSchedule, SigmaPolicy, TimestepGrid, build_schedule, select_timesteps, sigma

__version__ = "0.1.0"
