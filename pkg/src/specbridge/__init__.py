"""specbridge: vocoder-free audio restoration via bridge sampling over
factorized magnitude/phase spectrograms."""

__version__ = "0.1.0"

from .bridge import (
    BridgeSchedule,
    DegradationConfig,
    MaskSpec,
    degrade,
    masked_loss,
    posterior_sample,
    sample_mask,
    training_target,
)
from .denoise import Denoiser, OracleDenoiser, PartitionRouter, ToyDenoiser
from .metrics import EvalReport, eval_protocol_bwe, eval_protocol_inpaint, lsd, sispec
from .sampling import (
    SamplerConfig,
    WindowPlan,
    multidiffusion_eval,
    plan_windows,
    predict_x0,
    restore,
    restore_long,
    reverse_step,
)
from .spectral import (
    ComplexSpec,
    FactorizedSpec,
    StftParams,
    Waveform,
    band_average_magnitude,
    factorize,
    istft,
    phase_ortho_error,
    reconstruct,
    stft,
    svdo_plus,
)

__all__ = [
    "BridgeSchedule",
    "ComplexSpec",
    "DegradationConfig",
    "Denoiser",
    "EvalReport",
    "FactorizedSpec",
    "MaskSpec",
    "OracleDenoiser",
    "PartitionRouter",
    "SamplerConfig",
    "StftParams",
    "ToyDenoiser",
    "Waveform",
    "WindowPlan",
    "band_average_magnitude",
    "degrade",
    "eval_protocol_bwe",
    "eval_protocol_inpaint",
    "factorize",
    "istft",
    "lsd",
    "masked_loss",
    "multidiffusion_eval",
    "phase_ortho_error",
    "plan_windows",
    "posterior_sample",
    "predict_x0",
    "reconstruct",
    "restore",
    "restore_long",
    "reverse_step",
    "sample_mask",
    "sispec",
    "stft",
    "svdo_plus",
    "training_target",
]
