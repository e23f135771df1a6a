from ._base import ReconError  # noqa: F401
from .ridge import RidgeMap, fit_ridge, cross_validate, r2_score  # noqa: F401
from .autoencoder import SketchAutoencoder, fit_autoencoder, decode_sketch  # noqa: F401
from .diffusion import (  # noqa: F401
    DiffusionSchedule, Denoiser, DenoiserTraining, forward_diffuse, reverse_diffuse, predict_noise,
    train_denoiser, load_denoiser, noise_prediction_mse
)
from .probe import ImageFeatureProbe  # noqa: F401
from .pipeline import ReconstructionResult, ReconComponents, reconstruct, fit_components, load_components, caption_ids, start_step  # noqa: F401
from ..config import ReconConfig  # noqa: F401
