# -*- coding: utf-8 -*-
from .__version__ import __version__ as VERSION  # noqa: F401, N812
import warnings
import logging

import estraces as traces  # noqa: F401

from .config import (  # noqa: F401
    ConfigError, ExperimentConfig, DataConfig, BedConfig, BlmConfig, ReconConfig, MetricsConfig, HarnessConfig,
    load_config, PROFILES
)
from .checkpoint import Checkpoint, CheckpointError, config_hash  # noqa: F401
from ._utils import seed_everything, derive_seed  # noqa: F401
from .data import (  # noqa: F401
    FmriSample, AlignedFmri, PatchSequence, CaptionSet, DataError, SynthWorld, Dataset, DatasetManifest,
    make_synth, load_dataset, align_and_patchify, average_repetitions, TrainStatistics, standardize, inject_noise
)
from .preprocesses import preprocess, Preprocess, PreprocessError, Standardizer, Aligner, NoiseInjector  # noqa: F401
from .bed import MaskPlan, random_mask, BedError, BrainEncoderDecoder, bed_forward, bed_loss, pretrain_bed  # noqa: F401
from .blm import (  # noqa: F401
    Vocabulary, BlmError, FrozenStackError, CausalLM, FrozenStack, BrainLanguageModel,
    pretrain_lm, pretrain_vlp, train_blm, bt_former_forward, blm_loss, generate_caption, generate_captions
)
from .metrics import (  # noqa: F401
    MetricError, MetricReport, rouge_l, cider, meteor_lite, embed_similarity, pixcorr, ssim,
    two_way_identification, feature_distance
)
from .recon import (  # noqa: F401
    ReconError, RidgeMap, DiffusionSchedule, fit_ridge, fit_autoencoder, forward_diffuse, train_denoiser, reconstruct
)
from .harness import Pipeline, RunRecord, StageError, run_pipeline, noise_sweep, ablate, report  # noqa: F401
from . import container as _container

FmriContainer = _container.FmriContainer
# Set default logging handler to avoid "No handler found" warnings.
logging.getLogger(__name__).addHandler(logging.NullHandler())
# Always display DeprecationWarning by default.
warnings.simplefilter('default', category=DeprecationWarning)
