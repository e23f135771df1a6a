"""Caption-conditioned reconstruction: ridge to sketch latent, sketch decode, forward noising and conditioned reverse pass."""
import dataclasses
import logging

import numpy as _np
import torch

from .. import _utils
from ..config import ReconConfig
from ._base import ReconError
from .autoencoder import SketchAutoencoder, decode_sketch, fit_autoencoder
from .diffusion import DiffusionSchedule, Denoiser, forward_diffuse, reverse_diffuse, train_denoiser, load_denoiser, unconditional_ids
from .ridge import RidgeMap, fit_ridge

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ReconstructionResult:
    """Output of :func:`reconstruct`.

    Attributes:
        image (ndarray): (H, W, 3) reconstruction in [0, 1].
        sketch (ndarray): decoded ridge latent, the low-level guess.
        caption (str): conditioning caption, empty for an unconditioned pass.
        start_step (int): number of sampling steps the sketch latent was noised for.
        reverse_steps (int): reverse steps executed.
        seed (int): noise seed.

    """

    image: _np.ndarray
    sketch: _np.ndarray
    caption: str
    start_step: int
    reverse_steps: int
    seed: int


def start_step(strength, steps):
    if not 0 <= strength <= 1:
        raise ReconError(f'strength must be in [0, 1], not {strength}.')
    return int(_np.floor(strength * steps + 0.5))


def caption_ids(captions, vocabulary, max_len):
    """(n, max_len) conditioning ids; None or empty captions give an all padding row."""
    ids = unconditional_ids(len(captions), max_len, vocabulary.pad_id)
    for row, caption in enumerate(captions):
        if caption:
            ids[row] = torch.from_numpy(vocabulary.batch([caption], max_len)[0])
    return ids


def _check_components(**components):
    missing = [name for name, value in components.items() if value is None]
    if missing:
        raise ReconError(f'Missing reconstruction components: {missing}.')


def reconstruct(fmri, caption, ridge, autoencoder, denoiser, schedule, vocabulary, strength=0.8, steps=50,
                guidance_scale=1., stochastic=False, seed=0, max_len=16):
    """Reconstructs the viewed image of one recording.

    The ridge latent is decoded to a sketch, re-encoded, noised for round(strength × steps) sampling
    steps and denoised back to step 0 conditioned on `caption`. With strength 0, the result is the
    sketch round trip and no reverse step runs.

    Args:
        fmri (ndarray): (V,) raw voxels of the subject the ridge map was fitted on.
        caption (str): conditioning caption, None or empty for an unconditioned pass.
        ridge (RidgeMap): voxels to sketch latent map.
        autoencoder (SketchAutoencoder): sketch encoder and decoder.
        denoiser (Denoiser): trained noise predictor.
        schedule (DiffusionSchedule): denoiser training schedule.
        vocabulary (Vocabulary): caption vocabulary.
        strength (float, default=0.8): diffusion strength in [0, 1].
        steps (int, default=50): sampling steps.
        guidance_scale (float, default=1.): classifier-free guidance, 1 for the plain conditional pass.
        stochastic (bool, default=False): ancestral instead of deterministic sampling.
        seed (int, default=0): forward noise seed.
        max_len (int, default=16): caption ids length.

    Returns:
        (:class:`ReconstructionResult`)

    """
    _check_components(ridge=ridge, autoencoder=autoencoder, denoiser=denoiser, schedule=schedule, vocabulary=vocabulary)
    fmri = _np.asarray(fmri, dtype='float64')
    if fmri.ndim != 1:
        raise ReconError(f'reconstruct takes one (V,) recording, not {fmri.shape}.')
    sketch = decode_sketch(ridge.predict(fmri), autoencoder)
    latent = autoencoder.encode(sketch)
    t0 = start_step(strength, steps)
    if t0 == 0:
        return ReconstructionResult(autoencoder.decode(latent), sketch, caption or '', 0, 0, seed)
    if not _np.all(_np.isfinite(latent)):
        raise ReconError('Non-finite sketch latent.')
    rng = _np.random.default_rng(seed)
    timesteps = schedule.timesteps(steps)
    noisy = forward_diffuse(latent, int(timesteps[t0]), schedule, rng)
    ids = caption_ids([caption], vocabulary, max_len)
    generator = _utils.torch_generator(_utils.derive_seed(seed, 'reverse'))
    z, executed = reverse_diffuse(
        torch.from_numpy(noisy[None].astype('float32')), t0, ids, denoiser, schedule, sampling_steps=steps,
        guidance_scale=guidance_scale, stochastic=stochastic, generator=generator
    )
    image = autoencoder.decode(z[0].double().numpy())
    return ReconstructionResult(image, sketch, caption or '', t0, executed, seed)


@dataclasses.dataclass
class ReconComponents:
    """Fitted ridge map, sketch autoencoder and denoiser of one subject."""

    ridge: RidgeMap
    autoencoder: SketchAutoencoder
    denoiser: Denoiser
    schedule: DiffusionSchedule
    checkpoints: dict

    def reconstruct(self, fmri, caption, vocabulary, config, seed=0, max_len=16, strength=None):
        return reconstruct(
            fmri, caption, self.ridge, self.autoencoder, self.denoiser, self.schedule, vocabulary,
            strength=config.strength if strength is None else strength, steps=config.steps,
            guidance_scale=config.guidance_scale, stochastic=config.stochastic, seed=seed, max_len=max_len
        )


def fit_components(dataset, subject, vocabulary, caption_table, config, seed=0, max_len=16):
    """Fits the sketch autoencoder, the ridge map of `subject` and the caption-conditioned denoiser.

    The ridge map regresses the separate training trials on the latents of the viewed images;
    the denoiser is trained on every (training image latent, caption) pair.

    Args:
        dataset (Dataset): dataset.
        subject (str): subject id.
        vocabulary (Vocabulary): frozen LM vocabulary.
        caption_table (ndarray): frozen LM token embedding table.
        config (ReconConfig): reconstruction parameters.
        seed (int, default=0): seed.
        max_len (int, default=16): caption ids length.

    Returns:
        (:class:`ReconComponents`)

    """
    if not isinstance(config, ReconConfig):
        raise TypeError(f'config must be a ReconConfig, not {type(config)}.')
    images = dataset.images('train')
    autoencoder = fit_autoencoder(images, config.latent_dim)
    logger.info(f'Sketch autoencoder train fidelity (pixcorr) {autoencoder.fidelity(images[:64]):.3f}.')
    latents = autoencoder.encode(images)

    voxels, stimuli, _ = dataset.trials(subject, 'train')
    ridge = fit_ridge(voxels, latents[stimuli], ridge_lambda=config.ridge_lambda, grid=config.ridge_grid,
                      folds=config.ridge_folds, seed=_utils.derive_seed(seed, 'ridge', subject))

    schedule = DiffusionSchedule.from_config(config)
    sets = dataset.caption_sets('train')
    pair_latents = _np.concatenate([_np.repeat(latents[i:i + 1], len(s), axis=0) for i, s in enumerate(sets)])
    pair_ids = vocabulary.batch([c for s in sets for c in s.captions], max_len)
    denoiser_checkpoint = train_denoiser(pair_latents.astype('float32'), pair_ids, caption_table, schedule, config,
                                         seed=_utils.derive_seed(seed, 'denoiser'), pad_id=vocabulary.pad_id)
    denoiser, _ = load_denoiser(denoiser_checkpoint, schedule)
    checkpoints = {
        'ridge': ridge.to_checkpoint(metadata={'subject': subject}),
        'autoencoder': autoencoder.to_checkpoint(),
        'denoiser': denoiser_checkpoint,
    }
    return ReconComponents(ridge, autoencoder, denoiser, schedule, checkpoints)


def load_components(checkpoints):
    """Rebuilds :class:`ReconComponents` from 'ridge', 'autoencoder' and 'denoiser' checkpoints."""
    _check_components(**{k: checkpoints.get(k) for k in ('ridge', 'autoencoder', 'denoiser')})
    denoiser, schedule = load_denoiser(checkpoints['denoiser'])
    return ReconComponents(
        RidgeMap.from_checkpoint(checkpoints['ridge']), SketchAutoencoder.from_checkpoint(checkpoints['autoencoder']),
        denoiser, schedule, dict(checkpoints)
    )
