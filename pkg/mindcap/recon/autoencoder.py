import logging

import numpy as _np
from scipy import linalg as _linalg

from .. import checkpoint as _checkpoint
from ..metrics.image import pixcorr
from ._base import ReconError

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'autoencoder'
SCALE_FLOOR = 1e-8


class SketchAutoencoder:
    """Linear image autoencoder with whitened latents.

    Images are flattened, centered and projected on the leading principal axes of the training
    images; each latent coordinate is divided by its training standard deviation. Decoding is
    clipped to [0, 1], so the decode of the zero latent is the (clipped) training mean image.

    Args:
        mean (ndarray): (D,) mean flattened image.
        components (ndarray): (d_z, D) orthonormal principal axes.
        scales (ndarray): (d_z,) latent standard deviations.
        image_shape (tuple): (H, W, 3).

    """

    def __init__(self, mean, components, scales, image_shape):
        self.mean = _np.asarray(mean, dtype='float64')
        self.components = _np.asarray(components, dtype='float64')
        self.scales = _np.maximum(_np.asarray(scales, dtype='float64'), SCALE_FLOOR)
        self.image_shape = tuple(int(s) for s in image_shape)
        if self.components.shape != (len(self.scales), len(self.mean)) or int(_np.prod(self.image_shape)) != len(self.mean):
            raise ReconError(f'Inconsistent autoencoder shapes {self.components.shape}, {self.scales.shape}, {self.image_shape}.')

    @property
    def latent_dim(self):
        return len(self.scales)

    def _flatten(self, images):
        images = _np.asarray(images, dtype='float64')
        if images.shape[-3:] != self.image_shape:
            raise ReconError(f'Images of shape {images.shape[-3:]} do not match autoencoder shape {self.image_shape}.')
        return images.reshape(-1, len(self.mean)), images.ndim == 3

    def encode(self, images):
        """Latents of an (H, W, 3) image or an (n, H, W, 3) batch."""
        flat, single = self._flatten(images)
        latents = (flat - self.mean) @ self.components.T / self.scales
        return latents[0] if single else latents

    def decode(self, latents):
        """Images in [0, 1] of a (d_z,) latent or an (n, d_z) batch."""
        latents = _np.asarray(latents, dtype='float64')
        if latents.shape[-1] != self.latent_dim:
            raise ReconError(f'Latent dimension {latents.shape[-1]} does not match decoder dimension {self.latent_dim}.')
        single = latents.ndim == 1
        flat = self.mean + (_np.atleast_2d(latents) * self.scales) @ self.components
        images = _np.clip(flat, 0., 1.).reshape((-1,) + self.image_shape)
        return images[0] if single else images

    def mean_image(self):
        return self.decode(_np.zeros(self.latent_dim))

    def fidelity(self, images):
        """Mean pixel correlation between images and their round trip."""
        return float(_np.mean([pixcorr(i, r) for i, r in zip(images, self.decode(self.encode(images)))]))

    def to_checkpoint(self, metadata=None):
        tensors = {'mean': self.mean, 'components': self.components, 'scales': self.scales}
        return _checkpoint.Checkpoint(
            CHECKPOINT_KIND, tensors, config={'latent_dim': self.latent_dim, 'image_shape': list(self.image_shape)},
            metadata=metadata
        )

    @classmethod
    def from_checkpoint(cls, checkpoint):
        t = checkpoint.tensors
        return cls(t['mean'], t['components'], t['scales'], checkpoint.config['image_shape'])

    def __str__(self):
        return f'''Sketch autoencoder:
    Image shape : {self.image_shape}
    Latent dim  : {self.latent_dim}
        '''


def fit_autoencoder(images, latent_dim=64):
    """Fits a :class:`SketchAutoencoder` in closed form on (n, H, W, 3) training images."""
    images = _np.asarray(images, dtype='float64')
    if images.ndim != 4 or images.shape[-1] != 3:
        raise ReconError(f'Autoencoder fits (n, H, W, 3) images, not {images.shape}.')
    flat = images.reshape(len(images), -1)
    if not 0 < latent_dim <= min(len(flat) - 1, flat.shape[1]):
        raise ReconError(f'Latent dimension {latent_dim} out of range for {len(flat)} images of size {flat.shape[1]}.')
    mean = flat.mean(axis=0)
    _, singular, vt = _linalg.svd(flat - mean, full_matrices=False)
    components = vt[:latent_dim]
    # deterministic sign: largest absolute loading positive
    signs = _np.sign(components[_np.arange(latent_dim), _np.abs(components).argmax(axis=1)])
    components = components * signs[:, None]
    scales = singular[:latent_dim] / _np.sqrt(len(flat) - 1)
    model = SketchAutoencoder(mean, components, scales, images.shape[1:])
    explained = float((singular[:latent_dim] ** 2).sum() / max((singular ** 2).sum(), SCALE_FLOOR))
    logger.info(f'Sketch autoencoder fitted with {latent_dim} components, explained variance {explained:.3f}.')
    return model


def decode_sketch(z_vis, autoencoder):
    """Low-level sketch image of a predicted visual latent, the basic guess of the reconstruction."""
    return autoencoder.decode(z_vis)
