"""fMRI transforms: alignment, patching, repetition averaging, standardization and noise injection."""
import logging

import numpy as _np

from .samples import AlignedFmri, PatchSequence, FmriSample, DataError, AVERAGED_REPETITION

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


def _check_alignment(size, v_align, patch_size):
    if not isinstance(v_align, int) or not isinstance(patch_size, int) or patch_size <= 0:
        raise TypeError(f'v_align and patch_size must be integers, not {v_align} and {patch_size}.')
    if v_align % patch_size:
        raise ValueError(f'v_align {v_align} is not divisible by patch_size {patch_size}.')
    if v_align < size:
        raise ValueError(f'v_align {v_align} is smaller than the {size} voxels to align.')


def pad_voxels(voxels, v_align):
    """Zero-pads the last axis of a voxels array up to `v_align`."""
    if voxels.shape[-1] > v_align:
        raise ValueError(f'v_align {v_align} is smaller than the {voxels.shape[-1]} voxels to align.')
    pad = [(0, 0)] * (voxels.ndim - 1) + [(0, v_align - voxels.shape[-1])]
    return _np.pad(voxels, pad)


def align(sample, v_align):
    """Zero-pads a sample at the tail up to `v_align` voxels."""
    if not isinstance(sample, FmriSample):
        raise TypeError(f'sample must be a FmriSample, not {type(sample)}.')
    return AlignedFmri(voxels=pad_voxels(sample.voxels, v_align), origin=sample)


def patchify(voxels, v_align, patch_size):
    """Array version of :func:`align_and_patchify`, for a (n, V) array returns (n, P, patch_size)."""
    _check_alignment(voxels.shape[-1], v_align, patch_size)
    padded = pad_voxels(voxels, v_align)
    return padded.reshape(padded.shape[:-1] + (v_align // patch_size, patch_size))


def align_and_patchify(sample, v_align, patch_size):
    """Zero-pads a sample to `v_align` voxels then slices it in contiguous patches.

    Args:
        sample (FmriSample): sample to align.
        v_align (int): aligned voxel count, a multiple of `patch_size`.
        patch_size (int): voxels per patch.

    Returns:
        (:class:`PatchSequence`) of shape (v_align // patch_size, patch_size).

    """
    if not isinstance(sample, FmriSample):
        raise TypeError(f'sample must be a FmriSample, not {type(sample)}.')
    return PatchSequence(patches=patchify(sample.voxels, v_align, patch_size), origin=sample)


def unpatchify(patches):
    """Flattens patches row-major, giving back the aligned voxel vector."""
    array = patches.patches if isinstance(patches, PatchSequence) else _np.asarray(patches)
    return array.reshape(array.shape[:-2] + (-1,))


def average_repetitions(samples):
    """Element-wise mean of the repetitions of one stimulus for one subject.

    The returned sample has repetition set to -1.
    """
    samples = list(samples)
    if not samples:
        raise DataError('Cannot average an empty list of samples.')
    first = samples[0]
    for sample in samples[1:]:
        if sample.stimulus_id != first.stimulus_id or sample.subject_id != first.subject_id:
            raise DataError(
                f'Cannot average samples of different stimuli or subjects: {first.subject_id}/{first.stimulus_id} '
                f'and {sample.subject_id}/{sample.stimulus_id}.'
            )
    voxels = _np.mean(_np.stack([s.voxels for s in samples]), axis=0, dtype=_np.float64).astype(first.voxels.dtype)
    return first.replace(repetition=AVERAGED_REPETITION, voxels=voxels)


class TrainStatistics:
    """Per-voxel mean and standard deviation of a training split.

    Attributes:
        mean (ndarray): per-voxel mean.
        std (ndarray): per-voxel standard deviation, floored to 1e-8.

    """

    def __init__(self, mean, std):
        self.mean = _np.asarray(mean, dtype='float64')
        self.std = _np.maximum(_np.asarray(std, dtype='float64'), STD_FLOOR)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError(f'mean and std must be 1 dimension arrays of same shape, not {self.mean.shape} and {self.std.shape}.')

    @classmethod
    def from_array(cls, voxels):
        voxels = _np.asarray(voxels, dtype='float64')
        if voxels.ndim != 2 or len(voxels) < 2:
            raise ValueError(f'Training statistics need a 2 dimensions array with at least 2 trials, not {voxels.shape}.')
        return cls(voxels.mean(axis=0), voxels.std(axis=0))

    @classmethod
    def from_samples(cls, samples):
        return cls.from_array(_np.stack([s.voxels for s in samples]))

    def __len__(self):
        return len(self.mean)

    def apply(self, voxels):
        voxels = _np.asarray(voxels)
        if voxels.shape[-1] != len(self):
            raise DataError(f'Statistics length {len(self)} does not match {voxels.shape[-1]} voxels.')
        return ((voxels - self.mean) / self.std).astype(voxels.dtype)


def standardize(samples, statistics):
    """Z-scores every voxel of samples with training split statistics.

    Args:
        samples (FmriSample, list of FmriSample or ndarray): samples to standardize.
        statistics (TrainStatistics): statistics computed on the training split only.

    """
    if not isinstance(statistics, TrainStatistics):
        raise TypeError(f'statistics must be a TrainStatistics instance, not {type(statistics)}.')
    if isinstance(samples, FmriSample):
        return samples.replace(voxels=statistics.apply(samples.voxels))
    if isinstance(samples, _np.ndarray):
        return statistics.apply(samples)
    return [s.replace(voxels=statistics.apply(s.voxels)) for s in samples]


def noise_base_std(voxels, mode='abs_mean'):
    """Base noise std of a raw signal: mean of absolute values, or its std."""
    voxels = _np.asarray(voxels, dtype='float64')
    if mode == 'abs_mean':
        return _np.abs(voxels).mean(axis=-1)
    if mode == 'std':
        return voxels.std(axis=-1)
    raise ValueError(f'mode must be abs_mean or std, not {mode}.')


def inject_noise(sample, coeff, base_std_mode='abs_mean', seed=0, base_std=None):
    """Adds zero mean Gaussian noise of std `coeff` × base std to a sample.

    Args:
        sample (FmriSample): raw (pre-standardization) sample.
        coeff (float): noise coefficient, positive.
        base_std_mode (str, default='abs_mean'): how the base std is derived from the sample voxels
            when `base_std` is not given, 'abs_mean' or 'std'.
        seed (int, default=0): noise generator seed.
        base_std (float, default=None): explicit base std.

    """
    if coeff < 0:
        raise ValueError(f'coeff must be positive, not {coeff}.')
    if not isinstance(sample, FmriSample):
        raise TypeError(f'sample must be a FmriSample, not {type(sample)}.')
    if coeff == 0:
        return sample.replace(voxels=sample.voxels.copy())
    scale = coeff * (noise_base_std(sample.voxels, base_std_mode) if base_std is None else base_std)
    noise = _np.random.default_rng(seed).normal(0, 1, size=sample.voxels.shape) * scale
    return sample.replace(voxels=(sample.voxels + noise).astype(sample.voxels.dtype))
