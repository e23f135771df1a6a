import dataclasses

import numpy as _np

AVERAGED_REPETITION = -1


class DataError(Exception):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class FmriSample:
    """One voxel vector of one subject for one stimulus presentation.

    Attributes:
        subject_id (str): subject identifier.
        stimulus_id (str): stimulus identifier.
        repetition (int): trial repetition index, or -1 for an average over repetitions.
        voxels (ndarray): 1 dimension float array of the subject voxel count length.

    """

    subject_id: str
    stimulus_id: str
    repetition: int
    voxels: _np.ndarray

    def __post_init__(self):
        if not isinstance(self.voxels, _np.ndarray) or self.voxels.ndim != 1:
            raise DataError(f'voxels must be a 1 dimension ndarray, not {type(self.voxels)}.')
        if not _np.all(_np.isfinite(self.voxels)):
            raise DataError(f'Non-finite voxels for {self.subject_id}/{self.stimulus_id}/{self.repetition}.')
        if self.repetition < AVERAGED_REPETITION:
            raise DataError(f'repetition must be positive or {AVERAGED_REPETITION}, not {self.repetition}.')

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True, eq=False)
class AlignedFmri:
    voxels: _np.ndarray
    origin: FmriSample


@dataclasses.dataclass(frozen=True, eq=False)
class PatchSequence:
    """Aligned voxels sliced in P contiguous patches of `patch_size` voxels."""

    patches: _np.ndarray
    origin: FmriSample = None

    @property
    def patch_count(self):
        return self.patches.shape[0]

    @property
    def patch_size(self):
        return self.patches.shape[1]


@dataclasses.dataclass(frozen=True)
class CaptionSet:
    stimulus_id: str
    captions: tuple

    def __post_init__(self):
        if len(self.captions) < 1:
            raise DataError(f'Stimulus {self.stimulus_id} has no caption.')
        if any(not str(c).strip() for c in self.captions):
            raise DataError(f'Stimulus {self.stimulus_id} has an empty caption.')
        object.__setattr__(self, 'captions', tuple(self.captions))

    def __len__(self):
        return len(self.captions)
