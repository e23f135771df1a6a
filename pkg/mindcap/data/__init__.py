from .samples import FmriSample, AlignedFmri, PatchSequence, CaptionSet, DataError, AVERAGED_REPETITION  # noqa: F401
from .transforms import (  # noqa: F401
    align, align_and_patchify, patchify, unpatchify, average_repetitions,
    TrainStatistics, standardize, inject_noise, noise_base_std
)
from .world import SynthWorld, TEMPLATES, stimulus_id  # noqa: F401
from .dataset import DatasetManifest, Dataset, make_synth, load_dataset  # noqa: F401
