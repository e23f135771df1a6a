import logging

import estraces as traces
import numpy as _np

logger = logging.getLogger(__name__)


class FmriContainer:
    """Provides a wrapper object around a trial set and a voxel frame consumed by trainers.

    Every trainer takes its inputs from a container. This wrapper provides helpers for
    batch processing, with an optional deterministic shuffling of trials.

    Attributes:
        frame (slice or ndarray, default=None): optional voxel frame.
        preprocesses (callable or list of callable, default=[]): list of callable preprocess function
            which will be applied on voxels when access to batches is invoked. Each preprocess should
            be decorated with :func:`mindcap.preprocess`, as it adds some basic dimensions and shape verifications.

    """

    def __init__(self, ths, frame=None, preprocesses=[]):
        """Initialize the container instance.

        Args:
            ths (:class:`estraces.TraceHeaderSet`): trial set, one trace per trial, with at least
                `stimulus` and `repetition` metadata.
            frame (slice or ndarray, default=None): optional voxel frame.
            preprocesses (callable or list of callable, default=[]): preprocesses applied on batches voxels.

        """
        self._set_ths(ths)
        self._set_frame(frame)
        self._set_preprocesses(preprocesses)
        self._trial_size = None

    @classmethod
    def from_arrays(cls, voxels, frame=None, preprocesses=[], **metadatas):
        """Builds a container from an in-memory voxels array and metadata arrays of same length."""
        if not isinstance(voxels, _np.ndarray) or voxels.ndim != 2:
            raise TypeError(f'voxels must be a 2 dimensions ndarray, not {type(voxels)}.')
        for name, values in metadatas.items():
            if len(values) != len(voxels):
                raise ValueError(f'Metadata {name} has {len(values)} values for {len(voxels)} trials.')
        ths = traces.formats.read_ths_from_ram(samples=voxels, **{k: _np.asarray(v) for k, v in metadatas.items()})
        return cls(ths, frame=frame, preprocesses=preprocesses)

    @property
    def trial_size(self):
        """Effective trial size after all preprocesses applied."""
        if self._trial_size is None:
            wrapper = _TrialsBatchWrapper(self._ths[0:1], self.frame, self.preprocesses)
            self._trial_size = wrapper.voxels.shape[1]
        return self._trial_size

    def _set_preprocesses(self, preprocesses):
        if (not isinstance(preprocesses, list) or len([p for p in preprocesses if not callable(p)]) > 0) and not callable(preprocesses):
            raise TypeError(f'preprocesses should be a list of preprocess or a single preprocess function, not {type(preprocesses)}.')
        self.preprocesses = [preprocesses] if not isinstance(preprocesses, list) else preprocesses

    def _set_ths(self, ths):
        if not isinstance(ths, traces.TraceHeaderSet):
            raise TypeError(f'ths must be an instance of TraceHeaderSet, not {type(ths)}')
        if len(ths) == 0:
            raise ValueError('ths must hold at least one trial.')
        self._ths = ths

    def _set_frame(self, frame):
        if frame is not None and not isinstance(frame, (slice, _np.ndarray, list)):
            raise TypeError(f'frame should be a slice, a list or a ndarray, not {type(frame)}.')
        self.frame = frame if frame is not None else ...

    def __len__(self):
        return len(self._ths)

    @property
    def metadatas(self):
        return {key: _np.asarray(self._ths.metadatas[key]) for key in self._ths.metadatas.keys()}

    @property
    def voxels(self):
        """All trials voxels, preprocessed."""
        return _TrialsBatchWrapper(self._ths, self.frame, self.preprocesses).voxels

    def batches(self, batch_size, seed=None):
        """Provides an iterable of wrapper class around trials subsets of size `batch_size`.

        The wrapper provides voxels and metadatas properties. Frame and preprocesses are applied
        when access to these properties is made.

        Args:
            batch_size (int): number of trials per batch.
            seed (int, default=None): if given, trials are shuffled with a generator seeded with it,
                so that the order is a pure function of the seed.

        """
        if not isinstance(batch_size, int) or batch_size <= 0:
            raise ValueError(f'batch_size must be a positive integer, not {batch_size}.')
        order = _np.arange(len(self._ths))
        if seed is not None:
            order = _np.random.default_rng(seed).permutation(order)
        return _TrialsBatchIterable(
            ths=self._ths,
            order=order,
            batch_size=batch_size,
            frame=self.frame,
            preprocesses=self.preprocesses
        )

    @property
    def _frame_str(self):
        if isinstance(self.frame, _np.ndarray):
            return f'{str(self.frame)[:20]} ... {str(self.frame)[-20:]}'.replace('\n', '')
        elif self.frame is ...:
            return 'All'
        else:
            return str(self.frame)

    def __str__(self):
        template_str = f'''fMRI container:
    Number of trials: {len(self._ths)}
    Voxels          : {len(self._ths.samples[0])}
    Metadata        : {list(self._ths.metadatas.keys())}
    Frame           : {self._frame_str}
    Preprocesses    : {[p.__name__ for p in self.preprocesses] if len(self.preprocesses) > 0 else 'None'}
        '''
        return template_str


class _TrialsBatchWrapper:

    def __init__(self, ths, frame, preprocesses):
        self.ths = ths
        self.frame = frame
        self.preprocesses = preprocesses

    @property
    def voxels(self):
        voxels = _np.asarray(self.ths.samples[:], dtype='float32')[:, self.frame]
        for preprocess in self.preprocesses:
            voxels = preprocess(voxels)
        return voxels

    @property
    def metadatas(self):
        return {key: _np.asarray(self.ths.metadatas[key]) for key in self.ths.metadatas.keys()}

    def __len__(self):
        return len(self.ths)


class _TrialsBatchIterable:

    def __init__(self, ths, order, batch_size, frame, preprocesses):
        self._ths = ths
        self._batches = [order[start:start + batch_size] for start in range(0, len(order), batch_size)]
        self._contiguous = bool(_np.all(order == _np.arange(len(order))))
        self.frame = frame
        self.preprocesses = preprocesses

    def _sub_ths(self, indices):
        if self._contiguous:
            return self._ths[int(indices[0]):int(indices[-1]) + 1]
        return self._ths[[int(i) for i in indices]]

    def __iter__(self):
        for indices in self._batches:
            yield _TrialsBatchWrapper(self._sub_ths(indices), frame=self.frame, preprocesses=self.preprocesses)

    def __getitem__(self, key):
        return _TrialsBatchWrapper(self._sub_ths(self._batches[key]), frame=self.frame, preprocesses=self.preprocesses)

    def __len__(self):
        return len(self._batches)
