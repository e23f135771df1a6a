import abc
import functools

import numpy as _np


class PreprocessError(Exception):
    """Error related to function preprocess decorated functions."""

    pass


def preprocess(function):
    """Decorator to ensure that the given function proceeds to basic verification suitable for voxels preprocessing.

    A preprocess function must expect one argument voxels, which is expected to be a 2 dimensions float Numpy array,
    one row per trial. It must return a 2 dimensions float Numpy array, with first dimension unchanged
    (number of trials processed) and finite values.

    """
    @functools.wraps(function)
    def _(voxels):
        if not isinstance(voxels, _np.ndarray):
            raise TypeError(f'preprocess expect Numpy ndarray, not {type(voxels)}.')
        if voxels.ndim != 2:
            raise ValueError(f'preprocess expect 2 dimension nparray, not {voxels.ndim} dimensions array.')
        if voxels.dtype.kind != 'f':
            raise ValueError(f'preprocess expect float voxels, not {voxels.dtype}.')
        result = function(voxels)
        if not isinstance(result, _np.ndarray):
            raise PreprocessError(f'Preprocess {function} does not returns correct typed results, but {type(result)}.')
        if result.ndim != 2:
            raise PreprocessError(f'Preprocess {function} returns array of dimension {result.ndim}, instead of 2.')
        if result.shape[0] != voxels.shape[0]:
            raise PreprocessError(f'Preprocess {function} modifies number of trials dimension.')
        if not _np.all(_np.isfinite(result)):
            raise PreprocessError(f'Preprocess {function} returns non-finite values.')
        return result
    return _


class _MetaPreprocess(abc.ABCMeta):

    def __new__(mcls, name, bases, namespace, **kwargs):  # noqa: N804
        cls = super().__new__(mcls, name, bases, namespace, **kwargs)
        base_func = cls.__call__

        def pre_call(obj, voxels):
            @preprocess
            def _(voxels):
                return base_func(obj, voxels)
            return _(voxels)

        cls.__call__ = abc.abstractmethod(pre_call) if getattr(base_func, '__isabstractmethod__', False) else pre_call
        return cls


class Preprocess(metaclass=_MetaPreprocess):
    """Base class to build stateful preprocess callable - where simple @preprocess decorator is not enough.

    To define a new class preprocess, inherit from this class and implements at least a `__call__` method.
    """

    @abc.abstractmethod
    def __call__(self, voxels):
        pass

    @property
    def __name__(self):
        return str(self)

    def __str__(self):
        return self.__class__.__name__
