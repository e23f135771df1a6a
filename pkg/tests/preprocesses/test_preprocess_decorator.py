from ..context import mindcap
import pytest
import numpy as np


@pytest.fixture
def dumb_preprocess():
    @mindcap.preprocess
    def _(voxels):
        return voxels
    return _


def test_preprocess_decorator_raises_exception_if_function_is_not_provided():
    with pytest.raises(TypeError):
        mindcap.preprocess()


def test_preprocess_call_raise_exception_if_voxels_have_incorrect_type(dumb_preprocess):
    with pytest.raises(TypeError):
        dumb_preprocess(voxels='foo')
    with pytest.raises(TypeError):
        dumb_preprocess(voxels=[[1., 2.]])


def test_preprocess_call_raise_exception_if_voxels_have_incorrect_shape_or_dtype(dumb_preprocess):
    with pytest.raises(ValueError):
        dumb_preprocess(voxels=np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        dumb_preprocess(voxels=np.zeros(3))
    with pytest.raises(ValueError):
        dumb_preprocess(voxels=np.zeros((2, 3), dtype='int32'))


def test_preprocess_call_raise_exception_if_output_has_incorrect_type():
    @mindcap.preprocess
    def wrong(voxels):
        return 'foo'

    with pytest.raises(mindcap.PreprocessError):
        wrong(np.zeros((2, 3)))


def test_preprocess_call_raise_exception_if_output_changes_trial_count_or_dimension():
    @mindcap.preprocess
    def drop(voxels):
        return voxels[1:]

    @mindcap.preprocess
    def flatten(voxels):
        return voxels.ravel()

    with pytest.raises(mindcap.PreprocessError):
        drop(np.zeros((2, 3)))
    with pytest.raises(mindcap.PreprocessError):
        flatten(np.zeros((2, 3)))


def test_preprocess_call_raise_exception_if_output_is_not_finite():
    @mindcap.preprocess
    def divide(voxels):
        return voxels / 0.

    with pytest.raises(mindcap.PreprocessError):
        divide(np.ones((2, 3)))


def test_preprocess_class_must_implement_call():
    class Incomplete(mindcap.Preprocess):
        pass

    with pytest.raises(TypeError):
        Incomplete()


def test_preprocess_class_call_is_verified():
    class Shrink(mindcap.Preprocess):
        def __call__(self, voxels):
            return voxels[:1]

    with pytest.raises(mindcap.PreprocessError):
        Shrink()(np.zeros((3, 2)))
    with pytest.raises(TypeError):
        Shrink()('foo')
    assert Shrink().__name__ == 'Shrink'
