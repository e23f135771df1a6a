from .context import mindcap  # noqa: F401
import pytest
import numpy as np
from collections.abc import Iterable


@pytest.fixture
def voxels():
    return np.random.default_rng(0).standard_normal((105, 40)).astype('float32')


@pytest.fixture
def container(voxels):
    return mindcap.FmriContainer.from_arrays(voxels, stimulus=np.arange(105) // 3, repetition=np.arange(105) % 3)


def test_container_raises_exception_if_ths_is_not_trace_header_set_compatible():
    with pytest.raises(TypeError):
        mindcap.FmriContainer(ths='foo')
    with pytest.raises(TypeError):
        mindcap.FmriContainer(ths=1235)


def test_container_raises_exception_if_metadata_length_mismatches(voxels):
    with pytest.raises(ValueError):
        mindcap.FmriContainer.from_arrays(voxels, stimulus=np.arange(10))


def test_container_raises_exception_if_voxels_is_not_a_2d_array():
    with pytest.raises(TypeError):
        mindcap.FmriContainer.from_arrays(np.zeros(10, dtype='float32'))


def test_container_provides_voxels_and_metadatas(container, voxels):
    assert len(container) == 105
    assert container.trial_size == 40
    assert np.array_equal(container.voxels, voxels)
    assert np.array_equal(container.metadatas['repetition'], np.arange(105) % 3)
    assert isinstance(str(container), str)


def test_container_batches_cover_all_trials_in_order(container, voxels):
    batches = container.batches(batch_size=10)
    assert isinstance(batches, Iterable)
    assert len(batches) == 11
    assert len(batches[-1]) == 5
    assert np.array_equal(np.concatenate([b.voxels for b in batches]), voxels)


def test_container_shuffled_batches_are_a_pure_function_of_the_seed(container, voxels):
    first = np.concatenate([b.voxels for b in container.batches(batch_size=16, seed=3)])
    second = np.concatenate([b.voxels for b in container.batches(batch_size=16, seed=3)])
    other = np.concatenate([b.voxels for b in container.batches(batch_size=16, seed=4)])
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)
    assert np.array_equal(np.sort(first, axis=0), np.sort(voxels, axis=0))


def test_container_batches_raise_exception_on_invalid_batch_size(container):
    with pytest.raises(ValueError):
        container.batches(batch_size=0)
    with pytest.raises(ValueError):
        container.batches(batch_size=2.5)


def test_container_applies_frame_and_preprocesses(voxels):
    @mindcap.preprocess
    def double(voxels):
        return voxels * 2

    container = mindcap.FmriContainer.from_arrays(voxels, frame=slice(0, 10), preprocesses=[double])
    assert np.allclose(container.voxels, voxels[:, :10] * 2)
