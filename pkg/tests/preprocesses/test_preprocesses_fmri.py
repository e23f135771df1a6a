from ..context import mindcap
from mindcap.data import transforms
import pytest
import numpy as np


@pytest.fixture
def voxels():
    return np.random.default_rng(0).normal(2., 3., size=(50, 20)).astype('float64')


def test_standardizer_applies_training_statistics(voxels):
    statistics = mindcap.TrainStatistics.from_array(voxels)
    result = mindcap.Standardizer(statistics)(voxels)
    assert np.allclose(result.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(result.std(axis=0), 1, atol=1e-9)


def test_standardizer_raises_exception_if_statistics_are_invalid():
    with pytest.raises(TypeError):
        mindcap.Standardizer(statistics=(0., 1.))


def test_aligner_pads_every_trial(voxels):
    result = mindcap.Aligner(32, 8)(voxels)
    assert result.shape == (50, 32)
    assert np.array_equal(result[:, :20], voxels)
    assert np.all(result[:, 20:] == 0)


def test_aligner_raises_exception_if_trials_are_longer_than_v_align(voxels):
    with pytest.raises(ValueError):
        mindcap.Aligner(16, 8)(voxels)


def test_noise_injector_with_zero_coeff_is_the_identity(voxels):
    assert np.array_equal(mindcap.NoiseInjector(0.)(voxels), voxels)


def test_noise_injector_scales_noise_with_each_trial_base_std():
    voxels = np.concatenate([np.full((1, 20000), 1.), np.full((1, 20000), -4.)])
    noisy = mindcap.NoiseInjector(0.5, seed=2)(voxels)
    assert np.std(noisy[0] - voxels[0]) == pytest.approx(0.5, rel=0.03)
    assert np.std(noisy[1] - voxels[1]) == pytest.approx(2., rel=0.03)
    assert noisy.dtype == voxels.dtype


def test_noise_injector_is_reproducible_for_a_given_seed(voxels):
    assert np.array_equal(mindcap.NoiseInjector(1., seed=3)(voxels), mindcap.NoiseInjector(1., seed=3)(voxels))


def test_noise_injector_raises_exception_on_negative_coeff():
    with pytest.raises(ValueError):
        mindcap.NoiseInjector(-1.)


def test_fmri_preprocesses_chain_in_a_container(voxels):
    statistics = mindcap.TrainStatistics.from_array(voxels)
    container = mindcap.FmriContainer.from_arrays(
        voxels.astype('float32'), preprocesses=[mindcap.Standardizer(statistics), mindcap.Aligner(32, 8)]
    )
    assert container.trial_size == 32
    expected = transforms.pad_voxels(statistics.apply(voxels.astype('float32')), 32)
    assert np.allclose(container.voxels, expected, atol=1e-5)
