from ..context import mindcap
import os
import pytest
import numpy as np


def _small_config(**changes):
    values = dict(
        colors=3, objects=4, contexts=3, attr_embed_dim=8,
        subjects=[{'id': 'subj01', 'voxels': 20}, {'id': 'subj02', 'voxels': 12}],
        v_align=32, patch_size=8, n_train=20, n_test=5, trials=3, image_size=8,
    )
    values.update(changes)
    return mindcap.DataConfig(**values)


@pytest.fixture
def small(tmp_path):
    path = str(tmp_path / 'small')
    mindcap.make_synth(_small_config(), path, seed=1)
    return path


def _files(path):
    result = {}
    for root, _, names in os.walk(path):
        for name in names:
            full = os.path.join(root, name)
            with open(full, 'rb') as fid:
                result[os.path.relpath(full, path)] = fid.read()
    return result


def test_make_synth_is_byte_identical_for_a_given_seed(tmp_path):
    mindcap.make_synth(_small_config(), str(tmp_path / 'a'), seed=1)
    mindcap.make_synth(_small_config(), str(tmp_path / 'b'), seed=1)
    mindcap.make_synth(_small_config(), str(tmp_path / 'c'), seed=2)
    first, second, other = _files(str(tmp_path / 'a')), _files(str(tmp_path / 'b')), _files(str(tmp_path / 'c'))
    assert first == second
    assert first['subj01/train.f32'] != other['subj01/train.f32']


def test_make_synth_without_observation_noise_gives_identical_repetitions(tmp_path):
    path = str(tmp_path / 'clean')
    mindcap.make_synth(_small_config(obs_noise_std=0.), path, seed=1)
    voxels, stimuli, repetitions = mindcap.load_dataset(path).trials('subj01', 'train')
    assert np.array_equal(voxels[repetitions == 0], voxels[repetitions == 1])
    assert np.array_equal(stimuli[repetitions == 0], np.arange(20))


def test_load_dataset_exposes_splits_subjects_and_shapes(small):
    dataset = mindcap.load_dataset(small)
    assert dataset.subjects == ['subj01', 'subj02']
    assert len(dataset.stimulus_ids('train')) == 20
    assert len(dataset.stimulus_ids('test')) == 5
    assert not set(dataset.stimulus_ids('train')) & set(dataset.stimulus_ids('test'))
    voxels, stimuli, repetitions = dataset.trials('subj02', 'test')
    assert voxels.shape == (15, 12)
    assert voxels.dtype == np.float32
    assert dataset.averaged('subj01', 'train').shape == (20, 20)
    assert dataset.image_features('test').shape == (5, 8)
    assert dataset.images('train').shape == (20, 8, 8, 3)
    assert len(dataset.corpus('train')) == 100
    assert isinstance(str(dataset), str)


def test_dataset_averaged_matches_average_repetitions(small):
    dataset = mindcap.load_dataset(small)
    samples = list(dataset.samples('subj01', 'test', average=True))
    assert len(samples) == 5
    assert all(s.repetition == -1 for s in samples)
    assert np.allclose(np.stack([s.voxels for s in samples]), dataset.averaged('subj01', 'test'), atol=1e-6)


def test_dataset_averaged_samples_are_the_per_stimulus_trial_means(small):
    dataset = mindcap.load_dataset(small)
    voxels, stimuli, _ = dataset.trials('subj02', 'train')
    samples = list(dataset.samples('subj02', 'train', average=True))
    assert [s.stimulus_id for s in samples] == list(dataset.stimulus_ids('train'))
    for i, sample in enumerate(samples):
        assert np.allclose(sample.voxels, voxels[stimuli == i].mean(axis=0), atol=1e-6)


def test_dataset_sample_iteration_order_is_a_pure_function_of_the_seed(small):
    dataset = mindcap.load_dataset(small)
    first = [(s.stimulus_id, s.repetition) for s in dataset.samples('subj01', 'train', seed=3)]
    second = [(s.stimulus_id, s.repetition) for s in dataset.samples('subj01', 'train', seed=3)]
    assert first == second
    assert sorted(first) == sorted((s.stimulus_id, s.repetition) for s in dataset.samples('subj01', 'train'))


def test_dataset_caption_sets_and_attributes_are_consistent(small):
    dataset = mindcap.load_dataset(small)
    stim = dataset.stimulus_ids('test')[0]
    attributes = dataset.attributes(stim)
    captions = dataset.caption_set(stim)
    assert len(captions) == 5
    assert all(attributes['object'] in c for c in captions.captions)
    with pytest.raises(mindcap.DataError):
        dataset.caption_set('stim99999')


def test_dataset_container_and_aligned_patches(small):
    dataset = mindcap.load_dataset(small)
    container = dataset.container('subj02', 'train')
    assert len(container) == 60
    assert set(container.metadatas) >= {'stimulus', 'repetition', 'subject'}
    patches = dataset.aligned_patches('subj02', 'test', average=True)
    assert patches.shape == (5, 4, 8)
    assert np.all(patches[:, -2:] == 0)


def test_dataset_raises_exception_on_unknown_split(small):
    with pytest.raises(ValueError):
        mindcap.load_dataset(small).trials('subj01', 'valid')


def test_manifest_reserialization_is_identical(small):
    path = os.path.join(small, 'manifest.yaml')
    with open(path) as fid:
        content = fid.read()
    assert mindcap.DatasetManifest.load(path).dump() == content


def test_load_dataset_raises_exception_on_byte_length_mismatch(small):
    path = os.path.join(small, 'manifest.yaml')
    with open(path) as fid:
        content = fid.read()
    with open(path, 'w') as fid:
        fid.write(content.replace('voxels: 12', 'voxels: 13'))
    with pytest.raises(mindcap.DataError):
        mindcap.load_dataset(small)


def test_load_dataset_raises_exception_on_truncated_voxels_file(small):
    path = os.path.join(small, 'subj01', 'test.f32')
    with open(path, 'rb') as fid:
        data = fid.read()
    with open(path, 'wb') as fid:
        fid.write(data[:-4])
    with pytest.raises(mindcap.DataError):
        mindcap.load_dataset(small)


def test_load_dataset_raises_exception_on_manifest_schema_mismatch(small):
    with open(os.path.join(small, 'manifest.yaml'), 'a') as fid:
        fid.write('extra_key: 1\n')
    with pytest.raises(mindcap.DataError):
        mindcap.load_dataset(small)


def test_load_dataset_raises_exception_on_missing_directory(tmp_path):
    with pytest.raises(mindcap.DataError):
        mindcap.load_dataset(str(tmp_path / 'missing'))


def test_session_dataset_has_the_tiny_configuration_sizes(dataset):
    assert len(dataset.corpus('train')) == 1000
    assert dataset.manifest.v_align == 64
