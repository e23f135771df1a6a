from .context import mindcap  # noqa: F401
from .conftest import tiny_dict
import pytest


def test_default_config_is_the_desk_profile():
    config = mindcap.ExperimentConfig()
    assert config.profile == 'desk'
    assert config.data.v_align % config.data.patch_size == 0
    assert config.bed.decoder_depth < config.bed.encoder_depth
    assert config.subjects == [config.data.subject_ids[0]]


def test_config_hash_is_stable_and_depends_on_values():
    a = mindcap.ExperimentConfig.from_dict(tiny_dict())
    b = mindcap.ExperimentConfig.from_dict(tiny_dict())
    c = mindcap.ExperimentConfig.from_dict(tiny_dict(seed=1))
    assert a.hash() == b.hash()
    assert a.hash() != c.hash()
    assert a.section_hash('data') == c.section_hash('data')


def test_config_to_dict_then_from_dict_gives_the_same_hash():
    config = mindcap.ExperimentConfig.from_dict(tiny_dict())
    assert mindcap.ExperimentConfig.from_dict(config.to_dict()).hash() == config.hash()


def test_config_raises_exception_on_unknown_keys():
    with pytest.raises(mindcap.ConfigError):
        mindcap.ExperimentConfig.from_dict({'foo': 1})
    with pytest.raises(mindcap.ConfigError):
        mindcap.ExperimentConfig.from_dict({'bed': {'foo': 1}})


def test_config_raises_exception_on_unknown_profile():
    with pytest.raises(mindcap.ConfigError):
        mindcap.ExperimentConfig.from_dict({'profile': 'huge'})


def test_config_raises_exception_if_patch_sizes_differ():
    with pytest.raises(mindcap.ConfigError):
        mindcap.ExperimentConfig.from_dict(tiny_dict(bed={'patch_size': 4}))


def test_config_raises_exception_if_v_align_is_not_a_patch_size_multiple():
    with pytest.raises(mindcap.ConfigError):
        mindcap.DataConfig(v_align=1000, patch_size=16)


def test_config_raises_exception_if_a_subject_has_more_voxels_than_v_align():
    with pytest.raises(mindcap.ConfigError):
        mindcap.DataConfig(subjects=[{'id': 's', 'voxels': 2000}], v_align=1024)


def test_config_raises_exception_on_invalid_mask_ratio():
    with pytest.raises(mindcap.ConfigError):
        mindcap.BedConfig(mask_ratio=1.)
    with pytest.raises(mindcap.ConfigError):
        mindcap.BedConfig(mask_ratio=0.)


def test_config_raises_exception_if_decoder_is_not_shallower_than_encoder():
    with pytest.raises(mindcap.ConfigError):
        mindcap.BedConfig(encoder_depth=2, decoder_depth=2)


def test_config_raises_exception_on_invalid_decode_strategy():
    with pytest.raises(mindcap.ConfigError):
        mindcap.BlmConfig(decode_strategy='sampling')


def test_config_raises_exception_if_captions_cannot_hold_their_markers():
    with pytest.raises(mindcap.ConfigError, match='max_caption_len'):
        mindcap.BlmConfig(max_caption_len=1)
    assert mindcap.BlmConfig(max_caption_len=2).max_caption_len == 2


def test_config_raises_exception_on_invalid_recon_values():
    with pytest.raises(mindcap.ConfigError):
        mindcap.ReconConfig(strength=1.5)
    with pytest.raises(mindcap.ConfigError):
        mindcap.ReconConfig(ridge_folds=1)
    with pytest.raises(mindcap.ConfigError):
        mindcap.ReconConfig(conditioning='concat')


def test_config_raises_exception_on_even_ssim_window():
    with pytest.raises(mindcap.ConfigError):
        mindcap.MetricsConfig(ssim_window=8)


def test_config_raises_exception_on_unknown_harness_subject_or_variant():
    with pytest.raises(mindcap.ConfigError):
        mindcap.ExperimentConfig.from_dict(tiny_dict(harness={'subjects': ['subj09']}))
    with pytest.raises(mindcap.ConfigError):
        mindcap.HarnessConfig(ablations=['full', 'wo_everything'])


def test_paper_scale_profile_overrides_desk_defaults():
    config = mindcap.ExperimentConfig.from_dict({'profile': 'paper-scale'})
    assert config.data.v_align == 15728
    assert config.bed.token_dim == 1024
    assert len(config.data.subjects) == 4


def test_load_config_applies_file_then_overrides(tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text('seed: 3\nbed:\n  epochs: 7\n')
    config = mindcap.load_config(str(path), overrides=['bed.epochs=9', 'blm.decode_strategy=beam'], deterministic=False)
    assert config.seed == 3
    assert config.bed.epochs == 9
    assert config.blm.decode_strategy == 'beam'
    assert config.deterministic is False


def test_load_config_seed_argument_overrides_file(tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text('seed: 3\n')
    assert mindcap.load_config(str(path), seed=11).seed == 11


def test_load_config_raises_exception_on_invalid_override():
    with pytest.raises(mindcap.ConfigError):
        mindcap.load_config(overrides=['epochs=3'])


def test_load_config_raises_exception_on_missing_or_invalid_file(tmp_path):
    with pytest.raises(mindcap.ConfigError):
        mindcap.load_config(str(tmp_path / 'missing.yaml'))
    path = tmp_path / 'broken.yaml'
    path.write_text('bed: [1, 2\n')
    with pytest.raises(mindcap.ConfigError):
        mindcap.load_config(str(path))


def test_config_dump_can_be_loaded_back(tmp_path):
    config = mindcap.ExperimentConfig.from_dict(tiny_dict())
    path = tmp_path / 'dumped.yaml'
    path.write_text(config.dump())
    assert mindcap.load_config(str(path)).hash() == config.hash()
