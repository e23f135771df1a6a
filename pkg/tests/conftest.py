from .context import mindcap  # noqa
import copy
import pytest


TINY = {
    'seed': 0,
    'deterministic': True,
    'data': {
        'colors': 6, 'objects': 8, 'contexts': 6, 'attr_embed_dim': 16,
        'subjects': [{'id': 'subj01', 'voxels': 60}, {'id': 'subj02', 'voxels': 52}],
        'v_align': 64, 'patch_size': 8, 'n_train': 200, 'n_test': 16, 'trials': 2, 'image_size': 16,
    },
    'bed': {
        'patch_size': 8, 'token_dim': 16, 'encoder_depth': 2, 'decoder_depth': 1, 'head_count': 2,
        'epochs': 2, 'warmup_epochs': 1, 'batch_size': 32,
    },
    'blm': {
        'query_count': 4, 'qformer_dim': 16, 'qformer_depth': 1, 'qformer_heads': 2, 'visual_tokens': 4,
        'fmri_tokens': 4, 'lm_dim': 16, 'lm_depth': 1, 'lm_heads': 2, 'max_caption_len': 14, 'epochs': 2,
        'warmup_steps': 5, 'lm_epochs': 2, 'vlp_epochs': 2, 'batch_size': 32,
    },
    'recon': {
        'latent_dim': 8, 'ridge_grid': [10., 1000.], 'ridge_folds': 2, 'steps': 10, 'denoiser_dim': 16,
        'denoiser_heads': 2, 'denoiser_epochs': 2, 'denoiser_batch_size': 128,
    },
    'metrics': {'ssim_window': 7, 'n_permutations': 20, 'low_level_features': 16},
    'harness': {'subjects': ['subj01'], 'plots': False, 'strict_ordering': False},
}


def tiny_dict(**sections):
    values = copy.deepcopy(TINY)
    for name, updates in sections.items():
        if isinstance(updates, dict):
            values[name].update(updates)
        else:
            values[name] = updates
    return values


@pytest.fixture
def tiny_config():
    return mindcap.ExperimentConfig.from_dict(tiny_dict())


@pytest.fixture(scope='session')
def session_config():
    return mindcap.ExperimentConfig.from_dict(tiny_dict())


@pytest.fixture(scope='session')
def dataset(tmp_path_factory, session_config):
    path = str(tmp_path_factory.mktemp('synth'))
    mindcap.make_synth(session_config.data, path, seed=session_config.seed)
    return mindcap.load_dataset(path)


@pytest.fixture(scope='session')
def lm_checkpoint(dataset, session_config):
    return mindcap.pretrain_lm(dataset.corpus('train'), session_config.blm, seed=1)


@pytest.fixture(scope='session')
def frozen(dataset, lm_checkpoint, session_config):
    lm, vocabulary = mindcap.blm.load_lm(lm_checkpoint)
    return mindcap.pretrain_vlp(
        dataset.image_features('train'), dataset.caption_sets('train'), lm, vocabulary, session_config.blm, seed=2
    )


@pytest.fixture(scope='session')
def bed_checkpoint(dataset, session_config):
    return mindcap.pretrain_bed(dataset, session_config.bed, seed=3)


@pytest.fixture(scope='session')
def blm_checkpoint(dataset, bed_checkpoint, frozen, session_config):
    return mindcap.train_blm(dataset, bed_checkpoint, frozen, session_config.blm, 'subj01', seed=4)
