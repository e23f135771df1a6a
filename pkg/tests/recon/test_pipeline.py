from ..context import mindcap
from mindcap import recon
import pytest
import numpy as np


@pytest.fixture(scope='module')
def vocabulary(frozen):
    return frozen.vocabulary


@pytest.fixture(scope='module')
def components(dataset, frozen, session_config):
    table = frozen.lm.token_embedding.weight.detach().numpy()
    return recon.fit_components(dataset, 'subj01', frozen.vocabulary, table, session_config.recon, seed=5, max_len=14)


@pytest.fixture
def fmri(dataset):
    return dataset.averaged('subj01', 'test')[0]


def test_start_step_rounds_strength_times_steps():
    assert recon.start_step(0.8, 50) == 40
    assert recon.start_step(0.8, 10) == 8
    assert recon.start_step(0., 50) == 0
    assert recon.start_step(1., 50) == 50
    with pytest.raises(recon.ReconError):
        recon.start_step(1.5, 50)


def test_caption_ids_pads_empty_captions(vocabulary):
    ids = recon.caption_ids(['a red cat', '', None], vocabulary, 8)
    assert tuple(ids.shape) == (3, 8)
    assert ids[0, 0] == vocabulary.bos_id
    assert (ids[1:] == vocabulary.pad_id).all()


def test_fit_components_returns_checkpointed_components(components, session_config):
    assert set(components.checkpoints) == {'ridge', 'autoencoder', 'denoiser'}
    assert components.autoencoder.latent_dim == session_config.recon.latent_dim
    assert components.ridge.output_size == session_config.recon.latent_dim
    assert components.ridge.input_size == 60
    assert components.ridge.ridge_lambda in session_config.recon.ridge_grid
    assert components.checkpoints['ridge'].metadata['subject'] == 'subj01'
    assert components.schedule.steps == session_config.recon.steps


def test_reconstruct_with_zero_strength_is_the_sketch_round_trip(components, vocabulary, fmri, session_config):
    result = components.reconstruct(fmri, 'a red cat', vocabulary, session_config.recon, strength=0.)
    assert result.start_step == 0
    assert result.reverse_steps == 0
    sketch = recon.decode_sketch(components.ridge.predict(fmri), components.autoencoder)
    assert np.array_equal(result.sketch, sketch)
    assert np.array_equal(result.image, components.autoencoder.decode(components.autoencoder.encode(sketch)))


def test_reconstruct_runs_the_conditioned_reverse_pass(components, vocabulary, fmri, dataset, session_config):
    result = components.reconstruct(fmri, 'a red cat', vocabulary, session_config.recon, seed=3)
    assert result.start_step == 8
    assert result.reverse_steps == 8
    assert result.image.shape == dataset.images('test').shape[1:]
    assert result.image.min() >= 0 and result.image.max() <= 1
    assert result.caption == 'a red cat'


def test_reconstruct_is_deterministic_under_its_seed(components, vocabulary, fmri, session_config):
    first = components.reconstruct(fmri, 'a red cat', vocabulary, session_config.recon, seed=3)
    second = components.reconstruct(fmri, 'a red cat', vocabulary, session_config.recon, seed=3)
    assert np.array_equal(first.image, second.image)


def test_reconstruct_without_caption_runs_an_unconditioned_pass(components, vocabulary, fmri, session_config):
    result = components.reconstruct(fmri, None, vocabulary, session_config.recon, seed=3)
    assert result.caption == ''
    assert result.reverse_steps == 8


def test_reconstruct_raises_exception_on_missing_component_or_batch_input(components, vocabulary, fmri, dataset):
    with pytest.raises(recon.ReconError):
        recon.reconstruct(fmri, 'a cat', components.ridge, None, components.denoiser, components.schedule, vocabulary)
    with pytest.raises(recon.ReconError):
        recon.reconstruct(dataset.averaged('subj01', 'test')[:2], 'a cat', components.ridge, components.autoencoder,
                          components.denoiser, components.schedule, vocabulary)


def test_load_components_restores_fitted_components(components, vocabulary, fmri, session_config):
    checkpoints = {k: mindcap.Checkpoint.from_bytes(v.to_bytes()) for k, v in components.checkpoints.items()}
    restored = recon.load_components(checkpoints)
    first = components.reconstruct(fmri, 'a red cat', vocabulary, session_config.recon, seed=1)
    second = restored.reconstruct(fmri, 'a red cat', vocabulary, session_config.recon, seed=1)
    assert np.allclose(first.image, second.image, atol=1e-6)
    with pytest.raises(recon.ReconError):
        recon.load_components({'ridge': checkpoints['ridge']})


def test_fit_components_raises_exception_on_invalid_config(dataset, vocabulary):
    with pytest.raises(TypeError):
        recon.fit_components(dataset, 'subj01', vocabulary, np.zeros((len(vocabulary), 4)), {'latent_dim': 8})
