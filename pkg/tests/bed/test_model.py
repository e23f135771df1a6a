from ..context import mindcap
from mindcap import bed
import pytest
import numpy as np
import torch


@pytest.fixture
def model():
    torch.manual_seed(0)
    return bed.BrainEncoderDecoder(
        patch_count=8, patch_size=4, dim=16, encoder_depth=2, decoder_dim=8, decoder_depth=1, heads=2
    ).double().eval()


def test_bed_forward_predicts_every_patch(model):
    patches = np.random.default_rng(0).standard_normal((8, 4))
    plan = mindcap.random_mask(8, 0.75, 0)
    pred = mindcap.bed_forward(patches, plan, model)
    assert pred.shape == (8, 4)
    batch = mindcap.bed_forward(np.stack([patches, patches]), plan, model)
    assert batch.shape == (2, 8, 4)
    assert torch.allclose(batch[0], pred)


def test_bed_forward_accepts_patch_sequences_and_per_sample_plans(model):
    patches = np.random.default_rng(0).standard_normal((3, 8, 4))
    plans = [mindcap.random_mask(8, 0.5, s) for s in range(3)]
    pred = mindcap.bed_forward(patches, plans, model)
    single = mindcap.bed_forward(mindcap.PatchSequence(patches[1]), plans[1], model)
    assert torch.allclose(pred[1], single)


def test_bed_forward_does_not_depend_on_masked_patch_values(model):
    rng = np.random.default_rng(1)
    for _ in range(100):
        patches = rng.standard_normal((8, 4))
        plan = mindcap.random_mask(8, float(rng.uniform(0.2, 0.8)), rng)
        perturbed = patches.copy()
        perturbed[plan.masked_indices] = rng.standard_normal((len(plan.masked_indices), 4)) * 10
        with torch.no_grad():
            first = mindcap.bed_forward(patches, plan, model)
            second = mindcap.bed_forward(perturbed, plan, model)
        assert torch.allclose(first, second, atol=1e-10)


def test_bed_forward_depends_on_kept_patch_values(model):
    patches = np.random.default_rng(2).standard_normal((8, 4))
    plan = mindcap.random_mask(8, 0.5, 0)
    perturbed = patches.copy()
    perturbed[plan.kept_indices[0]] += 1.
    with torch.no_grad():
        assert not torch.allclose(mindcap.bed_forward(patches, plan, model), mindcap.bed_forward(perturbed, plan, model))


def test_bed_forward_raises_exception_if_plan_does_not_match_patch_count(model):
    with pytest.raises(mindcap.BedError):
        mindcap.bed_forward(np.zeros((8, 4)), mindcap.random_mask(9, 0.5, 0), model)


def test_bed_encoder_raises_exception_on_wrong_patch_shape(model):
    with pytest.raises(mindcap.BedError):
        model.encoder(torch.zeros(2, 8, 5, dtype=torch.float64))
    with pytest.raises(mindcap.BedError):
        model.encoder(torch.zeros(8, 4, dtype=torch.float64))


def test_bed_encoder_without_kept_indices_encodes_every_patch(model):
    tokens = model.encoder(torch.zeros(2, 8, 4, dtype=torch.float64))
    assert tokens.shape == (2, 8, 16)


def test_bed_model_from_config():
    config = mindcap.BedConfig(patch_size=8, token_dim=16, encoder_depth=2, decoder_depth=1, head_count=2)
    model = mindcap.BrainEncoderDecoder.from_config(config, 64)
    assert model.patch_count == 8
    assert model.decoder.dim == config.decoder_dim
    with pytest.raises(mindcap.BedError):
        mindcap.BrainEncoderDecoder.from_config(config, 60)
