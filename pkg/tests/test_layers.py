from .context import mindcap  # noqa: F401
from mindcap import layers
import pytest
import numpy as np
import torch


def test_sincos_position_embedding_starts_with_zero_sines_and_unit_cosines():
    emb = layers.sincos_position_embedding(10, 8)
    assert emb.shape == (10, 8)
    assert np.allclose(emb[0, :4], 0)
    assert np.allclose(emb[0, 4:], 1)
    assert np.allclose(emb[3, 0], np.sin(3))


def test_sincos_position_embedding_raises_exception_on_odd_dimension():
    with pytest.raises(ValueError):
        layers.sincos_position_embedding(10, 7)


def test_timestep_embedding_of_step_zero():
    emb = layers.timestep_embedding(torch.tensor([0., 5., 12.5]), 16)
    assert emb.shape == (3, 16)
    assert torch.allclose(emb[0, :8], torch.zeros(8))
    assert torch.allclose(emb[0, 8:], torch.ones(8))


def test_attention_raises_exception_if_dim_is_not_divisible_by_heads():
    with pytest.raises(ValueError):
        layers.Attention(10, 4)


def test_causal_attention_output_does_not_depend_on_later_positions():
    torch.manual_seed(0)
    attention = layers.Attention(8, 2).double()
    x = torch.randn(1, 5, 8, dtype=torch.float64)
    y = x.clone()
    y[:, 3:] = torch.randn(1, 2, 8, dtype=torch.float64)
    out_x = attention(x, causal=True)
    out_y = attention(y, causal=True)
    assert torch.allclose(out_x[:, :3], out_y[:, :3])
    assert not torch.allclose(out_x[:, 3:], out_y[:, 3:])


def test_cross_attention_ignores_masked_context_tokens():
    torch.manual_seed(0)
    attention = layers.Attention(8, 2, context_dim=6).double()
    x = torch.randn(2, 3, 8, dtype=torch.float64)
    context = torch.randn(2, 4, 6, dtype=torch.float64)
    other = context.clone()
    other[:, -1] = torch.randn(2, 6, dtype=torch.float64)
    key_mask = torch.tensor([[True, True, True, False]] * 2)
    assert torch.allclose(attention(x, context=context, key_mask=key_mask), attention(x, context=other, key_mask=key_mask))


def test_blocks_keep_the_sequence_shape():
    torch.manual_seed(0)
    x = torch.randn(2, 5, 8)
    assert layers.Block(8, 2)(x).shape == (2, 5, 8)
    assert layers.Block(8, 2)(x, causal=True).shape == (2, 5, 8)
    assert layers.CrossBlock(8, 2, context_dim=6)(x, torch.randn(2, 3, 6)).shape == (2, 5, 8)


def test_init_weights_zeroes_biases_and_resets_layer_norms():
    block = layers.Block(8, 2)
    with torch.no_grad():
        block.norm1.weight.fill_(3.)
        block.mlp.fc1.bias.fill_(1.)
    block.apply(layers.init_weights)
    assert torch.equal(block.norm1.weight, torch.ones(8))
    assert torch.equal(block.mlp.fc1.bias, torch.zeros(32))
    assert torch.equal(block.attn.q.bias, torch.zeros(8))
