from ..context import mindcap
from mindcap import blm
import math
import pytest
import numpy as np
import torch


def test_causal_lm_logits_do_not_depend_on_future_tokens(lm):
    ids = torch.tensor([[1, 4, 5, 6, 7, 2]])
    logits = lm(ids)
    for t in range(ids.shape[1] - 1):
        perturbed = ids.clone()
        perturbed[0, t + 1] = 8 if ids[0, t + 1] != 8 else 9
        other = lm(perturbed)
        assert torch.allclose(logits[0, :t + 1], other[0, :t + 1], atol=1e-12)
        assert not torch.allclose(logits[0, t + 1], other[0, t + 1])


def test_causal_lm_with_prefix_returns_token_logits_only(lm):
    ids = torch.tensor([[1, 4, 5, 2]])
    prefix = torch.randn(1, 3, 16, dtype=torch.float64)
    logits = lm(ids, prefix=prefix)
    assert logits.shape == (1, 4, len(lm.head.bias))
    other = prefix.clone()
    other[0, 0] += 1.
    assert not torch.allclose(logits, lm(ids, prefix=other))


def test_causal_lm_raises_exception_past_max_positions(lm):
    with pytest.raises(mindcap.BlmError):
        lm(torch.ones(1, 21, dtype=torch.int64))
    with pytest.raises(mindcap.BlmError):
        lm(torch.ones(1, 10, dtype=torch.int64), prefix=torch.zeros(1, 11, 16, dtype=torch.float64))
    with pytest.raises(mindcap.BlmError):
        lm(torch.ones(1, 10, dtype=torch.int64), offset=11)


def test_sequence_nll_matches_hand_computed_log_likelihood():
    logits = torch.tensor([[[0., 1., 2., 0.5], [2., 0., 1., 0.], [0., 0., 0., 0.]]], dtype=torch.float64)
    ids = torch.tensor([[1, 2, 3]])

    def log_softmax(row, k):
        return row[k] - math.log(sum(math.exp(v) for v in row))

    expected = -log_softmax([0., 1., 2., 0.5], 2) - log_softmax([2., 0., 1., 0.], 3)
    assert blm.sequence_nll(logits, ids).item() == pytest.approx(expected, rel=1e-12)


def test_sequence_nll_ignores_padding():
    logits = torch.randn(1, 4, 5, dtype=torch.float64)
    padded = blm.sequence_nll(logits, torch.tensor([[1, 2, 0, 0]]))
    assert padded.item() == pytest.approx(-torch.log_softmax(logits[0, 0], -1)[2].item())


def test_unigram_perplexity_of_a_tiny_corpus():
    ids = np.array([[1, 5, 2]])
    assert blm.lm.unigram_perplexity(ids, ids, 6) == pytest.approx(3.)


def test_language_model_pretraining_raises_exception_on_small_corpus():
    with pytest.raises(mindcap.BlmError):
        blm.LanguageModelPretraining(mindcap.BlmConfig(), ['a red cat'] * 999)


def test_language_model_pretraining_raises_exception_if_captions_are_too_long():
    config = mindcap.BlmConfig(max_caption_len=4)
    with pytest.raises(mindcap.BlmError):
        blm.LanguageModelPretraining(config, ['a red cat in a kitchen'] * 1000)


def test_pretrain_lm_checkpoint_has_vocabulary_and_decreasing_loss(lm_checkpoint, dataset):
    assert lm_checkpoint.kind == 'lm'
    curve = lm_checkpoint.metadata['loss_curve']
    assert 1 <= len(curve) <= 2
    assert curve[-1] <= curve[0]
    assert len(lm_checkpoint.metadata['perplexity_curve']) == len(curve)
    assert np.isfinite(lm_checkpoint.metadata['perplexity'])
    lm, vocabulary = blm.load_lm(lm_checkpoint)
    assert vocabulary == mindcap.Vocabulary.from_corpus(dataset.corpus('train'))
    assert not any(p.requires_grad for p in lm.parameters())


def test_generation_from_an_empty_prefix_stays_in_vocabulary(lm_checkpoint, session_config):
    lm, vocabulary = blm.load_lm(lm_checkpoint)
    max_len = session_config.blm.max_caption_len
    rows = blm.greedy_decode(lm, vocabulary, None, max_len=max_len, batch=4)
    assert len(rows) == 4
    for row in rows:
        assert len(row) <= max_len - 2
        assert all(4 <= i < len(vocabulary) for i in row)
