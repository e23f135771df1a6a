from ..context import mindcap
from mindcap import blm
import pytest
import numpy as np
import torch


def test_beam_search_of_width_one_is_greedy_decoding(lm, vocabulary):
    generator = torch.Generator().manual_seed(0)
    for _ in range(10):
        prefix = torch.randn(1, 3, 16, dtype=torch.float64, generator=generator) * 3
        greedy = blm.greedy_decode(lm, vocabulary, prefix, max_len=12)[0]
        assert blm.beam_decode(lm, vocabulary, prefix, max_len=12, width=1) == greedy


def test_decoded_captions_respect_max_len_and_skip_specials(lm, vocabulary):
    prefix = torch.randn(4, 3, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    for row in blm.greedy_decode(lm, vocabulary, prefix, max_len=6):
        assert len(row) <= 4
        assert all(4 <= i < len(vocabulary) for i in row)
    row = blm.beam_decode(lm, vocabulary, prefix[:1], max_len=6, width=3)
    assert len(row) <= 4
    assert all(4 <= i < len(vocabulary) for i in row)


def test_decoding_terminates_with_an_empty_caption_when_only_markers_fit(lm, vocabulary):
    prefix = torch.randn(2, 3, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(3))
    for max_len in (1, 2):
        assert blm.greedy_decode(lm, vocabulary, prefix, max_len=max_len) == [[], []]
        assert blm.beam_decode(lm, vocabulary, prefix[:1], max_len=max_len, width=3) == []
    assert len(blm.beam_decode(lm, vocabulary, prefix[:1], max_len=3, width=3)) <= 1


def test_greedy_decoding_is_batched_consistently(lm, vocabulary):
    prefix = torch.randn(3, 3, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(2))
    batch = blm.greedy_decode(lm, vocabulary, prefix, max_len=10)
    assert batch == [blm.greedy_decode(lm, vocabulary, prefix[i:i + 1], max_len=10)[0] for i in range(3)]


def test_beam_decode_raises_exception_on_invalid_width(lm, vocabulary):
    with pytest.raises(ValueError):
        blm.beam_decode(lm, vocabulary, None, width=0)


def test_decode_raises_exception_on_unknown_strategy(lm, vocabulary):
    with pytest.raises(ValueError):
        blm.decode(lm, vocabulary, None, strategy='sampling')


def test_decode_warns_on_empty_captions(lm, vocabulary):
    with torch.no_grad():
        lm.head.bias[vocabulary.eos_id] = 1e3
    with pytest.warns(UserWarning):
        captions = blm.decode(lm, vocabulary, None, strategy='greedy')
    assert captions == ['']
    with pytest.warns(UserWarning):
        assert blm.decode(lm, vocabulary, None, strategy='beam') == ['']


def test_generate_caption_matches_batched_generation(dataset, blm_checkpoint, frozen, session_config):
    model, statistics = blm.load_blm(blm_checkpoint)
    patches = dataset.aligned_patches('subj01', 'test', statistics, average=True)[:4]
    max_len = session_config.blm.max_caption_len
    captions = mindcap.generate_captions(patches, model, frozen, max_len=max_len)
    assert len(captions) == 4
    assert all(isinstance(c, str) for c in captions)
    assert mindcap.generate_caption(patches[0], model, frozen, max_len=max_len) == captions[0]
    assert all(len(c.split()) <= max_len - 2 for c in captions)


def test_generate_captions_is_deterministic(dataset, blm_checkpoint, frozen, session_config):
    model, statistics = blm.load_blm(blm_checkpoint)
    patches = dataset.aligned_patches('subj01', 'test', statistics, average=True)
    first = mindcap.generate_captions(patches, model, frozen, strategy='beam', beam_width=2)
    assert first == mindcap.generate_captions(patches, model, frozen, strategy='beam', beam_width=2)


def test_caption_from_image_features(dataset, frozen):
    captions = blm.caption_from_image_features(dataset.image_features('test')[:3], frozen)
    assert len(captions) == 3
    assert len(blm.caption_from_image_features(dataset.image_features('test')[0], frozen)) == 1
    vocabulary = set(frozen.vocabulary.words)
    assert all(set(c.split()) <= vocabulary for c in captions)
