from ..context import mindcap
from mindcap import metrics
import pytest
import numpy as np


@pytest.fixture
def encoder():
    vocabulary = mindcap.Vocabulary(['a', 'red', 'blue', 'cat', 'dog'])
    table = np.random.default_rng(0).standard_normal((len(vocabulary), 8))
    return metrics.TextEncoder(table, vocabulary)


def test_embed_similarity_of_identical_captions_is_one(encoder):
    assert mindcap.embed_similarity('a red cat', 'a red cat', encoder) == pytest.approx(1.)
    assert mindcap.embed_similarity('cat red a', 'a red cat', encoder) == pytest.approx(1.)


def test_embed_similarity_is_symmetric_and_bounded(encoder):
    value = mindcap.embed_similarity('a red cat', 'a blue dog', encoder)
    assert value == pytest.approx(mindcap.embed_similarity('a blue dog', 'a red cat', encoder))
    assert -1 <= value <= 1


def test_embed_similarity_with_an_empty_caption_is_zero_with_a_warning(encoder):
    with pytest.warns(UserWarning):
        assert mindcap.embed_similarity('', 'a red cat', encoder) == 0.


def test_mean_embed_similarity(encoder):
    mean = metrics.mean_embed_similarity('a red cat', ['a red cat', 'a blue dog'], encoder)
    assert mean == pytest.approx((1 + mindcap.embed_similarity('a red cat', 'a blue dog', encoder)) / 2)


def test_text_encoder_raises_exception_on_invalid_table():
    with pytest.raises(ValueError):
        metrics.TextEncoder(np.zeros(5), mindcap.Vocabulary([]))
