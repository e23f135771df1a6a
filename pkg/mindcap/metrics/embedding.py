import logging
import warnings

import numpy as _np

from ._base import normalize

logger = logging.getLogger(__name__)


class TextEncoder:
    """Frozen bag-of-embeddings sentence encoder.

    Mean-pools the token embeddings of a frozen embedding table. This is the embed-sim substitute
    for pretrained sentence and CLIP text encoders.

    Args:
        table (ndarray): (vocabulary size, dim) frozen embedding table.
        vocabulary: object with an `index(word)` method mapping a word to its table row.

    """

    def __init__(self, table, vocabulary):
        table = _np.asarray(table, dtype='float64')
        if table.ndim != 2:
            raise ValueError(f'table must be a 2 dimensions array, not {table.ndim}.')
        self.table = table
        self.vocabulary = vocabulary

    def encode(self, caption):
        """Mean-pooled embedding of a caption, None for an empty caption."""
        tokens = normalize(caption).tokens
        if not tokens:
            return None
        return self.table[[self.vocabulary.index(t) for t in tokens]].mean(axis=0)


def embed_similarity(candidate, reference, encoder):
    """Cosine similarity of the mean-pooled token embeddings of two captions.

    Args:
        candidate (str): first caption.
        reference (str): second caption.
        encoder (TextEncoder): frozen text encoder.

    Returns:
        (float) similarity in [-1, 1], 0 if a caption is empty.

    """
    a, b = encoder.encode(candidate), encoder.encode(reference)
    if a is None or b is None:
        message = 'Empty caption in embed-sim, similarity set to 0.'
        logger.warning(message)
        warnings.warn(message, UserWarning)
        return 0.
    norm = _np.linalg.norm(a) * _np.linalg.norm(b)
    if norm == 0:
        return 0.
    return float(_np.clip(_np.dot(a, b) / norm, -1., 1.))


def mean_embed_similarity(candidate, references, encoder):
    """Mean embed-sim of a candidate over its references."""
    return float(_np.mean([embed_similarity(candidate, r, encoder) for r in references]))
