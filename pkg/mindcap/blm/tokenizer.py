import dataclasses
import logging
import warnings

import numpy as _np

from ..metrics import normalize

logger = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = '<pad>', '<bos>', '<eos>', '<unk>'
SPECIALS = (PAD, BOS, EOS, UNK)


@dataclasses.dataclass(frozen=True)
class TokenizedCaption:
    """Token ids of a caption, begin and end markers included."""

    ids: tuple
    source: str


class Vocabulary:
    """Word-level vocabulary: the specials <pad>=0, <bos>=1, <eos>=2, <unk>=3 then sorted corpus words.

    Args:
        words (iterable of str): corpus words, specials excluded.

    """

    def __init__(self, words):
        words = sorted(set(words) - set(SPECIALS))
        self.words = list(SPECIALS) + words
        self._index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_corpus(cls, captions):
        return cls(t for c in captions for t in normalize(c).tokens)

    pad_id, bos_id, eos_id, unk_id = range(4)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def index(self, word):
        return self._index.get(word, self.unk_id)

    def tokenize(self, text, max_len=None):
        """Token ids of `text` between <bos> and <eos>, truncated with a warning to `max_len` ids."""
        ids = [self.bos_id] + [self.index(t) for t in normalize(text).tokens] + [self.eos_id]
        if max_len is not None and len(ids) > max_len:
            message = f'Caption "{text}" has {len(ids)} tokens and is truncated to {max_len}.'
            logger.warning(message)
            warnings.warn(message, UserWarning)
            ids = ids[:max_len - 1] + [self.eos_id]
        return TokenizedCaption(tuple(ids), text)

    def detokenize(self, ids):
        """Caption text of token ids, stopping at the first <eos> and skipping other specials."""
        words = []
        for i in ids:
            i = int(i)
            if i == self.eos_id:
                break
            if i in (self.pad_id, self.bos_id):
                continue
            words.append(self.words[i])
        return ' '.join(words)

    def batch(self, captions, max_len):
        """(n, max_len) int64 array of padded token ids."""
        out = _np.full((len(captions), max_len), self.pad_id, dtype='int64')
        for row, caption in enumerate(captions):
            ids = self.tokenize(caption, max_len).ids
            out[row, :len(ids)] = ids
        return out

    def to_dict(self):
        return {'words': self.words[len(SPECIALS):]}

    @classmethod
    def from_dict(cls, values):
        return cls(values['words'])

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.words == other.words

    def __str__(self):
        return f'Vocabulary of {len(self)} words'
