import functools
import re as _re

from nltk.stem.porter import PorterStemmer

_STRIP = _re.compile(r'[^a-z0-9 ]+')
_stemmer = PorterStemmer()


class MetricError(Exception):
    pass


class NormalizedCaption:
    """Lowercased, punctuation stripped, whitespace split caption with its stemmed tokens.

    Attributes:
        tokens (tuple of str): normalized tokens.
        stems (tuple of str): Porter stems of the tokens, same length.

    """

    __slots__ = ('tokens', 'stems')

    def __init__(self, tokens):
        self.tokens = tuple(tokens)
        self.stems = tuple(_stem(t) for t in self.tokens)

    @property
    def text(self):
        return ' '.join(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, NormalizedCaption) and self.tokens == other.tokens

    def __hash__(self):
        return hash(self.tokens)

    def __repr__(self):
        return f'NormalizedCaption({self.text!r})'


@functools.lru_cache(maxsize=None)
def _stem(token):
    return _stemmer.stem(token)


def normalize(text):
    """Normalizes a caption: lowercase, strip punctuation, collapse whitespace, split and stem.

    Args:
        text (str or NormalizedCaption): caption to normalize. Normalization is idempotent.

    Returns:
        (:class:`NormalizedCaption`)

    """
    if isinstance(text, NormalizedCaption):
        return text
    if not isinstance(text, str):
        raise TypeError(f'text must be a str, not {type(text)}.')
    text = text.lower().replace('-', ' ')
    return NormalizedCaption(_STRIP.sub(' ', text).split())


def caption_metric(function):
    """Decorator for candidate versus references caption metrics.

    Checks that references is a non empty list and normalizes candidate and references
    before calling the decorated function.

    """
    @functools.wraps(function)
    def _(candidate, references, *args, **kwargs):
        if isinstance(references, (str, NormalizedCaption)):
            raise TypeError(f'references must be a list of captions, not {type(references)}.')
        references = [normalize(r) for r in references]
        if not references:
            raise MetricError(f'{function.__name__} needs at least one reference.')
        return function(normalize(candidate), references, *args, **kwargs)
    return _
