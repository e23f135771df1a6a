"""Caption metrics: ROUGE-L, CIDEr and METEOR-lite.

All metrics take a candidate caption and a list of reference captions, as strings or
:class:`NormalizedCaption`, and are pure functions.

METEOR-lite keeps the exact and stem matching stages of METEOR and drops the synonymy stage.
"""
import collections as _collections
import logging
import math as _math

import numba
import numpy as _np

from ._base import caption_metric, normalize, MetricError

logger = logging.getLogger(__name__)


@numba.njit
def _lcs_length(a, b):
    n, m = len(a), len(b)
    table = _np.zeros((n + 1, m + 1), dtype=_np.int64)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                table[i, j] = table[i - 1, j - 1] + 1
            else:
                table[i, j] = max(table[i - 1, j], table[i, j - 1])
    return table[n, m]


def lcs_length(a, b):
    """Longest common subsequence length of two token sequences."""
    if not a or not b:
        return 0
    ids = {}
    a_ids = _np.array([ids.setdefault(t, len(ids)) for t in a], dtype=_np.int64)
    b_ids = _np.array([ids.setdefault(t, len(ids)) for t in b], dtype=_np.int64)
    return int(_lcs_length(a_ids, b_ids))


@caption_metric
def rouge_l(candidate, references, beta=1.2):
    """ROUGE-L F-measure, max over references.

    For each reference, P = LCS / |candidate|, R = LCS / |reference| and
    F = (1 + beta²) P R / (R + beta² P).

    Args:
        candidate (str): candidate caption.
        references (list of str): reference captions.
        beta (float, default=1.2): recall weight.

    Returns:
        (float) score in [0, 1].

    """
    scores = []
    for reference in references:
        lcs = lcs_length(candidate.tokens, reference.tokens)
        if lcs == 0:
            scores.append(0.)
            continue
        precision = lcs / len(candidate)
        recall = lcs / len(reference)
        scores.append(((1 + beta ** 2) * precision * recall) / (recall + beta ** 2 * precision))
    return max(scores)


def ngrams(tokens, n):
    return _collections.Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


class CorpusStats:
    """N-gram document frequencies over a reference corpus, one document per item reference set.

    Attributes:
        document_frequency (dict): n-gram tuple to the number of items whose references contain it.
        size (float): number of documents.
        unit (float): document frequency floor of n-grams absent from the corpus.
        n (int): maximum n-gram order.

    """

    def __init__(self, document_frequency, size, unit=1., n=4):
        if size < 2:
            raise MetricError(f'Degenerate corpus: CIDEr needs at least 2 reference documents, not {size}.')
        if any(df > size for df in document_frequency.values()):
            raise ValueError('Document frequencies cannot exceed the corpus size.')
        self.document_frequency = dict(document_frequency)
        self.size = size
        self.unit = unit
        self.n = n

    @classmethod
    def from_references(cls, reference_sets, n=4):
        """Builds statistics from a list of per-item reference lists."""
        df = _collections.Counter()
        for references in reference_sets:
            grams = set()
            for reference in references:
                tokens = normalize(reference).tokens
                for k in range(1, n + 1):
                    grams.update(ngrams(tokens, k))
            df.update(grams)
        return cls(df, len(reference_sets), n=n)

    def scaled(self, factor):
        """Statistics with document frequencies, corpus size and unit jointly scaled."""
        return CorpusStats(
            {g: df * factor for g, df in self.document_frequency.items()}, self.size * factor, self.unit * factor, n=self.n
        )

    def idf(self, gram):
        return _math.log(self.size / max(self.document_frequency.get(gram, 0), self.unit))

    def __str__(self):
        return f'''Corpus statistics:
    Documents : {self.size}
    N-grams   : {len(self.document_frequency)}
    Max order : {self.n}
    '''


def _tfidf(tokens, n, corpus):
    return {g: count * corpus.idf(g) for g, count in ngrams(tokens, n).items()}


def _cosine(a, b):
    norm_a = _math.sqrt(sum(v * v for v in a.values()))
    norm_b = _math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0 or norm_b == 0:
        return 0.
    return sum(v * b.get(g, 0.) for g, v in a.items()) / (norm_a * norm_b)


@caption_metric
def cider(candidate, references, corpus):
    """Plain CIDEr score of a candidate against its references.

    For n = 1..N, candidate and references are TF-IDF vectors over n-grams with
    idf = log(size / df); the score is 10 times the mean over n of the mean cosine over references.

    Args:
        candidate (str): candidate caption.
        references (list of str): reference captions of the item.
        corpus (CorpusStats): document frequencies over all test references.

    Returns:
        (float) score, positive.

    """
    if not isinstance(corpus, CorpusStats):
        raise TypeError(f'corpus must be a CorpusStats instance, not {type(corpus)}.')
    per_order = []
    for n in range(1, corpus.n + 1):
        vector = _tfidf(candidate.tokens, n, corpus)
        per_order.append(_np.mean([_cosine(vector, _tfidf(r.tokens, n, corpus)) for r in references]))
    return 10. * float(_np.mean(per_order))


def corpus_cider(candidates, reference_sets, n=4):
    """Per-item CIDEr scores, with corpus statistics built from `reference_sets`."""
    if len(candidates) != len(reference_sets):
        raise MetricError(f'{len(candidates)} candidates for {len(reference_sets)} reference sets.')
    corpus = CorpusStats.from_references(reference_sets, n=n)
    return _np.array([cider(c, refs, corpus) for c, refs in zip(candidates, reference_sets)])


def _align(candidate, reference):
    """Greedy unigram alignment, exact then stem stage.

    A candidate token is aligned in priority to the reference position continuing the previous
    alignment, then to the one opening the longest run of matching tokens, then to the first one.
    """
    alignment = {}
    used = set()
    stages = ((candidate.tokens, reference.tokens), (candidate.stems, reference.stems))
    for cand_units, ref_units in stages:
        for i, unit in enumerate(cand_units):
            if i in alignment:
                continue
            options = [j for j, r in enumerate(ref_units) if r == unit and j not in used]
            if not options:
                continue
            previous = alignment.get(i - 1)
            if previous is not None and previous + 1 in options:
                best = previous + 1
            else:
                def run(j):
                    k = 1
                    while (i + k < len(cand_units) and j + k < len(ref_units) and i + k not in alignment
                           and j + k not in used and cand_units[i + k] == ref_units[j + k]):
                        k += 1
                    return k
                best = max(options, key=lambda j: (run(j), -j))
            alignment[i] = best
            used.add(best)
    return alignment


def _chunks(alignment):
    chunks = 0
    previous = None
    for i in sorted(alignment):
        if previous is None or i != previous[0] + 1 or alignment[i] != previous[1] + 1:
            chunks += 1
        previous = (i, alignment[i])
    return chunks


@caption_metric
def meteor_lite(candidate, references, alpha=0.9, gamma=0.5, theta=3.):
    """METEOR without synonymy: exact and stem unigram alignment with fragmentation penalty.

    F = P R / (alpha P + (1 - alpha) R), penalty = gamma (chunks / matches) ** theta,
    score = F (1 - penalty), max over references.

    Args:
        candidate (str): candidate caption.
        references (list of str): reference captions.
        alpha (float, default=0.9): precision weight.
        gamma (float, default=0.5): maximum penalty.
        theta (float, default=3.): penalty shape.

    Returns:
        (float) score in [0, 1].

    """
    scores = []
    for reference in references:
        alignment = _align(candidate, reference)
        matches = len(alignment)
        if matches == 0:
            scores.append(0.)
            continue
        precision = matches / len(candidate)
        recall = matches / len(reference)
        fmean = precision * recall / (alpha * precision + (1 - alpha) * recall)
        penalty = gamma * (_chunks(alignment) / matches) ** theta
        scores.append(fmean * (1 - penalty))
    return max(scores)
