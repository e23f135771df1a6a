"""Caption decoding from query prefixes: greedy and length-normalized beam search."""
import logging
import warnings

import numpy as _np
import torch

from .model import bt_former_forward

logger = logging.getLogger(__name__)


def _next_log_probs(lm, ids, prefix, banned):
    with torch.no_grad():
        logits = lm(torch.as_tensor(ids, dtype=torch.int64), prefix=prefix)[:, -1].to(torch.float64)
    logits[:, banned] = -float('inf')
    return torch.log_softmax(logits, dim=-1).numpy()


def _banned(vocabulary):
    return [vocabulary.pad_id, vocabulary.bos_id, vocabulary.unk_id]


def greedy_decode(lm, vocabulary, prefix=None, max_len=16, batch=1):
    """Greedy decoding, batched over prefixes.

    Args:
        lm (CausalLM): frozen language model.
        vocabulary (Vocabulary): LM vocabulary.
        prefix (Tensor, default=None): (B, K, d) query embeddings, None for an unconditioned generation.
        max_len (int, default=16): maximum token count, markers included.
        batch (int, default=1): number of sequences when `prefix` is None.

    Returns:
        (list of list of int) generated ids, without markers.

    """
    size = prefix.shape[0] if prefix is not None else batch
    ids = _np.full((size, 1), vocabulary.bos_id, dtype='int64')
    finished = _np.zeros(size, dtype=bool)
    banned = _banned(vocabulary)
    while ids.shape[1] < max_len and not finished.all():
        log_probs = _next_log_probs(lm, ids, prefix, banned)
        if ids.shape[1] >= max_len - 1:
            choice = _np.full(size, vocabulary.eos_id)
        else:
            choice = log_probs.argmax(axis=1)
        choice[finished] = vocabulary.eos_id
        finished |= choice == vocabulary.eos_id
        ids = _np.concatenate([ids, choice[:, None]], axis=1)
    return [_strip(row, vocabulary) for row in ids]


def _strip(row, vocabulary):
    out = []
    for i in row[1:]:
        if i == vocabulary.eos_id:
            break
        out.append(int(i))
    return out


def beam_decode(lm, vocabulary, prefix=None, max_len=16, width=3):
    """Beam search over one prefix, hypotheses ranked by length-normalized log-probability.

    Finished hypotheses are kept until every beam has ended or `max_len` is reached.

    Returns:
        (list of int) best hypothesis ids, without markers.

    """
    if width < 1:
        raise ValueError(f'width must be at least 1, not {width}.')
    banned = _banned(vocabulary)
    beams = [([vocabulary.bos_id], 0.)]
    finished = []
    while beams and len(finished) < width:
        length = len(beams[0][0])
        ids = _np.array([b[0] for b in beams], dtype='int64')
        beam_prefix = None if prefix is None else prefix.expand(len(beams), -1, -1)
        log_probs = _next_log_probs(lm, ids, beam_prefix, banned)
        if length >= max_len - 1:
            forced = _np.full_like(log_probs, -_np.inf)
            forced[:, vocabulary.eos_id] = log_probs[:, vocabulary.eos_id]
            log_probs = forced
        scores = (_np.array([b[1] for b in beams])[:, None] + log_probs).ravel()
        vocab_size = log_probs.shape[1]
        beams = []
        for flat in _np.argsort(-scores, kind='stable')[:width]:
            if not _np.isfinite(scores[flat]):
                break
            beam, token = divmod(int(flat), vocab_size)
            sequence = [int(i) for i in ids[beam]] + [token]
            if token == vocabulary.eos_id:
                finished.append((sequence, float(scores[flat])))
            else:
                beams.append((sequence, float(scores[flat])))
    candidates = finished if finished else beams
    best = max(candidates, key=lambda c: c[1] / (len(c[0]) - 1))
    return _strip(best[0], vocabulary)


def decode(lm, vocabulary, prefix=None, strategy='greedy', beam_width=3, max_len=16):
    """Decodes one caption per prefix row and returns detokenized strings, warning on empty captions."""
    if strategy not in ('greedy', 'beam'):
        raise ValueError(f'strategy must be greedy or beam, not {strategy}.')
    if strategy == 'greedy':
        rows = greedy_decode(lm, vocabulary, prefix, max_len)
    else:
        size = 1 if prefix is None else prefix.shape[0]
        rows = [beam_decode(lm, vocabulary, None if prefix is None else prefix[i:i + 1], max_len, beam_width) for i in range(size)]
    captions = [vocabulary.detokenize(r) for r in rows]
    empty = sum(1 for c in captions if not c)
    if empty:
        message = f'{empty} empty captions decoded.'
        logger.warning(message)
        warnings.warn(message, UserWarning)
    return captions


def generate_captions(fmri, blm, frozen, strategy='greedy', beam_width=3, max_len=16, batch_size=64):
    """Captions of a batch of aligned recordings, (n, P, patch_size) or (n, V_align)."""
    captions = []
    blm.eval()
    for start in range(0, len(fmri), batch_size):
        with torch.no_grad():
            queries = bt_former_forward(fmri[start:start + batch_size], blm, frozen)
        captions.extend(decode(frozen.lm, frozen.vocabulary, queries, strategy, beam_width, max_len))
    return captions


def generate_caption(fmri, blm, frozen, strategy='greedy', beam_width=3, max_len=16):
    """Caption of one aligned brain recording.

    Args:
        fmri (AlignedFmri, PatchSequence or ndarray): aligned, standardized recording.
        blm (BrainLanguageModel): trained brain encoder and fMRI projector.
        frozen (FrozenStack): frozen querying stack and LM.
        strategy (str, default='greedy'): 'greedy' or 'beam'.
        beam_width (int, default=3): beam width.
        max_len (int, default=16): maximum tokens, markers included.

    Returns:
        (str) detokenized caption, empty with a warning if the end marker comes first.

    """
    blm.eval()
    with torch.no_grad():
        queries = bt_former_forward(fmri, blm, frozen)
    return decode(frozen.lm, frozen.vocabulary, queries[None], strategy, beam_width, max_len)[0]


def caption_from_image_features(features, frozen, strategy='greedy', beam_width=3, max_len=16):
    """Captions of ground-truth image features through the frozen stack, the image captioning upper bound."""
    features = torch.from_numpy(_np.atleast_2d(_np.asarray(features, dtype='float32')))
    with torch.no_grad():
        queries = frozen.queries_from_image(features)
    return decode(frozen.lm, frozen.vocabulary, queries, strategy, beam_width, max_len)
