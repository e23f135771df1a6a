"""Small word-level causal language model, pretrained once on the caption corpus then frozen."""
import dataclasses
import logging
import math as _math
import warnings

import numpy as _np
import torch
from torch import nn

from .. import _utils, checkpoint as _checkpoint, layers
from .._utils import warmup_cosine
from .tokenizer import Vocabulary

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'lm'


class BlmError(Exception):
    pass


class FrozenStackError(BlmError):
    pass


class CausalLM(nn.Module):
    """Causal transformer LM with learned token and position embeddings and an untied output head.

    Continuous prefix embeddings can be prepended to the token embeddings; the whole sequence is causally masked.

    Args:
        vocab_size (int): vocabulary size.
        dim (int): model dimension.
        depth (int): transformer blocks.
        heads (int): attention heads.
        max_positions (int): maximum prefix plus caption length.

    """

    def __init__(self, vocab_size, dim, depth, heads, max_positions):
        super().__init__()
        self.dim = dim
        self.max_positions = max_positions
        self.token_embedding = nn.Embedding(vocab_size, dim)
        self.position_embedding = nn.Parameter(torch.zeros(1, max_positions, dim))
        self.blocks = nn.ModuleList([layers.Block(dim, heads) for _ in range(depth)])
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, vocab_size)
        self.apply(layers.init_weights)
        nn.init.normal_(self.token_embedding.weight, std=.02)
        nn.init.normal_(self.position_embedding, std=.02)

    @classmethod
    def from_config(cls, config, vocab_size):
        return cls(vocab_size, config.lm_dim, config.lm_depth, config.lm_heads, config.query_count + config.max_caption_len)

    def embed(self, ids):
        return self.token_embedding(ids)

    def forward(self, ids, prefix=None, offset=0):
        """Logits at every token position.

        Args:
            ids (LongTensor): (B, L) token ids.
            prefix (Tensor, default=None): (B, K, dim) embeddings prepended to the tokens.
            offset (int, default=0): position of the first element when no prefix is given.

        Returns:
            (Tensor) (B, L, vocab) logits, position t predicting token t + 1.

        """
        x = self.embed(ids)
        start = 0
        if prefix is not None:
            start, offset = prefix.shape[1], 0
            x = torch.cat([prefix.to(x.dtype), x], dim=1)
        length = x.shape[1]
        if offset + length > self.max_positions:
            raise BlmError(f'Sequence of {offset + length} positions exceeds the LM {self.max_positions} positions.')
        x = x + self.position_embedding[:, offset:offset + length]
        for block in self.blocks:
            x = block(x, causal=True)
        return self.head(self.norm(x))[:, start:]


def sequence_nll(logits, ids, pad_id=0):
    """Per-sequence negative log-likelihood of `ids[:, 1:]` under `logits[:, :-1]`, padding ignored.

    Returns:
        (Tensor) (B,) summed NLL.

    """
    targets = ids[:, 1:]
    log_probs = torch.log_softmax(logits[:, :-1], dim=-1)
    nll = -torch.gather(log_probs, 2, targets[..., None])[..., 0]
    return (nll * (targets != pad_id).to(nll.dtype)).sum(dim=1)


def unigram_perplexity(train_ids, heldout_ids, vocab_size, pad_id=0, bos_id=1):
    """Held-out perplexity of an add-one smoothed unigram model of the training targets."""
    counts = _np.ones(vocab_size)
    train_targets = train_ids[:, 1:]
    _np.add.at(counts, train_targets[train_targets != pad_id], 1)
    counts[[pad_id, bos_id]] = 0
    probs = counts / counts.sum()
    heldout_targets = heldout_ids[:, 1:]
    heldout_targets = heldout_targets[heldout_targets != pad_id]
    return float(_np.exp(-_np.log(probs[heldout_targets]).mean()))


class LanguageModelPretraining:
    """Next-token pretraining of the caption language model.

    Attributes:
        model (CausalLM): trained model, best held-out perplexity state.
        vocabulary (Vocabulary): corpus vocabulary.
        loss_curve (list): mean training NLL per token of each epoch.
        perplexity_curve (list): held-out perplexity of each epoch.
        unigram_perplexity (float): held-out perplexity of the unigram baseline.

    """

    def __init__(self, config, corpus, seed=0):
        if len(corpus) < 1000:
            raise BlmError(f'Language model pretraining needs at least 1000 sentences, not {len(corpus)}.')
        self.config = config
        self.seed = seed
        self.vocabulary = Vocabulary.from_corpus(corpus)
        lengths = [len(self.vocabulary.tokenize(c).ids) for c in corpus]
        if max(lengths) > config.max_caption_len:
            raise BlmError(f'max_caption_len {config.max_caption_len} is shorter than the longest caption with markers, {max(lengths)}.')
        rng = _np.random.default_rng(_utils.derive_seed(seed, 'lm', 'split'))
        order = rng.permutation(len(corpus))
        n_heldout = max(1, int(round(config.lm_holdout * len(corpus))))
        ids = self.vocabulary.batch(corpus, config.max_caption_len)
        self.heldout_ids = ids[order[:n_heldout]]
        self.train_ids = ids[order[n_heldout:]]
        torch.manual_seed(_utils.derive_seed(seed, 'lm', 'init'))
        self.model = CausalLM.from_config(config, len(self.vocabulary))
        self.loss_curve = []
        self.perplexity_curve = []
        self.unigram_perplexity = unigram_perplexity(self.train_ids, self.heldout_ids, len(self.vocabulary))

    def perplexity(self, ids=None):
        ids = torch.from_numpy(self.heldout_ids if ids is None else ids)
        with torch.no_grad():
            nll = sequence_nll(self.model(ids), ids).sum().item()
        return _math.exp(nll / (ids[:, 1:] != 0).sum().item())

    def run(self):
        cfg = self.config
        steps_per_epoch = -(-len(self.train_ids) // cfg.lm_batch_size)
        total = cfg.lm_epochs * steps_per_epoch
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=cfg.lm_learning_rate, weight_decay=cfg.weight_decay)
        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, warmup_cosine(min(cfg.warmup_steps, total // 10), total))
        rng = _np.random.default_rng(_utils.derive_seed(self.seed, 'lm', 'batches'))
        best = (float('inf'), None)
        logger.info(f'Start LM pretraining on {len(self.train_ids)} captions, vocabulary of {len(self.vocabulary)} words, '
                    f'unigram perplexity {self.unigram_perplexity:.3f}.')
        for epoch in range(cfg.lm_epochs):
            order = rng.permutation(len(self.train_ids))
            total_nll, total_tokens = 0., 0
            for start in range(0, len(order), cfg.lm_batch_size):
                ids = torch.from_numpy(self.train_ids[order[start:start + cfg.lm_batch_size]])
                offset = int(rng.integers(0, cfg.query_count + 1))
                nll = sequence_nll(self.model(ids, offset=offset), ids)
                tokens = (ids[:, 1:] != 0).sum()
                loss = nll.sum() / tokens
                if not _math.isfinite(loss.item()):
                    raise BlmError(f'LM pretraining diverged at epoch {epoch}: loss is {loss.item()}.')
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                total_nll += nll.sum().item()
                total_tokens += tokens.item()
            self.loss_curve.append(total_nll / total_tokens)
            perplexity = self.perplexity()
            self.perplexity_curve.append(perplexity)
            logger.info(f'LM epoch {epoch}: train NLL {self.loss_curve[-1]:.4f}, held-out perplexity {perplexity:.3f}.')
            if perplexity < best[0]:
                best = (perplexity, {k: v.clone() for k, v in self.model.state_dict().items()})
            if perplexity <= cfg.lm_target_perplexity:
                logger.info(f'Target perplexity {cfg.lm_target_perplexity} reached at epoch {epoch}.')
                break
        else:
            message = f'LM target perplexity {cfg.lm_target_perplexity} not reached, best is {best[0]:.3f}.'
            logger.warning(message)
            warnings.warn(message, UserWarning)
        self.model.load_state_dict(best[1])
        self.model.requires_grad_(False)
        self.model.eval()
        return self.checkpoint()

    def checkpoint(self):
        config = {
            'vocab_size': len(self.vocabulary), 'dim': self.model.dim, 'depth': len(self.model.blocks),
            'heads': self.model.blocks[0].attn.heads, 'max_positions': self.model.max_positions,
            'vocabulary': self.vocabulary.to_dict(),
        }
        metadata = {
            'loss_curve': self.loss_curve, 'perplexity_curve': self.perplexity_curve,
            'unigram_perplexity': self.unigram_perplexity, 'perplexity': min(self.perplexity_curve), 'seed': self.seed,
            'blm_config': dataclasses.asdict(self.config),
        }
        return _checkpoint.Checkpoint.from_module(CHECKPOINT_KIND, self.model, config=config, metadata=metadata)


def pretrain_lm(corpus, config, seed=0):
    """Pretrains the caption language model.

    Trains until the held-out perplexity reaches `config.lm_target_perplexity` or `config.lm_epochs`,
    keeping the best epoch.

    Args:
        corpus (list of str): caption corpus, at least 1000 sentences.
        config (BlmConfig): LM dimensions and optimization parameters.
        seed (int, default=0): training seed.

    Returns:
        (:class:`Checkpoint`) frozen LM checkpoint, vocabulary in its config.

    """
    return LanguageModelPretraining(config, corpus, seed=seed).run()


def load_lm(checkpoint, prefix=''):
    """Rebuilds a frozen CausalLM and its Vocabulary from an LM checkpoint config and tensors."""
    config = checkpoint.config if not prefix else checkpoint.config['lm']
    model = CausalLM(config['vocab_size'], config['dim'], config['depth'], config['heads'], config['max_positions'])
    checkpoint.load_into(model, prefix=prefix)
    model.requires_grad_(False)
    model.eval()
    return model, Vocabulary.from_dict(config['vocabulary'])
