"""Querying transformer, visual tokenizer and text projector, pretrained on image features then frozen."""
import dataclasses
import logging

import numpy as _np
import torch
from torch import nn

from .. import _utils, checkpoint as _checkpoint, layers
from ..config import BlmConfig
from .lm import BlmError, FrozenStackError, sequence_nll, load_lm

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'vlp'
COMPONENTS = ('qformer', 'text_projector', 'visual_tokenizer', 'lm')


class VisualTokenizer(nn.Module):
    """Maps an image feature vector to a sequence of modality tokens."""

    def __init__(self, feature_dim, tokens, dim):
        super().__init__()
        self.tokens = tokens
        self.dim = dim
        self.proj = nn.Linear(feature_dim, tokens * dim)
        self.norm = nn.LayerNorm(dim)

    def forward(self, features):
        return self.norm(self.proj(features).reshape(len(features), self.tokens, self.dim))


class QFormer(nn.Module):
    """Fixed set of query vectors cross-attending to modality tokens."""

    def __init__(self, query_count, dim, depth, heads):
        super().__init__()
        self.queries = nn.Parameter(torch.zeros(1, query_count, dim))
        self.blocks = nn.ModuleList([layers.CrossBlock(dim, heads) for _ in range(depth)])
        self.norm = nn.LayerNorm(dim)

    @property
    def query_count(self):
        return self.queries.shape[1]

    def forward(self, context):
        x = self.queries.expand(context.shape[0], -1, -1)
        for block in self.blocks:
            x = block(x, context)
        return self.norm(x)


def multi_caption_nll(queries, caption_ids, lm, pad_id=0):
    """Per-item per-caption NLL matrix of (B, M, L) caption ids under the LM prefixed by (B, K, d) queries."""
    batch, captions, length = caption_ids.shape
    prefix = queries.repeat_interleave(captions, dim=0)
    ids = caption_ids.reshape(batch * captions, length)
    return sequence_nll(lm(ids, prefix=prefix), ids, pad_id).reshape(batch, captions)


class FrozenStack:
    """Frozen querying transformer, query vectors, text projector and language model.

    Attributes:
        qformer (QFormer): querying transformer with its query vectors.
        text_projector (nn.Linear): query to LM embedding projection.
        visual_tokenizer (VisualTokenizer): image feature tokenizer used at pretraining and for image captioning.
        lm (CausalLM): causal language model.
        vocabulary (Vocabulary): LM vocabulary.
        provenance (dict): digests and seed of the runs which produced the stack.

    """

    def __init__(self, qformer, text_projector, visual_tokenizer, lm, vocabulary, provenance=None):
        self.qformer = qformer
        self.text_projector = text_projector
        self.visual_tokenizer = visual_tokenizer
        self.lm = lm
        self.vocabulary = vocabulary
        self.provenance = dict(provenance or {})
        self.freeze()

    def freeze(self):
        for name in COMPONENTS:
            module = getattr(self, name)
            module.requires_grad_(False)
            module.eval()
        return self

    def modules(self):
        return {name: getattr(self, name) for name in COMPONENTS}

    def parameters(self):
        for module in self.modules().values():
            yield from module.parameters()

    def digests(self):
        return {name: _utils.module_digest(module) for name, module in self.modules().items()}

    def digest(self):
        return _utils.tensors_digest({
            f'{name}.{k}': v for name, module in self.modules().items() for k, v in module.state_dict().items()
        })

    def verify(self, expected):
        """Raises FrozenStackError if a component digest differs from `expected`."""
        current = self.digests()
        changed = [name for name in COMPONENTS if current[name] != expected.get(name)]
        if changed:
            raise FrozenStackError(f'Frozen components {changed} were modified.')

    def queries(self, modality_tokens):
        """Projected query embeddings (B, K, lm_dim) from modality tokens (B, n, qformer_dim)."""
        return self.text_projector(self.qformer(modality_tokens))

    def queries_from_image(self, features):
        return self.queries(self.visual_tokenizer(features))

    def to_checkpoint(self, config, metadata=None):
        tensors = {
            f'{name}.{k}': v for name, module in self.modules().items() for k, v in module.state_dict().items()
        }
        lm_config = {
            'vocab_size': len(self.vocabulary), 'dim': self.lm.dim, 'depth': len(self.lm.blocks),
            'heads': self.lm.blocks[0].attn.heads, 'max_positions': self.lm.max_positions,
            'vocabulary': self.vocabulary.to_dict(),
        }
        meta = {'provenance': self.provenance}
        meta.update(metadata or {})
        return _checkpoint.Checkpoint(CHECKPOINT_KIND, tensors, config={'blm': dataclasses.asdict(config), 'lm': lm_config}, metadata=meta)

    @classmethod
    def from_checkpoint(cls, checkpoint):
        config = BlmConfig(**checkpoint.config['blm'])
        lm, vocabulary = load_lm(checkpoint, prefix='lm.')
        feature_dim = checkpoint.tensors['visual_tokenizer.proj.weight'].shape[1]
        modules = build_vlp_modules(config, feature_dim)
        for name, module in modules.items():
            checkpoint.load_into(module, prefix=f'{name}.')
        return cls(modules['qformer'], modules['text_projector'], modules['visual_tokenizer'], lm, vocabulary,
                   provenance=checkpoint.metadata.get('provenance'))

    def __str__(self):
        digest = self.digest()
        return f'''Frozen stack:
    Queries    : {self.qformer.query_count}
    Vocabulary : {len(self.vocabulary)}
    LM dim     : {self.lm.dim}
    Digest     : {digest[:16]}
    '''


def build_vlp_modules(config, feature_dim):
    return {
        'qformer': QFormer(config.query_count, config.qformer_dim, config.qformer_depth, config.qformer_heads),
        'text_projector': nn.Linear(config.qformer_dim, config.lm_dim),
        'visual_tokenizer': VisualTokenizer(feature_dim, config.visual_tokens, config.qformer_dim),
    }


class VlpPretraining:
    """Image-captioning pretraining of the query vectors, Q-Former, visual tokenizer and text projector, LM frozen.

    Attributes:
        loss_curve (list): mean per-caption NLL of each epoch.

    """

    def __init__(self, config, lm, vocabulary, feature_dim, seed=0):
        self.config = config
        self.seed = seed
        self.lm = lm.requires_grad_(False).eval()
        self.vocabulary = vocabulary
        torch.manual_seed(_utils.derive_seed(seed, 'vlp', 'init'))
        self.modules = build_vlp_modules(config, feature_dim)
        for module in self.modules.values():
            module.apply(layers.init_weights)
        nn.init.normal_(self.modules['qformer'].queries, std=.02)
        self.loss_curve = []

    def _queries(self, features):
        return self.modules['text_projector'](self.modules['qformer'](self.modules['visual_tokenizer'](features)))

    def run(self, image_features, caption_sets):
        cfg = self.config
        if len(image_features) != len(caption_sets):
            raise BlmError(f'{len(image_features)} image features for {len(caption_sets)} caption sets.')
        lm_digest = _utils.module_digest(self.lm)
        features = torch.from_numpy(_np.asarray(image_features, dtype='float32'))
        ids = torch.from_numpy(_np.stack([self.vocabulary.batch(cs.captions, cfg.max_caption_len) for cs in caption_sets]))
        params = [p for m in self.modules.values() for p in m.parameters()]
        steps_per_epoch = -(-len(features) // cfg.vlp_batch_size)
        total = cfg.vlp_epochs * steps_per_epoch
        optimizer = torch.optim.AdamW(params, lr=cfg.vlp_learning_rate, weight_decay=cfg.weight_decay)
        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, _utils.warmup_cosine(min(cfg.warmup_steps, total // 10), total))
        rng = _np.random.default_rng(_utils.derive_seed(self.seed, 'vlp', 'batches'))
        last_finite = None
        logger.info(f'Start VLP pretraining on {len(features)} images, {cfg.vlp_epochs} epochs.')
        for epoch in range(cfg.vlp_epochs):
            order = torch.from_numpy(rng.permutation(len(features)))
            total_loss = 0.
            for start in range(0, len(order), cfg.vlp_batch_size):
                index = order[start:start + cfg.vlp_batch_size]
                loss = multi_caption_nll(self._queries(features[index]), ids[index], self.lm).mean()
                _utils.check_finite(loss.item(), BlmError, f'VLP epoch {epoch}', last_finite)
                last_finite = loss.item()
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                total_loss += loss.item() * len(index)
            self.loss_curve.append(total_loss / len(features))
            logger.info(f'VLP epoch {epoch}: caption NLL {self.loss_curve[-1]:.4f}.')
        if _utils.module_digest(self.lm) != lm_digest:
            raise FrozenStackError('Language model was modified during VLP pretraining.')
        return FrozenStack(
            self.modules['qformer'], self.modules['text_projector'], self.modules['visual_tokenizer'], self.lm,
            self.vocabulary, provenance={'lm_digest': lm_digest, 'vlp_seed': self.seed},
        )


def pretrain_vlp(image_features, caption_sets, lm, vocabulary, config, seed=0):
    """Pretrains the querying stack to caption ground-truth image features through the frozen LM.

    Args:
        image_features (ndarray): (n, d_v) training image features.
        caption_sets (list of CaptionSet): paired reference captions.
        lm (CausalLM): frozen language model.
        vocabulary (Vocabulary): LM vocabulary.
        config (BlmConfig): dimensions and optimization parameters.
        seed (int, default=0): training seed.

    Returns:
        (:class:`FrozenStack`) with the VLP loss curve available as `loss_curve` in its provenance.

    """
    trainer = VlpPretraining(config, lm, vocabulary, _np.asarray(image_features).shape[1], seed=seed)
    stack = trainer.run(image_features, caption_sets)
    stack.provenance['config_hash'] = _checkpoint.config_hash(dataclasses.asdict(config))
    stack.provenance['loss_curve'] = trainer.loss_curve
    return stack
