import dataclasses
import logging

import numpy as _np
import torch

from .. import _utils, checkpoint as _checkpoint
from ..bed.model import BrainEncoderDecoder
from ..bed.train import load_bed
from ..config import BedConfig, BlmConfig
from ..data.transforms import TrainStatistics
from .lm import BlmError, FrozenStackError
from .model import BrainLanguageModel, blm_loss, feature_loss

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'blm'
OBJECTIVES = ('lm', 'feature')


def select_captions(caption_sets, count, seed):
    """Deterministic per-stimulus subsets of `count` captions, drawn from (seed, stimulus id)."""
    selected = []
    for caption_set in caption_sets:
        if count > len(caption_set):
            raise BlmError(f'{count} captions requested but stimulus {caption_set.stimulus_id} has {len(caption_set)}.')
        if count == len(caption_set):
            selected.append(list(caption_set.captions))
            continue
        rng = _np.random.default_rng(_utils.derive_seed(seed, 'captions', caption_set.stimulus_id))
        selected.append([caption_set.captions[i] for i in sorted(rng.choice(len(caption_set), count, replace=False))])
    return selected


class BlmTraining:
    """Training of the brain encoder and fMRI projector through the frozen stack.

    Args:
        config (BlmConfig): dimensions and optimization parameters.
        bed_checkpoint (Checkpoint): pretrained BED checkpoint; its encoder initializes the brain encoder,
            unless `pretrained` is False.
        frozen (FrozenStack): frozen querying stack and LM.
        seed (int, default=0): training seed.
        objective (str, default='lm'): 'lm' for the multi-caption language modeling loss, 'feature' for the
            mean squared error to the image query embeddings of the frozen stack.
        captions_per_stimulus (int, default=None): captions used per stimulus, `config.captions_per_stimulus` by default.
        pretrained (bool, default=True): if False, the brain encoder is randomly initialized.

    Attributes:
        model (BrainLanguageModel): trained model.
        loss_curve (list): mean loss of each epoch.
        sum_loss_curve (list): mean summed loss over the captions of each epoch.
        step_curve (list): (step, loss) every `log_every` steps.

    """

    def __init__(self, config, bed_checkpoint, frozen, seed=0, objective='lm', captions_per_stimulus=None, pretrained=True):
        if objective not in OBJECTIVES:
            raise ValueError(f'objective must be one of {OBJECTIVES}, not {objective}.')
        self.config = config
        self.frozen = frozen
        self.seed = seed
        self.objective = objective
        self.captions_per_stimulus = captions_per_stimulus or config.captions_per_stimulus
        self.pretrained = pretrained
        self.bed_config = dict(bed_checkpoint.config)
        torch.manual_seed(_utils.derive_seed(seed, 'blm', 'init'))
        if pretrained:
            bed = load_bed(bed_checkpoint)
        else:
            cfg = dict(self.bed_config)
            v_align = cfg.pop('v_align')
            bed = BrainEncoderDecoder.from_config(BedConfig(**cfg), v_align)
        self.model = BrainLanguageModel(bed.encoder, config.qformer_dim, config.fmri_tokens)
        self.statistics = None
        self.loss_curve = []
        self.sum_loss_curve = []
        self.step_curve = []

    def trainable_digests(self):
        return {'encoder': _utils.module_digest(self.model.encoder), 'projector': _utils.module_digest(self.model.projector)}

    def _targets(self, dataset):
        cfg = self.config
        if self.objective == 'feature':
            with torch.no_grad():
                features = torch.from_numpy(dataset.image_features('train').astype('float32'))
                return self.frozen.queries_from_image(features)
        subsets = select_captions(dataset.caption_sets('train'), self.captions_per_stimulus, self.seed)
        return torch.from_numpy(_np.stack([self.frozen.vocabulary.batch(c, cfg.max_caption_len) for c in subsets]))

    def run(self, dataset, subject, standardize=True):
        """Trains on the separate training trials of `subject`.

        Returns:
            (:class:`Checkpoint`)

        """
        cfg = self.config
        voxels, stimuli, _ = dataset.trials(subject, 'train')
        if standardize:
            self.statistics = TrainStatistics.from_array(voxels)
        patches = torch.from_numpy(dataset.aligned_patches(subject, 'train', self.statistics).astype('float32'))
        stimuli = torch.from_numpy(stimuli)
        targets = self._targets(dataset)

        frozen_digests = self.frozen.digests()
        params = list(self.model.parameters())
        if any(p.requires_grad for p in self.frozen.parameters()):
            raise FrozenStackError('Frozen stack has trainable parameters.')
        steps_per_epoch = -(-len(patches) // cfg.batch_size)
        total = cfg.epochs * steps_per_epoch
        optimizer = torch.optim.AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, _utils.warmup_cosine(cfg.warmup_steps, total))
        rng = _np.random.default_rng(_utils.derive_seed(self.seed, 'blm', 'batches'))
        step = 0
        last_finite = None
        logger.info(f'Start BLM training on {len(patches)} trials of {subject}, objective {self.objective}, '
                    f'{self.captions_per_stimulus} captions per stimulus, {cfg.epochs} epochs.')
        for epoch in range(cfg.epochs):
            self.model.train()
            order = torch.from_numpy(rng.permutation(len(patches)))
            total_loss, total_sum = 0., 0.
            for start in range(0, len(order), cfg.batch_size):
                index = order[start:start + cfg.batch_size]
                queries = self.frozen.queries(self.model(patches[index]))
                if self.objective == 'lm':
                    loss = blm_loss(queries, targets[stimuli[index]], self.frozen.lm)
                    summed = loss.item() * self.captions_per_stimulus
                else:
                    loss = feature_loss(queries, targets[stimuli[index]])
                    summed = loss.item()
                value = loss.item()
                _utils.check_finite(value, BlmError, f'epoch {epoch} step {step}', last_finite)
                last_finite = value
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                total_loss += value * len(index)
                total_sum += summed * len(index)
                if step % cfg.log_every == 0:
                    self.step_curve.append((step, value))
                step += 1
            self.loss_curve.append(total_loss / len(patches))
            self.sum_loss_curve.append(total_sum / len(patches))
            logger.info(f'BLM epoch {epoch}: loss {self.loss_curve[-1]:.4f} (sum over captions {self.sum_loss_curve[-1]:.4f}), '
                        f'lr {scheduler.get_last_lr()[0]:.2e}.')
        self.frozen.verify(frozen_digests)
        self.model.eval()
        return self.checkpoint(subject, frozen_digests)

    def checkpoint(self, subject, frozen_digests):
        tensors = {f'model.{k}': v for k, v in self.model.state_dict().items()}
        if self.statistics is not None:
            tensors['statistics.mean'] = self.statistics.mean
            tensors['statistics.std'] = self.statistics.std
        config = {'blm': dataclasses.asdict(self.config), 'bed': self.bed_config}
        metadata = {
            'subject': subject, 'objective': self.objective, 'captions_per_stimulus': self.captions_per_stimulus,
            'pretrained': self.pretrained, 'seed': self.seed, 'frozen_digests': frozen_digests,
            'loss_curve': self.loss_curve, 'sum_loss_curve': self.sum_loss_curve, 'step_curve': self.step_curve,
        }
        return _checkpoint.Checkpoint(CHECKPOINT_KIND, tensors, config=config, metadata=metadata)


def train_blm(dataset, bed_checkpoint, frozen, config, subject, seed=0, objective='lm', captions_per_stimulus=None,
              pretrained=True, standardize=True):
    """Trains the brain encoder and the fMRI projector with the frozen stack.

    Only the brain encoder and fMRI projector parameters are updated; the frozen stack digests are
    verified at the end of the run and a modification aborts it.

    Args:
        dataset (Dataset): dataset.
        bed_checkpoint (Checkpoint): pretrained BED checkpoint.
        frozen (FrozenStack): frozen querying stack and LM.
        config (BlmConfig): dimensions and optimization parameters.
        subject (str): subject whose separate training trials are used.
        seed (int, default=0): training seed.
        objective (str, default='lm'): 'lm' or 'feature'.
        captions_per_stimulus (int, default=None): M, `config.captions_per_stimulus` by default.
        pretrained (bool, default=True): initialize the brain encoder from the BED checkpoint.
        standardize (bool, default=True): z-score voxels with the subject training statistics.

    Returns:
        (:class:`Checkpoint`) BLM checkpoint with training statistics and loss curves.

    """
    trainer = BlmTraining(config, bed_checkpoint, frozen, seed=seed, objective=objective,
                          captions_per_stimulus=captions_per_stimulus, pretrained=pretrained)
    return trainer.run(dataset, subject, standardize=standardize)


def load_blm(checkpoint):
    """Rebuilds the brain-language model and training statistics of a BLM checkpoint."""
    blm_config = BlmConfig(**checkpoint.config['blm'])
    bed_config = dict(checkpoint.config['bed'])
    v_align = bed_config.pop('v_align')
    bed = BrainEncoderDecoder.from_config(BedConfig(**bed_config), v_align)
    model = BrainLanguageModel(bed.encoder, blm_config.qformer_dim, blm_config.fmri_tokens)
    checkpoint.load_into(model, prefix='model.')
    model.eval()
    statistics = None
    if 'statistics.mean' in checkpoint.tensors:
        statistics = TrainStatistics(checkpoint.tensors['statistics.mean'], checkpoint.tensors['statistics.std'])
    return model, statistics
