import dataclasses
import logging

import numpy as _np
import torch

from .. import _utils, checkpoint as _checkpoint
from ..config import BedConfig
from ..container import FmriContainer
from ..data.transforms import TrainStatistics
from ..preprocesses import Standardizer, Aligner
from .loss import bed_loss
from .masking import random_mask
from .model import BrainEncoderDecoder, BedError

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'bed'


class BedPretraining:
    """Masked patch modeling trainer.

    Args:
        config (BedConfig): model and optimization parameters.
        v_align (int): aligned voxel count.
        seed (int, default=0): seed of weights initialization, masks and batches order.

    Attributes:
        model (BrainEncoderDecoder): trained model.
        loss_curve (list): mean masked MSE of each epoch.
        step_curve (list): (step, loss) every `log_every` steps.

    """

    def __init__(self, config, v_align, seed=0):
        self.config = config
        self.v_align = v_align
        self.seed = seed
        torch.manual_seed(_utils.derive_seed(seed, 'bed', 'init'))
        self.model = BrainEncoderDecoder.from_config(config, v_align)
        self.rng = _np.random.default_rng(_utils.derive_seed(seed, 'bed', 'masks'))
        self.loss_curve = []
        self.step_curve = []

    def run(self, container):
        """Trains the model on the aligned voxels of a container.

        Args:
            container (FmriContainer): container whose preprocessed voxels are aligned to `v_align`.

        Returns:
            (:class:`Checkpoint`)

        """
        cfg = self.config
        patch_count = self.model.patch_count
        steps_per_epoch = -(-len(container) // cfg.batch_size)
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay, betas=(0.9, 0.95))
        scheduler = torch.optim.lr_scheduler.LambdaLR(
            optimizer, _utils.warmup_cosine(cfg.warmup_epochs * steps_per_epoch, cfg.epochs * steps_per_epoch)
        )
        rng = self.rng
        step = 0
        last_finite = None
        logger.info(f'Start BED pretraining on {len(container)} trials, {cfg.epochs} epochs of {steps_per_epoch} steps.')
        for epoch in range(cfg.epochs):
            self.model.train()
            total, count = 0., 0
            for batch in container.batches(cfg.batch_size, seed=_utils.derive_seed(self.seed, 'bed', 'epoch', epoch)):
                voxels = torch.from_numpy(batch.voxels.astype('float32'))
                patches = voxels.reshape(len(voxels), patch_count, cfg.patch_size)
                plans = [random_mask(patch_count, cfg.mask_ratio, rng) for _ in range(len(voxels))]
                kept = torch.from_numpy(_np.stack([p.kept_indices for p in plans]))
                loss = bed_loss(self.model(patches, kept), patches, plans, loss_on=cfg.loss_on)
                value = loss.item()
                _utils.check_finite(value, BedError, f'epoch {epoch} step {step}', last_finite)
                last_finite = value
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                total += value * len(voxels)
                count += len(voxels)
                if step % cfg.log_every == 0:
                    self.step_curve.append((step, value))
                step += 1
            self.loss_curve.append(total / count)
            logger.info(f'BED epoch {epoch}: masked MSE {self.loss_curve[-1]:.5f}, lr {scheduler.get_last_lr()[0]:.2e}.')
        return self.checkpoint()

    def checkpoint(self, metadata=None):
        config = dict(dataclasses.asdict(self.config), v_align=self.v_align)
        meta = {'loss_curve': self.loss_curve, 'step_curve': self.step_curve, 'seed': self.seed}
        meta.update(metadata or {})
        return _checkpoint.Checkpoint.from_module(
            CHECKPOINT_KIND, self.model, config=config, metadata=meta, rng_state={'numpy': self.rng.bit_generator.state}
        )


def cross_subject_container(dataset, split='train', standardize=True):
    """Aligned trials of every subject of a dataset gathered in one container.

    Each subject is standardized with its own training statistics before alignment.
    """
    m = dataset.manifest
    voxels, stimuli, repetitions, subjects = [], [], [], []
    for index, subject in enumerate(dataset.subjects):
        chain = []
        if standardize:
            chain.append(Standardizer(TrainStatistics.from_array(dataset.trials(subject, 'train')[0])))
        chain.append(Aligner(m.v_align, m.patch_size))
        container = dataset.container(subject, split, preprocesses=chain)
        voxels.append(container.voxels)
        stimuli.append(container.metadatas['stimulus'])
        repetitions.append(container.metadatas['repetition'])
        subjects.append(_np.full(len(container), index))
    return FmriContainer.from_arrays(
        _np.concatenate(voxels).astype('float32'), stimulus=_np.concatenate(stimuli),
        repetition=_np.concatenate(repetitions), subject=_np.concatenate(subjects)
    )


def pretrain_bed(dataset, config, seed=0, standardize=True):
    """Cross-subject self-supervised pretraining of the brain encoder-decoder.

    Args:
        dataset (Dataset): dataset with at least 2 subjects.
        config (BedConfig): model and optimization parameters.
        seed (int, default=0): training seed.
        standardize (bool, default=True): z-score voxels with each subject training statistics.

    Returns:
        (:class:`Checkpoint`) BED checkpoint with its loss curve in metadata.

    """
    if len(dataset.subjects) < 2:
        raise BedError(f'Cross-subject pretraining needs at least 2 subjects, not {len(dataset.subjects)}.')
    if config.patch_size != dataset.manifest.patch_size:
        raise BedError(f'BED patch size {config.patch_size} differs from dataset patch size {dataset.manifest.patch_size}.')
    container = cross_subject_container(dataset, standardize=standardize)
    logger.debug(f'Cross-subject container built:\n{container}')
    trainer = BedPretraining(config, dataset.manifest.v_align, seed=seed)
    trainer.run(container)
    return trainer.checkpoint(metadata={'subjects': dataset.subjects})


def load_bed(checkpoint):
    """Rebuilds a BrainEncoderDecoder from a BED checkpoint."""
    config = dict(checkpoint.config)
    v_align = config.pop('v_align')
    model = BrainEncoderDecoder.from_config(BedConfig(**config), v_align)
    return checkpoint.load_into(model)
