import logging

import numpy as _np
import torch
from torch import nn

from .. import layers
from ..bed.model import BrainEncoder
from ..data.samples import AlignedFmri, PatchSequence
from .lm import BlmError
from .qformer import multi_caption_nll

logger = logging.getLogger(__name__)


class FmriProjector(nn.Module):
    """Fully-connected layer over token features then 1-D convolution over the token axis.

    Maps (B, P, token_dim) encoder tokens to (B, fmri_tokens, qformer_dim) Q-Former modality tokens.
    """

    def __init__(self, patch_count, token_dim, qformer_dim, fmri_tokens):
        super().__init__()
        self.token_dim = token_dim
        self.fc = nn.Linear(token_dim, qformer_dim)
        self.conv = nn.Conv1d(patch_count, fmri_tokens, kernel_size=1)

    def forward(self, tokens):
        if tokens.shape[-1] != self.token_dim or tokens.shape[1] != self.conv.in_channels:
            raise BlmError(
                f'Encoder output {tuple(tokens.shape)} does not match projector input (B, {self.conv.in_channels}, {self.token_dim}).'
            )
        return self.conv(self.fc(tokens))


class BrainLanguageModel(nn.Module):
    """Trainable part of the brain-language model: brain encoder and fMRI projector.

    Args:
        encoder (BrainEncoder): brain encoder, pretrained or randomly initialized.
        qformer_dim (int): Q-Former token dimension.
        fmri_tokens (int): number of modality tokens produced by the projector.

    """

    def __init__(self, encoder, qformer_dim, fmri_tokens):
        super().__init__()
        if not isinstance(encoder, BrainEncoder):
            raise TypeError(f'encoder must be a BrainEncoder, not {type(encoder)}.')
        self.encoder = encoder
        self.projector = FmriProjector(encoder.patch_count, encoder.dim, qformer_dim, fmri_tokens)
        self.projector.apply(layers.init_weights)

    def forward(self, patches):
        """Modality tokens (B, fmri_tokens, qformer_dim) of all patches, nothing masked."""
        return self.projector(self.encoder(patches))


def as_patches(fmri, patch_count, patch_size, dtype=torch.float32):
    """(B, P, patch_size) tensor from a PatchSequence, an AlignedFmri, a voxels array or a tensor."""
    if isinstance(fmri, PatchSequence):
        fmri = fmri.patches
    elif isinstance(fmri, AlignedFmri):
        fmri = fmri.voxels
    if isinstance(fmri, _np.ndarray):
        fmri = torch.from_numpy(_np.ascontiguousarray(fmri))
    if fmri.shape[-1] == patch_count * patch_size and fmri.ndim in (1, 2):
        fmri = fmri.reshape(fmri.shape[:-1] + (patch_count, patch_size))
    if fmri.ndim == 2:
        fmri = fmri[None]
    if fmri.shape[1:] != (patch_count, patch_size):
        raise BlmError(f'fMRI of shape {tuple(fmri.shape)} is not compatible with ({patch_count}, {patch_size}) patches.')
    return fmri.to(dtype)


def bt_former_forward(fmri, blm, frozen):
    """Query embeddings prepended to the LM input for a brain recording.

    The brain encoder encodes all patches, the fMRI projector maps its tokens to the Q-Former
    token space, the frozen Q-Former queries cross-attend to them and the frozen text projector
    maps the outputs to the LM embedding space.

    Args:
        fmri (AlignedFmri, PatchSequence, ndarray or Tensor): one or a batch of aligned recordings.
        blm (BrainLanguageModel): brain encoder and fMRI projector.
        frozen (FrozenStack): frozen querying stack and LM.

    Returns:
        (Tensor) (K_q, lm_dim) query embeddings, or (B, K_q, lm_dim) for a batch.

    """
    encoder = blm.encoder
    shape = tuple(getattr(fmri, 'shape', ()))
    single = isinstance(fmri, (AlignedFmri, PatchSequence)) or len(shape) == 1 or shape == (encoder.patch_count, encoder.patch_size)
    dtype = next(blm.parameters()).dtype
    patches = as_patches(fmri, blm.encoder.patch_count, blm.encoder.patch_size, dtype)
    queries = frozen.queries(blm(patches))
    return queries[0] if single else queries


def blm_loss(queries, caption_ids, lm, pad_id=0, reduction='mean'):
    """Multi-caption language modeling loss.

    For each of the M captions of an item, the NLL of its tokens under the LM prefixed by the
    item queries; the item loss is the mean over its M captions (`reduction='mean'`) or their
    sum (`reduction='sum'`, M times the mean). Item losses are averaged over the batch.

    Args:
        queries (Tensor): (K, d) or (B, K, d) query embeddings.
        caption_ids (Tensor): (M, L) or (B, M, L) padded token ids with begin and end markers.
        lm (CausalLM): frozen language model.
        pad_id (int, default=0): padding id.
        reduction (str, default='mean'): 'mean' or 'sum' over the M captions.

    Returns:
        (Tensor) scalar loss.

    """
    if reduction not in ('mean', 'sum'):
        raise ValueError(f'reduction must be mean or sum, not {reduction}.')
    if queries.ndim == 2:
        queries, caption_ids = queries[None], caption_ids[None]
    if caption_ids.shape[1] < 1:
        raise BlmError('blm_loss needs at least one caption per item.')
    nll = multi_caption_nll(queries, caption_ids, lm, pad_id)
    per_item = nll.mean(dim=1) if reduction == 'mean' else nll.sum(dim=1)
    return per_item.mean()


def feature_loss(queries, target_queries):
    """Mean squared error between brain query embeddings and image query embeddings."""
    if queries.shape != target_queries.shape:
        raise BlmError(f'Query shapes mismatch: {tuple(queries.shape)} and {tuple(target_queries.shape)}.')
    return ((queries - target_queries) ** 2).mean()
