import logging

import numpy as _np
import torch
from torch import nn

from .. import layers
from ..data.samples import PatchSequence
from .masking import MaskPlan, stack_plans

logger = logging.getLogger(__name__)


class BedError(Exception):
    pass


class BrainEncoder(nn.Module):
    """Patch tokenizer (1-D convolution with stride = patch size), fixed positions and transformer encoder.

    Args:
        patch_count (int): P.
        patch_size (int): voxels per patch.
        dim (int): token dimension.
        depth (int): encoder blocks.
        heads (int): attention heads.
        mlp_ratio (float, default=4.): MLP hidden ratio.

    """

    def __init__(self, patch_count, patch_size, dim, depth, heads, mlp_ratio=4.):
        super().__init__()
        self.patch_count = patch_count
        self.patch_size = patch_size
        self.dim = dim
        self.tokenizer = nn.Conv1d(1, dim, kernel_size=patch_size, stride=patch_size)
        self.register_buffer('pos_embed', torch.from_numpy(layers.sincos_position_embedding(patch_count, dim)).float()[None])
        self.blocks = nn.ModuleList([layers.Block(dim, heads, mlp_ratio) for _ in range(depth)])
        self.norm = nn.LayerNorm(dim)

    def tokenize(self, patches):
        if patches.ndim != 3 or patches.shape[1:] != (self.patch_count, self.patch_size):
            raise BedError(
                f'Patches of shape {tuple(patches.shape)} do not match tokenizer ({self.patch_count}, {self.patch_size}).'
            )
        batch = patches.shape[0]
        tokens = self.tokenizer(patches.reshape(batch, 1, -1)).transpose(1, 2)
        return tokens + self.pos_embed

    def forward(self, patches, kept=None):
        """Encodes the kept patches, all patches if `kept` is None.

        Args:
            patches (Tensor): (B, P, patch_size) patches.
            kept (LongTensor, default=None): (B, n_kept) kept patch indices.

        Returns:
            (Tensor) (B, n_kept, dim) encoded tokens.

        """
        x = self.tokenize(patches)
        if kept is not None:
            x = torch.gather(x, 1, kept[..., None].expand(-1, -1, self.dim))
        for block in self.blocks:
            x = block(x)
        return self.norm(x)


class BrainDecoder(nn.Module):
    """Lightweight decoder predicting every patch from kept tokens and a learned mask token."""

    def __init__(self, patch_count, patch_size, encoder_dim, dim, depth, heads, mlp_ratio=4.):
        super().__init__()
        self.patch_count = patch_count
        self.dim = dim
        self.embed = nn.Linear(encoder_dim, dim)
        self.mask_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.register_buffer('pos_embed', torch.from_numpy(layers.sincos_position_embedding(patch_count, dim)).float()[None])
        self.blocks = nn.ModuleList([layers.Block(dim, heads, mlp_ratio) for _ in range(depth)])
        self.norm = nn.LayerNorm(dim)
        self.pred = nn.Linear(dim, patch_size)

    def forward(self, latent, kept):
        x = self.embed(latent)
        batch = x.shape[0]
        full = self.mask_token.expand(batch, self.patch_count, self.dim)
        full = full.scatter(1, kept[..., None].expand(-1, -1, self.dim), x)
        full = full + self.pos_embed
        for block in self.blocks:
            full = block(full)
        return self.pred(self.norm(full))


class BrainEncoderDecoder(nn.Module):
    """Asymmetric masked autoencoder over fMRI patch sequences."""

    def __init__(self, patch_count, patch_size, dim, encoder_depth, decoder_dim, decoder_depth, heads, mlp_ratio=4.):
        super().__init__()
        self.encoder = BrainEncoder(patch_count, patch_size, dim, encoder_depth, heads, mlp_ratio)
        self.decoder = BrainDecoder(patch_count, patch_size, dim, decoder_dim, decoder_depth, heads, mlp_ratio)
        self.apply(layers.init_weights)
        nn.init.normal_(self.decoder.mask_token, std=.02)

    @classmethod
    def from_config(cls, config, v_align):
        """Builds the model of a :class:`BedConfig` for `v_align` aligned voxels."""
        if v_align % config.patch_size:
            raise BedError(f'v_align {v_align} is not divisible by patch_size {config.patch_size}.')
        return cls(
            patch_count=v_align // config.patch_size, patch_size=config.patch_size, dim=config.token_dim,
            encoder_depth=config.encoder_depth, decoder_dim=config.decoder_dim, decoder_depth=config.decoder_depth,
            heads=config.head_count, mlp_ratio=config.mlp_ratio
        )

    @property
    def patch_count(self):
        return self.encoder.patch_count

    def forward(self, patches, kept):
        return self.decoder(self.encoder(patches, kept), kept)


def _as_batch(patches, dtype):
    if isinstance(patches, PatchSequence):
        patches = patches.patches
    if isinstance(patches, _np.ndarray):
        patches = torch.from_numpy(_np.ascontiguousarray(patches))
    single = patches.ndim == 2
    patches = patches[None] if single else patches
    return patches.to(dtype), single


def plan_indices(plan, batch):
    """(B, n_kept) and (B, n_masked) index tensors of a plan shared by the batch or a list of per-sample plans."""
    plans = [plan] * batch if isinstance(plan, MaskPlan) else list(plan)
    if len(plans) != batch:
        raise BedError(f'{len(plans)} mask plans for a batch of {batch}.')
    kept, masked = stack_plans(plans)
    return torch.from_numpy(kept), torch.from_numpy(masked)


def bed_forward(patches, plan, model):
    """Predicts every patch from the kept patches of `plan`.

    Args:
        patches (PatchSequence, ndarray or Tensor): (P, patch_size) or (B, P, patch_size) patches.
        plan (MaskPlan or list of MaskPlan): plan shared by the batch, or one per sample.
        model (BrainEncoderDecoder): model.

    Returns:
        (Tensor) predicted patches, same shape as `patches`.

    """
    dtype = next(model.parameters()).dtype
    batch, single = _as_batch(patches, dtype)
    if (plan.patch_count if isinstance(plan, MaskPlan) else plan[0].patch_count) != model.patch_count:
        raise BedError(f'Mask plan does not partition the {model.patch_count} patches of the model.')
    kept, _ = plan_indices(plan, batch.shape[0])
    pred = model(batch, kept)
    return pred[0] if single else pred
