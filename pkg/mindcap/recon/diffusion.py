"""Latent diffusion: noise schedule, forward noising, caption-conditioned denoiser and reverse sampler."""
import dataclasses
import hashlib as _hashlib
import logging

import numpy as _np
import torch
from torch import nn

from .. import _utils, checkpoint as _checkpoint
from ..config import ReconConfig
from ..layers import CrossBlock, Mlp, init_weights, timestep_embedding
from ._base import ReconError

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'denoiser'
CONDITIONINGS = ('cross_attention', 'film')
BASE_STEPS = 1000


class DiffusionSchedule:
    """Linear β schedule over BASE_STEPS steps, subsampled at `steps` evenly spaced steps.

    `alpha_bar[t]` is the signal fraction after t of the `steps` steps, with `alpha_bar[0] = 1`.
    """

    def __init__(self, steps=50, beta_start=1e-4, beta_end=0.02):
        if not isinstance(steps, int) or not 0 < steps <= BASE_STEPS:
            raise ReconError(f'steps must be an integer in [1, {BASE_STEPS}], not {steps}.')
        base = _np.linspace(beta_start, beta_end, BASE_STEPS, dtype='float64')
        if not _np.all((base > 0) & (base < 1)):
            raise ReconError(f'Noise levels must lie in ]0, 1[, got [{base.min()}, {base.max()}].')
        base_alpha_bar = _np.concatenate([[1.], _np.cumprod(1. - base)])
        self.steps = steps
        self.beta_start = float(beta_start)
        self.beta_end = float(beta_end)
        self.alpha_bar = base_alpha_bar[_np.round(_np.linspace(0, BASE_STEPS, steps + 1)).astype(int)]
        self.betas = 1. - self.alpha_bar[1:] / self.alpha_bar[:-1]

    @classmethod
    def from_config(cls, config):
        return cls(config.steps, config.beta_start, config.beta_end)

    def to_dict(self):
        return {'steps': self.steps, 'beta_start': self.beta_start, 'beta_end': self.beta_end}

    def hash(self):
        sha = _hashlib.sha256(_checkpoint.canonical_json(self.to_dict()).encode())
        sha.update(self.alpha_bar.tobytes())
        return sha.hexdigest()

    def check_step(self, t):
        if not 0 <= t <= self.steps:
            raise ReconError(f'Step {t} out of range [0, {self.steps}].')

    def timesteps(self, count):
        """`count` + 1 increasing schedule indices from 0 to `steps`, strided when count < steps."""
        if not 0 < count <= self.steps:
            raise ReconError(f'Sampling steps must be in [1, {self.steps}], not {count}.')
        return _np.round(_np.linspace(0, self.steps, count + 1)).astype(int)

    def __str__(self):
        return f'''Diffusion schedule:
    Steps      : {self.steps}
    β          : [{self.betas[0]:.2e}, {self.betas[-1]:.2e}]
    ᾱ_T        : {self.alpha_bar[-1]:.2e}
        '''


def forward_diffuse(z, t, schedule, rng):
    """Noisy latent z_t = sqrt(ᾱ_t)·z + sqrt(1 - ᾱ_t)·ε, ε standard normal.

    Args:
        z (ndarray): clean latent(s).
        t (int): step in [0, T].
        schedule (DiffusionSchedule): noise schedule.
        rng (numpy.random.Generator or int): noise generator or seed.

    """
    schedule.check_step(t)
    rng = rng if isinstance(rng, _np.random.Generator) else _np.random.default_rng(rng)
    z = _np.asarray(z, dtype='float64')
    noise = rng.standard_normal(z.shape)
    alpha_bar = schedule.alpha_bar[t]
    return _np.sqrt(alpha_bar) * z + _np.sqrt(1. - alpha_bar) * noise


class Denoiser(nn.Module):
    """Noise predictor over latent vectors, conditioned on caption token embeddings.

    Caption ids are embedded with a frozen copy of the language model token table and
    projected; a learned null token is always appended, so an empty caption conditions on
    the null token only.

    Args:
        latent_dim (int): latent size.
        caption_table (ndarray): (vocab, d_lm) frozen token embeddings.
        dim (int, default=128): hidden width.
        heads (int, default=4): cross-attention heads.
        conditioning (str, default='cross_attention'): 'cross_attention' or 'film'.
        pad_id (int, default=0): padding id of caption ids.

    """

    def __init__(self, latent_dim, caption_table, dim=128, heads=4, conditioning='cross_attention', pad_id=0):
        super().__init__()
        if conditioning not in CONDITIONINGS:
            raise ReconError(f'conditioning must be one of {CONDITIONINGS}, not {conditioning}.')
        self.latent_dim = latent_dim
        self.dim = dim
        self.conditioning = conditioning
        self.pad_id = pad_id
        self.register_buffer('caption_table', torch.as_tensor(_np.asarray(caption_table), dtype=torch.float32))
        self.context_proj = nn.Linear(self.caption_table.shape[1], dim)
        self.null_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.time_mlp = nn.Sequential(nn.Linear(dim, dim), nn.SiLU(), nn.Linear(dim, dim))
        self.in_proj = nn.Linear(latent_dim, dim)
        if conditioning == 'cross_attention':
            self.cond = CrossBlock(dim, heads)
        else:
            self.cond = nn.Linear(dim, 2 * dim)
        self.norm = nn.LayerNorm(dim)
        self.mlp = Mlp(dim)
        self.out = nn.Linear(dim, latent_dim)
        self.apply(init_weights)
        nn.init.normal_(self.null_token, std=0.02)

    def context(self, caption_ids):
        tokens = self.context_proj(self.caption_table[caption_ids])
        null = self.null_token.expand(len(caption_ids), -1, -1)
        mask = torch.cat([caption_ids != self.pad_id, torch.ones(len(caption_ids), 1, dtype=torch.bool)], dim=1)
        return torch.cat([tokens, null], dim=1), mask

    def forward(self, z_t, t, caption_ids):
        context, mask = self.context(caption_ids)
        h = self.in_proj(z_t) + self.time_mlp(timestep_embedding(t.to(z_t.dtype), self.dim))
        if self.conditioning == 'cross_attention':
            h = self.cond(h[:, None], context, key_mask=mask)[:, 0]
        else:
            weights = mask.to(h.dtype)[..., None]
            pooled = (context * weights).sum(dim=1) / weights.sum(dim=1)
            gamma, beta = self.cond(pooled).chunk(2, dim=-1)
            h = h * (1 + gamma) + beta
        h = h + self.mlp(self.norm(h))
        return self.out(h)


def unconditional_ids(count, length, pad_id=0):
    return torch.full((count, length), pad_id, dtype=torch.long)


def predict_noise(denoiser, z_t, t, caption_ids, guidance_scale=1.):
    """Noise prediction, with classifier-free guidance when `guidance_scale` != 1."""
    t = torch.full((len(z_t),), int(t), dtype=torch.long) if not torch.is_tensor(t) else t
    eps = denoiser(z_t, t, caption_ids)
    if guidance_scale != 1.:
        eps_null = denoiser(z_t, t, unconditional_ids(*caption_ids.shape, denoiser.pad_id))
        eps = eps_null + guidance_scale * (eps - eps_null)
    return eps


@torch.no_grad()
def reverse_diffuse(z_t, start, caption_ids, denoiser, schedule, sampling_steps=None,
                    guidance_scale=1., stochastic=False, generator=None):
    """Denoises latents from sampling index `start` down to 0.

    Uses the deterministic DDIM update, or the ancestral update when `stochastic`.

    Args:
        z_t (Tensor): (B, d_z) noisy latents at schedule step `timesteps[start]`.
        start (int): number of reverse steps to execute.
        caption_ids (Tensor): (B, L) conditioning caption ids, all padding for an unconditioned pass.
        denoiser (Denoiser): trained noise predictor.
        schedule (DiffusionSchedule): training schedule.
        sampling_steps (int, default=None): sampling grid size, `schedule.steps` by default.

    Returns:
        (Tensor, int) denoised latents and the number of reverse steps executed.

    """
    timesteps = schedule.timesteps(sampling_steps or schedule.steps)
    if not 0 <= start < len(timesteps):
        raise ReconError(f'Start index {start} out of range [0, {len(timesteps) - 1}].')
    alpha_bar = torch.as_tensor(schedule.alpha_bar, dtype=z_t.dtype)
    z = z_t
    executed = 0
    for i in range(start, 0, -1):
        t, s = int(timesteps[i]), int(timesteps[i - 1])
        eps = predict_noise(denoiser, z, t, caption_ids, guidance_scale)
        x0 = (z - (1 - alpha_bar[t]).sqrt() * eps) / alpha_bar[t].sqrt()
        if stochastic and s > 0:
            sigma = ((1 - alpha_bar[s]) / (1 - alpha_bar[t]) * (1 - alpha_bar[t] / alpha_bar[s])).sqrt()
            noise = torch.randn(z.shape, generator=generator, dtype=z.dtype)
            z = alpha_bar[s].sqrt() * x0 + (1 - alpha_bar[s] - sigma ** 2).clamp(min=0).sqrt() * eps + sigma * noise
        else:
            z = alpha_bar[s].sqrt() * x0 + (1 - alpha_bar[s]).sqrt() * eps
        executed += 1
        if not torch.all(torch.isfinite(z)):
            raise ReconError(f'Non-finite latent at reverse step {t} -> {s}.')
    return z, executed


class DenoiserTraining:
    """Noise prediction training with caption dropout.

    Attributes:
        model (Denoiser): trained denoiser.
        loss_curve (list): mean loss of each epoch.
        step_curve (list): (step, loss) every `log_every` steps.

    """

    def __init__(self, config, latent_dim, caption_table, schedule, seed=0, pad_id=0):
        self.config = config
        self.schedule = schedule
        self.seed = seed
        torch.manual_seed(_utils.derive_seed(seed, 'denoiser', 'init'))
        self.model = Denoiser(latent_dim, caption_table, config.denoiser_dim, config.denoiser_heads,
                              config.conditioning, pad_id=pad_id)
        self.loss_curve = []
        self.step_curve = []

    def run(self, latents, caption_ids):
        cfg = self.config
        latents = torch.as_tensor(_np.asarray(latents), dtype=torch.float32)
        caption_ids = torch.as_tensor(_np.asarray(caption_ids), dtype=torch.long)
        if len(latents) != len(caption_ids):
            raise ReconError(f'{len(latents)} latents for {len(caption_ids)} captions.')
        alpha_bar = torch.as_tensor(self.schedule.alpha_bar, dtype=torch.float32)
        generator = _utils.torch_generator(_utils.derive_seed(self.seed, 'denoiser', 'noise'))
        steps_per_epoch = -(-len(latents) // cfg.denoiser_batch_size)
        total = cfg.denoiser_epochs * steps_per_epoch
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=cfg.denoiser_learning_rate)
        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, _utils.warmup_cosine(min(100, total // 10 + 1), total))
        null = unconditional_ids(*caption_ids.shape, self.model.pad_id)
        step = 0
        last_finite = None
        logger.info(f'Start denoiser training on {len(latents)} pairs, {cfg.denoiser_epochs} epochs, {cfg.conditioning} conditioning.')
        for epoch in range(cfg.denoiser_epochs):
            self.model.train()
            order = torch.randperm(len(latents), generator=generator)
            epoch_loss = 0.
            for start in range(0, len(order), cfg.denoiser_batch_size):
                index = order[start:start + cfg.denoiser_batch_size]
                z = latents[index]
                t = torch.randint(1, self.schedule.steps + 1, (len(index),), generator=generator)
                noise = torch.randn(z.shape, generator=generator)
                drop = torch.rand(len(index), generator=generator) < cfg.uncond_prob
                ids = torch.where(drop[:, None], null[index], caption_ids[index])
                z_t = alpha_bar[t].sqrt()[:, None] * z + (1 - alpha_bar[t]).sqrt()[:, None] * noise
                loss = ((self.model(z_t, t, ids) - noise) ** 2).mean()
                value = loss.item()
                _utils.check_finite(value, ReconError, f'epoch {epoch} step {step}', last_finite)
                last_finite = value
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                epoch_loss += value * len(index)
                if step % cfg.log_every == 0:
                    self.step_curve.append((step, value))
                step += 1
            self.loss_curve.append(epoch_loss / len(latents))
            if epoch % max(1, cfg.denoiser_epochs // 10) == 0 or epoch == cfg.denoiser_epochs - 1:
                logger.info(f'Denoiser epoch {epoch}: loss {self.loss_curve[-1]:.4f}.')
        self.model.eval()
        return self.checkpoint()

    def checkpoint(self):
        config = {
            'recon': dataclasses.asdict(self.config), 'latent_dim': self.model.latent_dim, 'pad_id': self.model.pad_id,
            'schedule': self.schedule.to_dict(), 'schedule_hash': self.schedule.hash(),
        }
        metadata = {'loss_curve': self.loss_curve, 'step_curve': self.step_curve, 'seed': self.seed}
        return _checkpoint.Checkpoint.from_module(CHECKPOINT_KIND, self.model, config=config, metadata=metadata)


def train_denoiser(latents, caption_ids, caption_table, schedule, config, seed=0, pad_id=0):
    """Trains a caption-conditioned denoiser to predict the noise of forward diffused latents.

    Args:
        latents (ndarray): (n, d_z) clean training latents.
        caption_ids (ndarray): (n, L) token ids of the caption paired with each latent.
        caption_table (ndarray): (vocab, d_lm) frozen token embedding table.
        schedule (DiffusionSchedule): noise schedule.
        config (ReconConfig): denoiser parameters.
        seed (int, default=0): training seed.
        pad_id (int, default=0): padding id.

    Returns:
        (:class:`Checkpoint`) denoiser checkpoint recording the schedule hash.

    """
    return DenoiserTraining(config, latents.shape[1], caption_table, schedule, seed=seed, pad_id=pad_id).run(latents, caption_ids)


def load_denoiser(checkpoint, schedule=None):
    """Rebuilds a denoiser and its schedule, checking the schedule hash."""
    config = checkpoint.config
    expected = DiffusionSchedule(**config['schedule'])
    schedule = schedule or expected
    if schedule.hash() != config['schedule_hash']:
        raise ReconError('Denoiser schedule hash does not match the schedule used at training.')
    recon = ReconConfig(**config['recon'])
    table = checkpoint.tensors['caption_table']
    model = Denoiser(config['latent_dim'], table, recon.denoiser_dim, recon.denoiser_heads, recon.conditioning, config['pad_id'])
    checkpoint.load_into(model)
    model.eval()
    return model, schedule


@torch.no_grad()
def noise_prediction_mse(denoiser, latents, caption_ids, schedule, seed=0):
    """Held-out noise prediction MSE of `denoiser` and of the zero predictor, on the same draws."""
    latents = torch.as_tensor(_np.asarray(latents), dtype=torch.float32)
    caption_ids = torch.as_tensor(_np.asarray(caption_ids), dtype=torch.long)
    generator = _utils.torch_generator(seed)
    alpha_bar = torch.as_tensor(schedule.alpha_bar, dtype=torch.float32)
    t = torch.randint(1, schedule.steps + 1, (len(latents),), generator=generator)
    noise = torch.randn(latents.shape, generator=generator)
    z_t = alpha_bar[t].sqrt()[:, None] * latents + (1 - alpha_bar[t]).sqrt()[:, None] * noise
    predicted = denoiser(z_t, t, caption_ids)
    return float(((predicted - noise) ** 2).mean()), float((noise ** 2).mean())
