"""Experiment configuration.

The configuration is a tree of dataclasses, one per subsystem. It is read from YAML files,
optionally based on a named profile whose defaults are applied first. Unknown keys are
rejected at every level.

Examples:
    >>> config = mindcap.load_config('configs/desk.yaml', overrides=['bed.epochs=10'])
    >>> config.bed.epochs
    10
    >>> config.hash()  # stable under key reordering
    '3f1c...'

"""
import copy as _copy
import dataclasses
import logging

import yaml

from . import checkpoint as _checkpoint

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


def _positive(section, **values):
    for name, value in values.items():
        if value is None or value <= 0:
            raise ConfigError(f'{section}.{name} must be strictly positive, not {value}.')


@dataclasses.dataclass
class DataConfig:
    colors: int = 8
    objects: int = 16
    contexts: int = 8
    attr_embed_dim: int = 48
    subjects: list = dataclasses.field(default_factory=lambda: [
        {'id': 'subj01', 'voxels': 1020},
        {'id': 'subj02', 'voxels': 1000},
    ])
    v_align: int = 1024
    patch_size: int = 16
    n_train: int = 512
    n_test: int = 64
    trials: int = 3
    obs_noise_std: float = 0.5
    image_size: int = 32
    standardize: bool = True
    noise_base: str = 'abs_mean'

    def __post_init__(self):
        _positive('data', colors=self.colors, objects=self.objects, contexts=self.contexts,
                  attr_embed_dim=self.attr_embed_dim, v_align=self.v_align, patch_size=self.patch_size,
                  n_train=self.n_train, n_test=self.n_test, trials=self.trials, image_size=self.image_size)
        if self.obs_noise_std < 0:
            raise ConfigError(f'data.obs_noise_std must be positive, not {self.obs_noise_std}.')
        if self.v_align % self.patch_size:
            raise ConfigError(f'data.v_align {self.v_align} is not divisible by patch_size {self.patch_size}.')
        if not self.subjects:
            raise ConfigError('data.subjects must declare at least one subject.')
        for subject in self.subjects:
            if set(subject) != {'id', 'voxels'}:
                raise ConfigError(f'data.subjects entries must have exactly id and voxels keys, not {sorted(subject)}.')
            if subject['voxels'] > self.v_align:
                raise ConfigError(f'Subject {subject["id"]} has more voxels than v_align {self.v_align}.')
        if self.noise_base not in ('abs_mean', 'std'):
            raise ConfigError(f'data.noise_base must be abs_mean or std, not {self.noise_base}.')

    @property
    def subject_ids(self):
        return [s['id'] for s in self.subjects]


@dataclasses.dataclass
class BedConfig:
    patch_size: int = 16
    token_dim: int = 64
    encoder_depth: int = 4
    decoder_depth: int = 2
    head_count: int = 4
    mlp_ratio: float = 4.0
    mask_ratio: float = 0.75
    epochs: int = 50
    warmup_epochs: int = 4
    learning_rate: float = 1e-3
    weight_decay: float = 0.05
    batch_size: int = 32
    loss_on: str = 'masked'
    log_every: int = 50

    def __post_init__(self):
        _positive('bed', patch_size=self.patch_size, token_dim=self.token_dim, encoder_depth=self.encoder_depth,
                  decoder_depth=self.decoder_depth, head_count=self.head_count, epochs=self.epochs,
                  batch_size=self.batch_size, log_every=self.log_every, mlp_ratio=self.mlp_ratio)
        if not 0 < self.mask_ratio < 1:
            raise ConfigError(f'bed.mask_ratio must be in ]0, 1[, not {self.mask_ratio}.')
        if self.decoder_depth >= self.encoder_depth:
            raise ConfigError(f'bed.decoder_depth {self.decoder_depth} must be smaller than encoder_depth {self.encoder_depth}.')
        if self.token_dim % self.head_count:
            raise ConfigError(f'bed.token_dim {self.token_dim} is not divisible by head_count {self.head_count}.')
        if self.learning_rate < 0 or self.weight_decay < 0 or self.warmup_epochs < 0:
            raise ConfigError('bed.learning_rate, weight_decay and warmup_epochs must be positive.')
        if self.loss_on not in ('masked', 'all'):
            raise ConfigError(f'bed.loss_on must be masked or all, not {self.loss_on}.')

    @property
    def decoder_dim(self):
        return max(self.token_dim // 2, self.head_count)


@dataclasses.dataclass
class BlmConfig:
    query_count: int = 8
    qformer_dim: int = 64
    qformer_depth: int = 2
    qformer_heads: int = 4
    visual_tokens: int = 8
    fmri_tokens: int = 16
    lm_dim: int = 64
    lm_depth: int = 2
    lm_heads: int = 4
    max_caption_len: int = 16
    captions_per_stimulus: int = 5
    epochs: int = 15
    warmup_steps: int = 50
    learning_rate: float = 5e-4
    weight_decay: float = 0.05
    batch_size: int = 32
    decode_strategy: str = 'greedy'
    beam_width: int = 3
    lm_epochs: int = 30
    lm_learning_rate: float = 3e-3
    lm_batch_size: int = 64
    lm_target_perplexity: float = 4.0
    lm_holdout: float = 0.1
    vlp_epochs: int = 40
    vlp_learning_rate: float = 2e-3
    vlp_batch_size: int = 64
    log_every: int = 50

    def __post_init__(self):
        _positive('blm', query_count=self.query_count, qformer_dim=self.qformer_dim, qformer_depth=self.qformer_depth,
                  qformer_heads=self.qformer_heads, visual_tokens=self.visual_tokens, fmri_tokens=self.fmri_tokens,
                  lm_dim=self.lm_dim, lm_depth=self.lm_depth, lm_heads=self.lm_heads, max_caption_len=self.max_caption_len,
                  captions_per_stimulus=self.captions_per_stimulus, epochs=self.epochs, batch_size=self.batch_size,
                  beam_width=self.beam_width, lm_epochs=self.lm_epochs, lm_batch_size=self.lm_batch_size,
                  vlp_epochs=self.vlp_epochs, vlp_batch_size=self.vlp_batch_size, log_every=self.log_every,
                  lm_target_perplexity=self.lm_target_perplexity)
        if self.decode_strategy not in ('greedy', 'beam'):
            raise ConfigError(f'blm.decode_strategy must be greedy or beam, not {self.decode_strategy}.')
        if self.max_caption_len < 2:
            raise ConfigError(f'blm.max_caption_len counts the <bos> and <eos> markers and must be at least 2, not {self.max_caption_len}.')
        if self.qformer_dim % self.qformer_heads or self.lm_dim % self.lm_heads:
            raise ConfigError('blm dimensions must be divisible by their head counts.')
        if not 0 < self.lm_holdout < 1:
            raise ConfigError(f'blm.lm_holdout must be in ]0, 1[, not {self.lm_holdout}.')
        if min(self.learning_rate, self.lm_learning_rate, self.vlp_learning_rate, self.weight_decay, self.warmup_steps) < 0:
            raise ConfigError('blm learning rates, weight_decay and warmup_steps must be positive.')


@dataclasses.dataclass
class ReconConfig:
    enabled: bool = True
    latent_dim: int = 64
    ridge_lambda: float = None
    ridge_grid: list = dataclasses.field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0, 10000.0, 100000.0])
    ridge_folds: int = 5
    steps: int = 50
    strength: float = 0.8
    beta_start: float = 1e-4
    beta_end: float = 0.02
    conditioning: str = 'cross_attention'
    denoiser_dim: int = 128
    denoiser_heads: int = 4
    uncond_prob: float = 0.1
    guidance_scale: float = 1.0
    stochastic: bool = False
    denoiser_epochs: int = 300
    denoiser_learning_rate: float = 1e-3
    denoiser_batch_size: int = 64
    log_every: int = 50

    def __post_init__(self):
        _positive('recon', latent_dim=self.latent_dim, ridge_folds=self.ridge_folds, steps=self.steps,
                  denoiser_dim=self.denoiser_dim, denoiser_heads=self.denoiser_heads, denoiser_epochs=self.denoiser_epochs,
                  denoiser_batch_size=self.denoiser_batch_size, log_every=self.log_every)
        if self.ridge_lambda is not None and self.ridge_lambda < 0:
            raise ConfigError(f'recon.ridge_lambda must be positive, not {self.ridge_lambda}.')
        if not self.ridge_grid or min(self.ridge_grid) < 0:
            raise ConfigError('recon.ridge_grid must be a non empty list of positive values.')
        if self.ridge_folds < 2:
            raise ConfigError(f'recon.ridge_folds must be at least 2, not {self.ridge_folds}.')
        if not 0 <= self.strength <= 1:
            raise ConfigError(f'recon.strength must be in [0, 1], not {self.strength}.')
        if not 0 < self.beta_start < self.beta_end < 1:
            raise ConfigError('recon.beta_start must be positive and smaller than beta_end, itself smaller than 1.')
        if self.steps > 1000:
            raise ConfigError(f'recon.steps must be at most 1000, not {self.steps}.')
        if self.conditioning not in ('cross_attention', 'film'):
            raise ConfigError(f'recon.conditioning must be cross_attention or film, not {self.conditioning}.')
        if not 0 <= self.uncond_prob < 1:
            raise ConfigError(f'recon.uncond_prob must be in [0, 1[, not {self.uncond_prob}.')


@dataclasses.dataclass
class MetricsConfig:
    cider_n: int = 4
    rouge_beta: float = 1.2
    meteor_alpha: float = 0.9
    meteor_gamma: float = 0.5
    meteor_theta: float = 3.0
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    n_permutations: int = 200
    low_level_features: int = 128

    def __post_init__(self):
        _positive('metrics', cider_n=self.cider_n, rouge_beta=self.rouge_beta, meteor_theta=self.meteor_theta,
                  ssim_window=self.ssim_window, ssim_sigma=self.ssim_sigma, n_permutations=self.n_permutations,
                  low_level_features=self.low_level_features)
        if not 0 < self.meteor_alpha <= 1 or not 0 <= self.meteor_gamma <= 1:
            raise ConfigError('metrics.meteor_alpha must be in ]0, 1] and meteor_gamma in [0, 1].')
        if self.ssim_window % 2 == 0:
            raise ConfigError(f'metrics.ssim_window must be odd, not {self.ssim_window}.')


ABLATION_VARIANTS = ('full', 'wo_ssbed', 'wo_be_btformer', 'wo_lopt', 'm1', 'm3')


@dataclasses.dataclass
class HarnessConfig:
    subjects: list = None
    noise_coeffs: list = dataclasses.field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 11)])
    ablations: list = dataclasses.field(default_factory=lambda: list(ABLATION_VARIANTS))
    plots: bool = True
    strict_ordering: bool = True

    def __post_init__(self):
        if any(c < 0 for c in self.noise_coeffs):
            raise ConfigError(f'harness.noise_coeffs must be positive, not {self.noise_coeffs}.')
        unknown = [v for v in self.ablations if v not in ABLATION_VARIANTS]
        if unknown:
            raise ConfigError(f'Unknown ablation variants {unknown}, available are {ABLATION_VARIANTS}.')


_SECTIONS = {
    'data': DataConfig,
    'bed': BedConfig,
    'blm': BlmConfig,
    'recon': ReconConfig,
    'metrics': MetricsConfig,
    'harness': HarnessConfig,
}

PROFILES = {
    'desk': {},
    'paper-scale': {
        'data': {
            'subjects': [
                {'id': 'subj01', 'voxels': 15724}, {'id': 'subj02', 'voxels': 14278},
                {'id': 'subj05', 'voxels': 13039}, {'id': 'subj07', 'voxels': 12682},
            ],
            'v_align': 15728, 'patch_size': 16, 'n_train': 8859, 'n_test': 982, 'trials': 3,
        },
        'bed': {
            'patch_size': 16, 'token_dim': 1024, 'encoder_depth': 24, 'decoder_depth': 8, 'head_count': 16,
            'epochs': 500, 'warmup_epochs': 40, 'learning_rate': 2.5e-4, 'weight_decay': 0.05, 'batch_size': 16,
        },
        'blm': {'epochs': 10, 'warmup_steps': 1000, 'learning_rate': 1e-5, 'batch_size': 2, 'query_count': 32},
        'recon': {'steps': 50, 'strength': 0.8},
    },
}


@dataclasses.dataclass
class ExperimentConfig:
    """Full experiment configuration.

    Attributes:
        seed (int): global seed, every stochastic stage derives its own seed from it.
        profile (str): name of the profile the configuration is based on, "desk" or "paper-scale".
        deterministic (bool): single threaded deterministic torch algorithms.
        data, bed, blm, recon, metrics, harness: subsystem sections.

    """

    seed: int = 0
    profile: str = 'desk'
    deterministic: bool = True
    data: DataConfig = dataclasses.field(default_factory=DataConfig)
    bed: BedConfig = dataclasses.field(default_factory=BedConfig)
    blm: BlmConfig = dataclasses.field(default_factory=BlmConfig)
    recon: ReconConfig = dataclasses.field(default_factory=ReconConfig)
    metrics: MetricsConfig = dataclasses.field(default_factory=MetricsConfig)
    harness: HarnessConfig = dataclasses.field(default_factory=HarnessConfig)

    def __post_init__(self):
        if self.bed.patch_size != self.data.patch_size:
            raise ConfigError(f'bed.patch_size {self.bed.patch_size} differs from data.patch_size {self.data.patch_size}.')
        if self.harness.subjects:
            unknown = set(self.harness.subjects) - set(self.data.subject_ids)
            if unknown:
                raise ConfigError(f'harness.subjects references unknown subjects {sorted(unknown)}.')

    @classmethod
    def from_dict(cls, values):
        if not isinstance(values, dict):
            raise ConfigError(f'Configuration must be a mapping, not {type(values)}.')
        values = _copy.deepcopy(values)
        profile = values.get('profile', 'desk')
        if profile not in PROFILES:
            raise ConfigError(f'Unknown profile {profile}, available are {sorted(PROFILES)}.')
        merged = _merge(_copy.deepcopy(PROFILES[profile]), values)
        top_fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(merged) - top_fields
        if unknown:
            raise ConfigError(f'Unknown configuration keys {sorted(unknown)}.')
        kwargs = {}
        for name, value in merged.items():
            if name in _SECTIONS:
                kwargs[name] = _build_section(name, value)
            else:
                kwargs[name] = value
        kwargs['profile'] = profile
        return cls(**kwargs)

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self):
        """SHA-256 of the canonical JSON dump of the whole configuration."""
        return _checkpoint.config_hash(self.to_dict())

    def section_hash(self, *names):
        return _checkpoint.config_hash({name: dataclasses.asdict(getattr(self, name)) for name in names})

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    @property
    def subjects(self):
        """Subjects for which per-subject stages are run, the first declared one by default."""
        return list(self.harness.subjects) if self.harness.subjects else self.data.subject_ids[:1]


def _build_section(name, values):
    section_class = _SECTIONS[name]
    if not isinstance(values, dict):
        raise ConfigError(f'Section {name} must be a mapping, not {type(values)}.')
    known = {f.name for f in dataclasses.fields(section_class)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f'Unknown keys {sorted(unknown)} in section {name}.')
    try:
        return section_class(**values)
    except TypeError as e:
        raise ConfigError(f'Invalid section {name}: {e}') from e


def _merge(base, update):
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = _merge(base[key], value)
        else:
            base[key] = value
    return base


def _parse_override(override):
    if '=' not in override:
        raise ConfigError(f'Override must be of the form section.key=value, not {override}.')
    path, raw = override.split('=', 1)
    keys = path.strip().split('.')
    update = current = {}
    for key in keys[:-1]:
        current[key] = {}
        current = current[key]
    current[keys[-1]] = yaml.safe_load(raw)
    return update


def load_config(path=None, profile=None, overrides=(), seed=None, deterministic=None):
    """Load an experiment configuration.

    Profile defaults are applied first, then the file content, then overrides.

    Args:
        path (str, default=None): YAML configuration file. If None, profile defaults are used.
        profile (str, default=None): profile name, overrides the file `profile` key.
        overrides (iterable of str, default=()): `section.key=value` overrides, values are parsed as YAML.
        seed (int, default=None): global seed override.
        deterministic (bool, default=None): deterministic mode override.

    Returns:
        (:class:`ExperimentConfig`)

    """
    values = {}
    if path is not None:
        try:
            with open(path) as fid:
                values = yaml.safe_load(fid) or {}
        except OSError as e:
            raise ConfigError(f'Unable to read configuration file {path}: {e}') from e
        except yaml.YAMLError as e:
            raise ConfigError(f'Invalid YAML in {path}: {e}') from e
    if profile is not None:
        values['profile'] = profile
    for override in overrides:
        values = _merge(values, _parse_override(override))
    if seed is not None:
        values['seed'] = seed
    if deterministic is not None:
        values['deterministic'] = deterministic
    config = ExperimentConfig.from_dict(values)
    logger.info(f'Configuration loaded with profile {config.profile}, hash {config.hash()[:16]}.')
    return config
