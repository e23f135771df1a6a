"""Staged experiment pipeline with content-digest idempotence.

Each stage writes its outputs under the run directory and a `stages/{stage}.done` JSON file
recording the digests of its inputs (configuration sections and upstream outputs) and of its
outputs. A stage is skipped when its done-file exists with the same input digests and every
recorded output still has its recorded digest; a modified output aborts the run.
"""
import dataclasses
import json as _json
import logging
import os
import time

import matplotlib
import numpy as _np

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from .. import _utils, checkpoint as _checkpoint  # noqa: E402
from ..bed import pretrain_bed  # noqa: E402
from ..blm import (  # noqa: E402
    FrozenStack, caption_from_image_features, generate_captions, load_blm, load_lm, pretrain_lm, pretrain_vlp, train_blm
)
from ..data import load_dataset, make_synth  # noqa: E402
from ..metrics import (  # noqa: E402
    MetricReport, RandomProjectionExtractor, TextEncoder, cider_null, evaluate_captions, evaluate_images, image_pair_scores
)
from ..preprocesses import Aligner, NoiseInjector, Standardizer  # noqa: E402
from ..recon import ImageFeatureProbe, fit_components, load_components  # noqa: E402

logger = logging.getLogger(__name__)

STAGES = ('synth', 'lm', 'vlp', 'bed', 'blm', 'caption', 'eval', 'recon')
DEPENDENCIES = {
    'synth': (),
    'lm': ('synth',),
    'vlp': ('synth', 'lm'),
    'bed': ('synth',),
    'blm': ('synth', 'bed', 'vlp'),
    'caption': ('synth', 'vlp', 'blm'),
    'eval': ('synth', 'caption'),
    'recon': ('synth', 'vlp', 'blm', 'caption'),
}
SECTIONS = {
    'synth': ('data',),
    'lm': ('blm',),
    'vlp': ('blm',),
    'bed': ('data', 'bed'),
    'blm': ('data', 'blm'),
    'caption': ('blm',),
    'eval': ('metrics',),
    'recon': ('blm', 'recon', 'metrics'),
}
PER_SUBJECT = ('blm', 'caption', 'eval', 'recon')
IMGCAP = 'imgcap'
RECORD_FILE = 'run_record.json'


class StageError(Exception):
    """Stage failure, message prefixed with the stage name."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f'Stage {stage}: {message}')


@dataclasses.dataclass
class RunRecord:
    """Provenance of a pipeline run.

    Attributes:
        config_hash (str): configuration hash.
        seed (int): global seed.
        digests (dict): run relative path to digest of every consumed or produced artifact.
        reports (dict): report name to :class:`MetricReport`.
        wall_clock (dict): seconds spent per executed stage.
        executed (list): stages executed.
        skipped (list): stages skipped by digest.

    """

    config_hash: str
    seed: int
    digests: dict = dataclasses.field(default_factory=dict)
    reports: dict = dataclasses.field(default_factory=dict)
    wall_clock: dict = dataclasses.field(default_factory=dict)
    executed: list = dataclasses.field(default_factory=list)
    skipped: list = dataclasses.field(default_factory=list)

    def to_dict(self):
        values = dataclasses.asdict(self)
        values['reports'] = {k: v.to_dict() for k, v in sorted(self.reports.items())}
        return values

    @classmethod
    def from_dict(cls, values):
        values = dict(values)
        values['reports'] = {k: MetricReport.from_dict(v) for k, v in values.get('reports', {}).items()}
        return cls(**values)

    def save(self, path):
        with open(path, 'w') as fid:
            _json.dump(self.to_dict(), fid, sort_keys=True, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fid:
            return cls.from_dict(_json.load(fid))

    def __str__(self):
        return f'''Run record:
    Config hash : {self.config_hash[:16]}
    Seed        : {self.seed}
    Executed    : {', '.join(self.executed) or '-'}
    Skipped     : {', '.join(self.skipped) or '-'}
    Reports     : {', '.join(sorted(self.reports)) or '-'}
        '''


class Workspace:
    """Run directory layout: `data/`, `checkpoints/`, `outputs/` and `stages/` done-files."""

    def __init__(self, root):
        self.root = os.path.abspath(root)
        for name in ('data', 'checkpoints', 'outputs', 'stages'):
            os.makedirs(os.path.join(self.root, name), exist_ok=True)

    def path(self, rel):
        return os.path.join(self.root, rel)

    @property
    def data_dir(self):
        return self.path('data')

    def done_path(self, stage):
        return self.path(os.path.join('stages', f'{stage}.done'))

    def read_done(self, stage):
        try:
            with open(self.done_path(stage)) as fid:
                return _json.load(fid)
        except FileNotFoundError:
            return None
        except ValueError as e:
            raise StageError(stage, f'Unreadable done-file: {e}') from e

    def write_done(self, stage, inputs, outputs):
        record = {'stage': stage, 'inputs': inputs, 'outputs': {rel: _utils.file_digest(self.path(rel)) for rel in sorted(outputs)}}
        with open(self.done_path(stage), 'w') as fid:
            fid.write(_checkpoint.canonical_json(record))
        return record

    def check_done(self, stage, inputs):
        """True if `stage` is complete for `inputs`; raises StageError if a recorded output was modified."""
        record = self.read_done(stage)
        if record is None:
            return False
        if record['inputs'] != inputs:
            logger.info(f'Stage {stage} inputs changed, stage will be executed again.')
            return False
        for rel, digest in record['outputs'].items():
            path = self.path(rel)
            if not os.path.exists(path):
                raise StageError(stage, f'Recorded output {rel} is missing.')
            if _utils.file_digest(path) != digest:
                raise StageError(stage, f'Digest mismatch for {rel}: the file was modified after the stage completed.')
        return True

    def save_checkpoint(self, name, checkpoint):
        rel = os.path.join('checkpoints', f'{name}.ckpt')
        checkpoint.save(self.path(rel))
        return rel

    def load_checkpoint(self, name, kind, stage):
        try:
            return _checkpoint.Checkpoint.load(self.path(os.path.join('checkpoints', f'{name}.ckpt')), kind=kind)
        except (OSError, _checkpoint.CheckpointError) as e:
            raise StageError(stage, f'Unable to load {name} checkpoint: {e}') from e

    def write_jsonl(self, rel, records):
        with open(self.path(rel), 'w') as fid:
            for record in records:
                fid.write(_json.dumps(record, sort_keys=True) + '\n')
        return rel

    def read_jsonl(self, rel):
        with open(self.path(rel)) as fid:
            return [_json.loads(line) for line in fid if line.strip()]


class Pipeline:
    """Runs the experiment stages of a configuration in a run directory.

    Args:
        config (ExperimentConfig): experiment configuration.
        root (str): run directory.

    """

    def __init__(self, config, root):
        self.config = config
        self.workspace = Workspace(root)
        self.record = RunRecord(config.hash(), config.seed)
        self._dataset = None
        self._frozen = None
        self._extractors = None

    @property
    def stages(self):
        return STAGES if self.config.recon.enabled else STAGES[:-1]

    def seed(self, *labels):
        return _utils.derive_seed(self.config.seed, *labels)

    @property
    def dataset(self):
        if self._dataset is None:
            self._dataset = load_dataset(self.workspace.data_dir)
        return self._dataset

    @property
    def frozen(self):
        if self._frozen is None:
            self._frozen = FrozenStack.from_checkpoint(self.workspace.load_checkpoint('vlp', 'vlp', 'vlp'))
        return self._frozen

    def inputs(self, stage):
        inputs = {'config': self.config.section_hash(*SECTIONS[stage]), 'seed': str(self.config.seed)}
        if stage in PER_SUBJECT:
            inputs['subjects'] = ','.join(self.config.subjects)
        for dependency in DEPENDENCIES[stage]:
            record = self.workspace.read_done(dependency)
            if record is None:
                raise StageError(stage, f'Upstream stage {dependency} has not completed.')
            for rel, digest in record['outputs'].items():
                inputs[f'{dependency}:{rel}'] = digest
        return inputs

    def require(self, stage, consumer):
        """Raises StageError in `consumer` if `stage` has no valid done-file."""
        record = self.workspace.read_done(stage)
        if record is None:
            raise StageError(consumer, f'Missing {stage} artifacts, run the pipeline first.')
        self.workspace.check_done(stage, record['inputs'])
        return record

    def run_stage(self, stage):
        inputs = self.inputs(stage)
        if self.workspace.check_done(stage, inputs):
            logger.info(f'Stage {stage} is up to date, skipped.')
            self.record.skipped.append(stage)
        else:
            logger.info(f'Stage {stage} started.')
            start = time.perf_counter()
            try:
                outputs = getattr(self, f'_{stage}')()
            except StageError:
                raise
            except Exception as e:
                raise StageError(stage, f'{type(e).__name__}: {e}') from e
            self.workspace.write_done(stage, inputs, outputs)
            self.record.wall_clock[stage] = time.perf_counter() - start
            self.record.executed.append(stage)
            logger.info(f'Stage {stage} done in {self.record.wall_clock[stage]:.1f} s.')
        self.record.digests.update({k.split(':', 1)[1]: v for k, v in inputs.items() if ':' in k})
        self.record.digests.update(self.workspace.read_done(stage)['outputs'])

    def run(self, stages=None):
        """Executes `stages` (all by default) in pipeline order and returns the :class:`RunRecord`."""
        stages = self.stages if stages is None else stages
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ValueError(f'Unknown stages {unknown}, available are {STAGES}.')
        _utils.seed_everything(self.config.seed, self.config.deterministic)
        for stage in self.stages:
            if stage in stages:
                self.run_stage(stage)
        self.collect_reports()
        self.record.save(self.workspace.path(RECORD_FILE))
        logger.info(f'{self.record}')
        return self.record

    def collect_reports(self):
        outputs = self.workspace.path('outputs')
        for name in sorted(os.listdir(outputs)):
            if name.startswith('report_') and name.endswith('.json'):
                self.record.reports[name[len('report_'):-len('.json')]] = MetricReport.load(os.path.join(outputs, name))
        return self.record.reports

    # Shared inference helpers

    def test_patches(self, subject, statistics, coeff=0., noise_seed=0):
        """Repetition averaged test recordings of `subject`, optionally noised, standardized and patched."""
        m = self.dataset.manifest
        chain = [NoiseInjector(coeff, self.config.data.noise_base, seed=noise_seed)]
        if statistics is not None:
            chain.append(Standardizer(statistics))
        chain.append(Aligner(m.v_align, m.patch_size))
        voxels = self.dataset.container(subject, 'test', preprocesses=chain, average=True).voxels
        return voxels.reshape(len(voxels), -1, m.patch_size)

    def caption(self, blm, statistics, subject, coeff=0., noise_seed=0):
        cfg = self.config.blm
        patches = self.test_patches(subject, statistics, coeff, noise_seed)
        return generate_captions(patches, blm, self.frozen, cfg.decode_strategy, cfg.beam_width, cfg.max_caption_len)

    def text_encoder(self):
        return TextEncoder(self.frozen.lm.token_embedding.weight.detach().numpy(), self.frozen.vocabulary)

    def evaluate(self, captions, name, **metadata):
        """MetricReport of test captions against the test references."""
        dataset = self.dataset
        ids = dataset.stimulus_ids('test')
        if len(captions) != len(ids):
            raise StageError('eval', f'{len(captions)} captions for {len(ids)} test stimuli.')
        metadata = dict(metadata, split='test', seed=self.config.seed, config_hash=self.record.config_hash, name=name)
        return evaluate_captions(
            captions, [dataset.caption_set(s).captions for s in ids], [dataset.attributes(s) for s in ids],
            dataset.manifest.world['objects'], self.text_encoder(), self.config.metrics, metadata
        )

    def cider_chance(self, captions, subject):
        """97.5th percentile of the CIDEr of shuffled pairings of the test `captions` with the test references."""
        references = [self.dataset.caption_set(s).captions for s in self.dataset.stimulus_ids('test')]
        null = cider_null(captions, references, self.config.metrics, seed=self.seed('cider_null', subject))
        return float(_np.percentile(null, 97.5))

    def extractors(self):
        """Low-level random projection and high-level image feature probe extractors."""
        if self._extractors is None:
            m = self.dataset.manifest
            low = RandomProjectionExtractor(m.image_size * m.image_size * 3, self.config.metrics.low_level_features,
                                            seed=self.seed('twoway_low'))
            high = ImageFeatureProbe(self.dataset.images('train'), self.dataset.image_features('train'),
                                     seed=self.seed('twoway_high'))
            self._extractors = (low, high)
        return self._extractors

    def recon_components(self, subject):
        return load_components({
            name: self.workspace.load_checkpoint(f'{name}_{subject}', name, 'recon') for name in ('ridge', 'autoencoder', 'denoiser')
        })

    # Stages

    def _synth(self):
        manifest = make_synth(self.config.data, self.workspace.data_dir, self.seed('synth'))
        self._dataset = None
        files = [manifest.files[k] for k in ('captions', 'attributes', 'imgfeat', 'images')]
        files += [rel for splits in manifest.files['voxels'].values() for rel in splits.values()]
        return [os.path.join('data', 'manifest.yaml')] + [os.path.join('data', f) for f in files]

    def _lm(self):
        checkpoint = pretrain_lm(self.dataset.corpus('train'), self.config.blm, seed=self.seed('lm'))
        return [self.workspace.save_checkpoint('lm', checkpoint)]

    def _vlp(self):
        lm, vocabulary = load_lm(self.workspace.load_checkpoint('lm', 'lm', 'vlp'))
        stack = pretrain_vlp(self.dataset.image_features('train'), self.dataset.caption_sets('train'), lm, vocabulary,
                             self.config.blm, seed=self.seed('vlp'))
        self._frozen = stack
        return [self.workspace.save_checkpoint('vlp', stack.to_checkpoint(self.config.blm))]

    def _bed(self):
        checkpoint = pretrain_bed(self.dataset, self.config.bed, seed=self.seed('bed'), standardize=self.config.data.standardize)
        return [self.workspace.save_checkpoint('bed', checkpoint)]

    def _blm(self):
        bed = self.workspace.load_checkpoint('bed', 'bed', 'blm')
        outputs = []
        for subject in self.config.subjects:
            checkpoint = train_blm(self.dataset, bed, self.frozen, self.config.blm, subject, seed=self.seed('blm', subject),
                                   standardize=self.config.data.standardize)
            outputs.append(self.workspace.save_checkpoint(f'blm_{subject}', checkpoint))
        return outputs

    def _caption(self):
        cfg = self.config.blm
        ids = self.dataset.stimulus_ids('test')
        decode = {'strategy': cfg.decode_strategy, 'beam_width': cfg.beam_width, 'max_len': cfg.max_caption_len}
        outputs = []
        for subject in self.config.subjects:
            blm, statistics = load_blm(self.workspace.load_checkpoint(f'blm_{subject}', 'blm', 'caption'))
            captions = self.caption(blm, statistics, subject)
            outputs.append(self.workspace.write_jsonl(os.path.join('outputs', f'captions_{subject}.jsonl'), [
                dict(decode, stimulus_id=s, caption=c, subject=subject) for s, c in zip(ids, captions)
            ]))
        captions = caption_from_image_features(self.dataset.image_features('test'), self.frozen, cfg.decode_strategy,
                                               cfg.beam_width, cfg.max_caption_len)
        outputs.append(self.workspace.write_jsonl(os.path.join('outputs', f'captions_{IMGCAP}.jsonl'), [
            dict(decode, stimulus_id=s, caption=c, subject=IMGCAP) for s, c in zip(ids, captions)
        ]))
        return outputs

    def read_captions(self, name):
        records = self.workspace.read_jsonl(os.path.join('outputs', f'captions_{name}.jsonl'))
        if [r['stimulus_id'] for r in records] != self.dataset.stimulus_ids('test'):
            raise StageError('eval', f'Captions of {name} do not match the test stimuli order.')
        return [r['caption'] for r in records]

    def _eval(self):
        outputs = []
        for name in list(self.config.subjects) + [IMGCAP]:
            captions = self.read_captions(name)
            report = self.evaluate(captions, name, subject=name)
            if name != IMGCAP:
                chance = self.cider_chance(captions, name)
                logger.info(f'{name} CIDEr {report["cider"]:.4f}, shuffled pairing 97.5th percentile {chance:.4f}.')
            rel = os.path.join('outputs', f'report_{name}.json')
            report.save(self.workspace.path(rel))
            outputs.append(rel)
        return outputs

    def _recon(self):
        dataset = self.dataset
        cfg = self.config.recon
        frozen = self.frozen
        table = frozen.lm.token_embedding.weight.detach().numpy()
        low, high = self.extractors()
        targets = dataset.images('test')
        ids = dataset.stimulus_ids('test')
        outputs = []
        for subject in self.config.subjects:
            components = fit_components(dataset, subject, frozen.vocabulary, table, cfg, seed=self.seed('recon', subject),
                                        max_len=self.config.blm.max_caption_len)
            for name, checkpoint in components.checkpoints.items():
                outputs.append(self.workspace.save_checkpoint(f'{name}_{subject}', checkpoint))
            captions = self.read_captions(subject)
            voxels = dataset.averaged(subject, 'test')
            directory = os.path.join('outputs', f'recon_{subject}')
            os.makedirs(self.workspace.path(directory), exist_ok=True)
            images = []
            for stim, fmri, caption, target in zip(ids, voxels, captions, targets):
                result = components.reconstruct(fmri, caption, frozen.vocabulary, cfg, seed=self.seed('recon', stim),
                                                max_len=self.config.blm.max_caption_len)
                images.append(result.image)
                png = os.path.join(directory, f'{stim}.png')
                plt.imsave(self.workspace.path(png), _np.clip(result.image, 0, 1))
                scores = image_pair_scores(result.image, target, self.config.metrics)
                sketch_scores = image_pair_scores(result.sketch, target, self.config.metrics)
                sidecar = os.path.join(directory, f'{stim}.json')
                with open(self.workspace.path(sidecar), 'w') as fid:
                    _json.dump({
                        'stimulus_id': stim, 'caption': caption, 'seed': result.seed, 'start_step': result.start_step,
                        'reverse_steps': result.reverse_steps, 'strength': cfg.strength, 'steps': cfg.steps,
                        **scores, **{f'sketch_{k}': v for k, v in sketch_scores.items()},
                    }, fid, sort_keys=True)
                outputs += [png, sidecar]
            report = evaluate_images(_np.stack(images), targets, low, high, self.config.metrics, {
                'split': 'test', 'seed': self.config.seed, 'config_hash': self.record.config_hash,
                'name': f'recon_{subject}', 'subject': subject,
            })
            rel = os.path.join('outputs', f'report_recon_{subject}.json')
            report.save(self.workspace.path(rel))
            outputs.append(rel)
        return outputs


def run_pipeline(config, root):
    """Runs every stage of `config` in the run directory `root`.

    Stages are make_synth, LM pretraining, VLP pretraining, BED pretraining, BLM training,
    captioning, caption evaluation and, if enabled, reconstruction. Stages whose done-file
    matches their input digests are skipped.

    Returns:
        (:class:`RunRecord`)

    Raises:
        StageError: naming the failing stage.

    """
    return Pipeline(config, root).run()
