import dataclasses
import json as _json
import logging
import os

import numpy as _np
import yaml

from .. import container as _container
from .samples import FmriSample, CaptionSet, DataError
from .transforms import average_repetitions, patchify
from .world import SynthWorld, stimulus_id

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST = 'manifest.yaml'
SPLITS = ('train', 'test')


@dataclasses.dataclass
class DatasetManifest:
    """Description of a dataset directory.

    Attributes:
        subjects (list of dict): subjects `id` and `voxels` count.
        splits (dict): `train` and `test` stimulus id lists.
        v_align (int): aligned voxel count.
        patch_size (int): voxels per patch.
        trials (int): repetitions per stimulus.
        attr_embed_dim (int): image features dimension.
        image_size (int): rendered images side.
        files (dict): paths, relative to the dataset root, of captions, attributes, features, images and voxels files.
        world (dict): generator parameters.
        seed (int): generator seed.

    """

    subjects: list
    splits: dict
    v_align: int
    patch_size: int
    trials: int
    attr_embed_dim: int
    image_size: int
    files: dict
    world: dict
    seed: int
    format_version: int = FORMAT_VERSION

    _REQUIRED = ('subjects', 'splits', 'v_align', 'patch_size', 'trials', 'attr_embed_dim', 'image_size', 'files', 'world', 'seed', 'format_version')

    def __post_init__(self):
        if self.format_version != FORMAT_VERSION:
            raise DataError(f'Unsupported manifest format version {self.format_version}.')
        if set(self.splits) != set(SPLITS):
            raise DataError(f'Manifest splits must be {SPLITS}, not {sorted(self.splits)}.')
        overlap = set(self.splits['train']) & set(self.splits['test'])
        if overlap:
            raise DataError(f'{len(overlap)} stimuli are in both train and test splits.')
        if self.v_align % self.patch_size:
            raise DataError(f'v_align {self.v_align} is not divisible by patch_size {self.patch_size}.')
        for subject in self.subjects:
            if not isinstance(subject, dict) or set(subject) != {'id', 'voxels'}:
                raise DataError(f'Subject entries must have id and voxels keys, not {subject}.')
            if subject['id'] not in self.files.get('voxels', {}):
                raise DataError(f'No voxels files declared for subject {subject["id"]}.')

    @classmethod
    def from_dict(cls, values):
        if not isinstance(values, dict):
            raise DataError(f'Manifest schema mismatch: expected a mapping, got {type(values)}.')
        missing = [k for k in cls._REQUIRED if k not in values]
        unknown = [k for k in values if k not in cls._REQUIRED]
        if missing or unknown:
            raise DataError(f'Manifest schema mismatch: missing keys {missing}, unknown keys {unknown}.')
        return cls(**values)

    def to_dict(self):
        return {k: getattr(self, k) for k in self._REQUIRED}

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fid:
                values = yaml.safe_load(fid)
        except OSError as e:
            raise DataError(f'Unable to read manifest {path}: {e}') from e
        except yaml.YAMLError as e:
            raise DataError(f'Manifest schema mismatch, invalid YAML: {e}') from e
        return cls.from_dict(values)

    @property
    def subject_ids(self):
        return [s['id'] for s in self.subjects]

    def voxel_count(self, subject):
        for s in self.subjects:
            if s['id'] == subject:
                return s['voxels']
        raise DataError(f'Unknown subject {subject}, available are {self.subject_ids}.')

    @property
    def stimulus_ids(self):
        return self.splits['train'] + self.splits['test']


def _write_f32(path, array):
    _np.ascontiguousarray(array, dtype='<f4').tofile(path)


def _write_jsonl(path, records):
    with open(path, 'w') as fid:
        for record in records:
            fid.write(_json.dumps(record, sort_keys=True) + '\n')


def make_synth(config, path, seed):
    """Generates a synthetic dataset directory.

    Args:
        config (DataConfig): world sizes, subjects, splits and trials.
        path (str): output directory, created if needed.
        seed (int): world seed.

    Returns:
        (:class:`DatasetManifest`) the written manifest.

    """
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise DataError(f'Unable to create dataset directory {path}: {e}') from e
    if not os.access(path, os.W_OK):
        raise DataError(f'Dataset directory {path} is not writable.')
    world = SynthWorld.from_config(config, seed)
    count = config.n_train + config.n_test
    triples = world.draw_triples(count)
    ids = [stimulus_id(i) for i in range(count)]
    splits = {'train': ids[:config.n_train], 'test': ids[config.n_train:]}
    logger.info(f'Generating synthetic dataset in {path} with {count} stimuli and {len(config.subjects)} subjects.')

    files = {
        'captions': 'captions.jsonl',
        'attributes': 'attributes.jsonl',
        'imgfeat': 'imgfeat.f32',
        'images': 'images/stimuli.f32',
        'voxels': {},
    }
    _write_jsonl(os.path.join(path, files['captions']), [
        {'stimulus_id': i, 'captions': world.captions(t)} for i, t in zip(ids, triples)
    ])
    _write_jsonl(os.path.join(path, files['attributes']), [
        {'stimulus_id': i, 'color': t[0], 'object': t[1], 'context': t[2]} for i, t in zip(ids, triples)
    ])
    _write_f32(os.path.join(path, files['imgfeat']), _np.stack([world.image_features(t) for t in triples]))
    os.makedirs(os.path.join(path, 'images'), exist_ok=True)
    _write_f32(os.path.join(path, files['images']), _np.stack([world.render(t) for t in triples]))

    by_id = dict(zip(ids, triples))
    for subject in config.subjects:
        sid = subject['id']
        os.makedirs(os.path.join(path, sid), exist_ok=True)
        files['voxels'][sid] = {}
        for split, split_ids in splits.items():
            rel = f'{sid}/{split}.f32'
            voxels = _np.stack([
                world.trial(sid, by_id[i], i, r) for i in split_ids for r in range(config.trials)
            ])
            _write_f32(os.path.join(path, rel), voxels)
            files['voxels'][sid][split] = rel
            logger.debug(f'Subject {sid} {split} voxels written with shape {voxels.shape}.')

    manifest = DatasetManifest(
        subjects=[dict(s) for s in config.subjects],
        splits=splits,
        v_align=config.v_align,
        patch_size=config.patch_size,
        trials=config.trials,
        attr_embed_dim=config.attr_embed_dim,
        image_size=config.image_size,
        files=files,
        world={
            'colors': world.color_vocab, 'objects': world.object_vocab, 'contexts': world.context_vocab,
            'obs_noise_std': float(config.obs_noise_std),
        },
        seed=seed,
    )
    with open(os.path.join(path, MANIFEST), 'w') as fid:
        fid.write(manifest.dump())
    logger.info(f'Synthetic dataset written to {path}.')
    return manifest


class Dataset:
    """Read access to a dataset directory.

    Read paths are safe for concurrent use once loaded.

    Attributes:
        manifest (DatasetManifest): dataset manifest.
        root (str): dataset directory.

    """

    def __init__(self, manifest, root):
        self.manifest = manifest
        self.root = root
        self._captions = self._read_jsonl(manifest.files['captions'])
        self._attributes = self._read_jsonl(manifest.files['attributes'])
        for stim in manifest.stimulus_ids:
            if stim not in self._captions:
                raise DataError(f'Missing captions for stimulus {stim}.')
            if stim not in self._attributes:
                raise DataError(f'Missing attributes for stimulus {stim}.')
        self._check_sizes()
        self._index = {stim: i for i, stim in enumerate(manifest.stimulus_ids)}

    def _path(self, rel):
        return os.path.join(self.root, rel)

    def _read_jsonl(self, rel):
        records = {}
        try:
            with open(self._path(rel)) as fid:
                for line in fid:
                    if line.strip():
                        record = _json.loads(line)
                        records[record.pop('stimulus_id')] = record
        except (OSError, ValueError, KeyError) as e:
            raise DataError(f'Unable to read {rel}: {e}') from e
        return records

    def _expect_size(self, rel, expected):
        path = self._path(rel)
        if not os.path.exists(path):
            raise DataError(f'Missing dataset file {rel}.')
        size = os.path.getsize(path)
        if size != expected:
            raise DataError(f'Byte length mismatch for {rel}: {size} bytes found, {expected} expected.')

    def _check_sizes(self):
        m = self.manifest
        stimuli = len(m.stimulus_ids)
        self._expect_size(m.files['imgfeat'], stimuli * m.attr_embed_dim * 4)
        self._expect_size(m.files['images'], stimuli * m.image_size * m.image_size * 3 * 4)
        for subject in m.subject_ids:
            for split in SPLITS:
                self._expect_size(m.files['voxels'][subject][split], len(m.splits[split]) * m.trials * m.voxel_count(subject) * 4)

    def _read_f32(self, rel, shape):
        return _np.fromfile(self._path(rel), dtype='<f4').reshape(shape)

    @property
    def subjects(self):
        return self.manifest.subject_ids

    def stimulus_ids(self, split):
        self._check_split(split)
        return list(self.manifest.splits[split])

    def _check_split(self, split):
        if split not in SPLITS:
            raise ValueError(f'split must be one of {SPLITS}, not {split}.')

    def _split_rows(self, split):
        ids = self.manifest.stimulus_ids
        if split == 'train':
            return slice(0, len(self.manifest.splits['train']))
        return slice(len(self.manifest.splits['train']), len(ids))

    def trials(self, subject, split):
        """Separate trials of a split, as a (n_stimuli × trials, V_s) float32 array with stimulus and repetition arrays."""
        self._check_split(split)
        m = self.manifest
        voxels = self._read_f32(m.files['voxels'][subject][split], (-1, m.voxel_count(subject)))
        stimuli = _np.repeat(_np.arange(len(m.splits[split])), m.trials)
        repetitions = _np.tile(_np.arange(m.trials), len(m.splits[split]))
        return voxels, stimuli, repetitions

    def averaged(self, subject, split):
        """Repetition averaged voxels of a split, one row per stimulus in split order."""
        voxels, _, _ = self.trials(subject, split)
        m = self.manifest
        return voxels.reshape(len(m.splits[split]), m.trials, -1).mean(axis=1, dtype='float64').astype('float32')

    def samples(self, subject, split, seed=None, average=False):
        """Iterates over FmriSample of a split.

        Args:
            subject (str): subject id.
            split (str): 'train' or 'test'.
            seed (int, default=None): if given, samples are yielded in an order shuffled with this seed.
            average (bool, default=False): yield one repetition average per stimulus instead of separate trials.

        """
        voxels, stimuli, repetitions = self.trials(subject, split)
        ids = self.manifest.splits[split]
        if average:
            by_stimulus = _np.argsort(stimuli, kind='stable')
            groups = _np.split(by_stimulus, _np.cumsum(_np.bincount(stimuli, minlength=len(ids)))[:-1])
            for stim, rows in zip(ids, groups):
                yield average_repetitions([FmriSample(subject, stim, int(repetitions[j]), voxels[j]) for j in rows])
            return
        order = _np.arange(len(voxels)) if seed is None else _np.random.default_rng(seed).permutation(len(voxels))
        for j in order:
            yield FmriSample(subject, ids[stimuli[j]], int(repetitions[j]), voxels[j])

    def caption_set(self, stim):
        try:
            return CaptionSet(stim, tuple(self._captions[stim]['captions']))
        except KeyError:
            raise DataError(f'Missing captions for stimulus {stim}.')

    def caption_sets(self, split):
        return [self.caption_set(s) for s in self.stimulus_ids(split)]

    def attributes(self, stim):
        return dict(self._attributes[stim])

    def image_features(self, split=None):
        m = self.manifest
        features = self._read_f32(m.files['imgfeat'], (-1, m.attr_embed_dim))
        return features if split is None else features[self._split_rows(split)]

    def images(self, split=None):
        m = self.manifest
        images = self._read_f32(m.files['images'], (-1, m.image_size, m.image_size, 3))
        return images if split is None else images[self._split_rows(split)]

    def corpus(self, split='train'):
        """Flat list of every caption of a split."""
        return [c for cs in self.caption_sets(split) for c in cs.captions]

    def container(self, subject, split, preprocesses=[], average=False):
        """Returns a :class:`FmriContainer` over the split trials, or the repetition averages if `average`."""
        if average:
            voxels = self.averaged(subject, split)
            stimuli = _np.arange(len(voxels))
            repetitions = _np.full(len(voxels), -1)
        else:
            voxels, stimuli, repetitions = self.trials(subject, split)
        subjects = _np.full(len(voxels), self.subjects.index(subject))
        return _container.FmriContainer.from_arrays(
            voxels, preprocesses=preprocesses, stimulus=stimuli, repetition=repetitions, subject=subjects
        )

    def aligned_patches(self, subject, split, statistics=None, average=False):
        """Optionally standardized, aligned and patched voxels of a split, (n, P, patch_size)."""
        voxels = self.averaged(subject, split) if average else self.trials(subject, split)[0]
        if statistics is not None:
            voxels = statistics.apply(voxels)
        return patchify(voxels, self.manifest.v_align, self.manifest.patch_size)

    def __str__(self):
        m = self.manifest
        return f'''Dataset:
    Root     : {self.root}
    Subjects : {m.subject_ids}
    Train    : {len(m.splits['train'])} stimuli
    Test     : {len(m.splits['test'])} stimuli
    Trials   : {m.trials}
    V align  : {m.v_align}
    '''


def load_dataset(path):
    """Loads and validates a dataset directory.

    Args:
        path (str): dataset directory holding a `manifest.yaml`.

    Returns:
        (:class:`Dataset`)

    """
    manifest = DatasetManifest.load(os.path.join(path, MANIFEST))
    dataset = Dataset(manifest, path)
    logger.info(f'Dataset loaded from {path}: {len(manifest.subjects)} subjects, {len(manifest.stimulus_ids)} stimuli.')
    return dataset
