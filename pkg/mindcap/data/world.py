"""Synthetic brain-image-caption world.

Every stimulus is an attribute triple (color, object, context). Its ground-truth image
features are the normalized sum of the three attribute embeddings, each subject observes
them through a fixed random linear mixer plus Gaussian noise, and five fixed templates
describe it in words. Everything is a pure function of the world seed.
"""
import itertools as _itertools
import logging

import numpy as _np

from .. import _utils
from .samples import DataError

logger = logging.getLogger(__name__)

COLORS = {
    'red': (0.85, 0.10, 0.10), 'green': (0.10, 0.70, 0.20), 'blue': (0.10, 0.25, 0.85), 'yellow': (0.95, 0.85, 0.10),
    'black': (0.05, 0.05, 0.05), 'white': (0.97, 0.97, 0.97), 'orange': (0.95, 0.55, 0.10), 'purple': (0.55, 0.15, 0.65),
    'pink': (0.95, 0.55, 0.70), 'brown': (0.45, 0.28, 0.12), 'gray': (0.50, 0.50, 0.50), 'cyan': (0.10, 0.80, 0.85),
}
OBJECTS = (
    'cat', 'dog', 'bird', 'car', 'horse', 'boat', 'chair', 'cup', 'clock', 'bus', 'train', 'bear',
    'sheep', 'apple', 'kite', 'lamp', 'truck', 'vase', 'bench', 'cake', 'phone', 'bike', 'cow', 'duck',
)
CONTEXTS = {
    'kitchen': (0.80, 0.72, 0.60), 'park': (0.45, 0.65, 0.40), 'street': (0.40, 0.40, 0.45), 'beach': (0.90, 0.82, 0.60),
    'room': (0.70, 0.62, 0.55), 'field': (0.60, 0.75, 0.35), 'garden': (0.35, 0.55, 0.30), 'forest': (0.20, 0.35, 0.20),
    'desert': (0.85, 0.70, 0.45), 'office': (0.65, 0.68, 0.72), 'river': (0.35, 0.55, 0.70), 'market': (0.75, 0.55, 0.45),
}
TEMPLATES = (
    'a {color} {object} in a {context}',
    'there is a {color} {object} at the {context}',
    'the {object} is {color} and it is in a {context}',
    'a {context} with a {color} {object}',
    'a photo of a {color} {object} in the {context}',
)


def stimulus_id(index):
    return f'stim{index:05d}'


class SynthWorld:
    """Fixed random world mapping attribute triples to image features, voxels, captions and images.

    Args:
        colors (int): color vocabulary size C.
        objects (int): object vocabulary size O.
        contexts (int): context vocabulary size K.
        attr_embed_dim (int): dimension d_v of attribute embeddings and image features.
        subjects (list of dict): subjects with `id` and `voxels` keys.
        obs_noise_std (float): per trial observation noise std.
        seed (int): world seed.
        image_size (int, default=32): rendered images side.

    Attributes:
        color_vocab, object_vocab, context_vocab (list of str): attribute vocabularies.
        attr_embeddings (dict): attribute word to d_v vector.
        subject_mixers (dict): subject id to (V_s, d_v) mixing matrix.

    """

    def __init__(self, colors, objects, contexts, attr_embed_dim, subjects, obs_noise_std, seed, image_size=32):
        if colors > len(COLORS) or objects > len(OBJECTS) or contexts > len(CONTEXTS):
            raise DataError(
                f'World sizes ({colors}, {objects}, {contexts}) exceed available vocabularies '
                f'({len(COLORS)}, {len(OBJECTS)}, {len(CONTEXTS)}).'
            )
        if obs_noise_std < 0:
            raise ValueError(f'obs_noise_std must be positive, not {obs_noise_std}.')
        self.seed = seed
        self.attr_embed_dim = attr_embed_dim
        self.obs_noise_std = obs_noise_std
        self.image_size = image_size
        self.color_vocab = list(COLORS)[:colors]
        self.object_vocab = list(OBJECTS)[:objects]
        self.context_vocab = list(CONTEXTS)[:contexts]
        self.subjects = {s['id']: s['voxels'] for s in subjects}

        rng = _np.random.default_rng(_utils.derive_seed(seed, 'attributes'))
        words = self.color_vocab + self.object_vocab + self.context_vocab
        table = rng.standard_normal((len(words), attr_embed_dim))
        self.attr_embeddings = dict(zip(words, table))
        self.subject_mixers = {
            subject: _np.random.default_rng(_utils.derive_seed(seed, 'mixer', subject)).normal(
                0, 1 / _np.sqrt(attr_embed_dim), size=(voxels, attr_embed_dim))
            for subject, voxels in self.subjects.items()
        }
        self._silhouettes = {o: self._silhouette(o) for o in self.object_vocab}

    @classmethod
    def from_config(cls, config, seed):
        return cls(
            colors=config.colors, objects=config.objects, contexts=config.contexts, attr_embed_dim=config.attr_embed_dim,
            subjects=config.subjects, obs_noise_std=config.obs_noise_std, seed=seed, image_size=config.image_size
        )

    @property
    def triples(self):
        return list(_itertools.product(self.color_vocab, self.object_vocab, self.context_vocab))

    def draw_triples(self, count):
        """Draws `count` distinct attribute triples without replacement."""
        triples = self.triples
        if count > len(triples):
            raise DataError(f'{count} stimuli requested but the world only has {len(triples)} attribute combinations.')
        order = _np.random.default_rng(_utils.derive_seed(self.seed, 'stimuli')).permutation(len(triples))
        return [triples[i] for i in order[:count]]

    def image_features(self, triple):
        color, obj, context = triple
        v = self.attr_embeddings[color] + self.attr_embeddings[obj] + self.attr_embeddings[context]
        return v / _np.sqrt(3)

    def captions(self, triple):
        color, obj, context = triple
        return [t.format(color=color, object=obj, context=context) for t in TEMPLATES]

    def trial(self, subject, triple, stim_id, repetition):
        """One noisy voxel vector x = A_s v + noise, seeded by (world seed, subject, stimulus, repetition)."""
        signal = self.subject_mixers[subject] @ self.image_features(triple)
        if self.obs_noise_std == 0:
            return signal
        rng = _np.random.default_rng(_utils.derive_seed(self.seed, 'trial', subject, stim_id, repetition))
        return signal + rng.normal(0, self.obs_noise_std, size=signal.shape)

    def _silhouette(self, obj):
        rng = _np.random.default_rng(_utils.derive_seed(self.seed, 'silhouette', obj))
        size = self.image_size
        grid_y, grid_x = _np.mgrid[0:size, 0:size].astype('float64')
        field = _np.zeros((size, size))
        for _ in range(3):
            cy, cx = rng.uniform(size * 0.3, size * 0.7, size=2)
            sigma = rng.uniform(size * 0.08, size * 0.18)
            field += _np.exp(-((grid_y - cy) ** 2 + (grid_x - cx) ** 2) / (2 * sigma ** 2))
        return field > 0.5 * field.max()

    def render(self, triple):
        """Renders a (size, size, 3) float image in [0, 1]: context background, colored object silhouette."""
        color, obj, context = triple
        image = _np.empty((self.image_size, self.image_size, 3), dtype='float32')
        image[:] = CONTEXTS[context]
        image[self._silhouettes[obj]] = COLORS[color]
        return image

    def __str__(self):
        return f'''Synthetic world:
    Colors   : {len(self.color_vocab)}
    Objects  : {len(self.object_vocab)}
    Contexts : {len(self.context_vocab)}
    Features : {self.attr_embed_dim}
    Subjects : {self.subjects}
    Noise std: {self.obs_noise_std}
    '''
