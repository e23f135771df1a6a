import json as _json
import math as _math

from ._base import MetricError

SCHEMA_VERSION = '1'
TEXT_METRICS = ('meteor', 'rouge_l', 'cider', 'embed_sim', 'object_acc', 'attribute_acc')
IMAGE_METRICS = ('pixcorr', 'ssim', 'twoway_low', 'twoway_high', 'feature_distance')


class MetricReport:
    """Named metric scores with their evaluation metadata.

    Args:
        metrics (dict): metric name to finite score.
        metadata (dict): at least `split`, `seed`, `config_hash` and `count` keys.
        declared (iterable of str, default=None): metric names that must be present.

    """

    REQUIRED_METADATA = ('split', 'seed', 'config_hash', 'count')

    def __init__(self, metrics, metadata, declared=None):
        self.metrics = {k: float(v) for k, v in metrics.items()}
        self.metadata = dict(metadata)
        missing = [m for m in (declared or ()) if m not in self.metrics]
        if missing:
            raise MetricError(f'Metric report misses declared metrics {missing}.')
        not_finite = [k for k, v in self.metrics.items() if not _math.isfinite(v)]
        if not_finite:
            raise MetricError(f'Metric report has non-finite values for {not_finite}.')
        missing = [k for k in self.REQUIRED_METADATA if k not in self.metadata]
        if missing:
            raise MetricError(f'Metric report misses metadata {missing}.')

    def __getitem__(self, name):
        return self.metrics[name]

    def to_dict(self):
        return {'schema_version': SCHEMA_VERSION, 'metrics': dict(self.metrics), 'metadata': dict(self.metadata)}

    def to_json(self):
        return _json.dumps(self.to_dict(), sort_keys=True, indent=2) + '\n'

    @classmethod
    def from_dict(cls, values):
        if values.get('schema_version') != SCHEMA_VERSION:
            raise MetricError(f'Unsupported metric report schema version {values.get("schema_version")}.')
        return cls(values['metrics'], values['metadata'])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(_json.loads(text))

    def save(self, path):
        with open(path, 'w') as fid:
            fid.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fid:
            return cls.from_json(fid.read())

    def __str__(self):
        lines = [f'    {name:<18}: {value:.4f}' for name, value in self.metrics.items()]
        return 'Metric report ({}, {} items):\n{}\n'.format(self.metadata['split'], self.metadata['count'], '\n'.join(lines))
