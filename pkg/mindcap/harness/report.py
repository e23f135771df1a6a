"""Fixed-schema text tables, JSON report and plots of run records."""
import json as _json
import logging
import os

import matplotlib.pyplot as plt

from ..metrics import IMAGE_METRICS, TEXT_METRICS

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = '1'
SCHEMA_PATH = os.path.join(os.path.dirname(__file__), 'report.schema.json')
_TYPES = {
    'object': dict, 'array': list, 'string': str, 'number': (int, float), 'integer': int, 'boolean': bool,
}


class ReportError(Exception):
    pass


def load_schema(path=SCHEMA_PATH):
    with open(path) as fid:
        return _json.load(fid)


def validate(value, schema, where='$'):
    """Structural validation of a JSON value.

    Supports `type`, `enum`, `required`, `properties`, `additionalProperties` (false only),
    `values` (schema of every value of an object) and `items`.

    Raises:
        ReportError: naming the first invalid location.

    """
    expected = schema.get('type')
    if expected is not None:
        if not isinstance(value, _TYPES[expected]) or (expected in ('number', 'integer') and isinstance(value, bool)):
            raise ReportError(f'{where}: expected {expected}, got {type(value).__name__}.')
    if 'enum' in schema and value not in schema['enum']:
        raise ReportError(f'{where}: {value!r} not in {schema["enum"]}.')
    if isinstance(value, dict):
        missing = [k for k in schema.get('required', ()) if k not in value]
        if missing:
            raise ReportError(f'{where}: missing keys {missing}.')
        properties = schema.get('properties', {})
        if schema.get('additionalProperties', True) is False:
            extra = sorted(set(value) - set(properties))
            if extra:
                raise ReportError(f'{where}: unexpected keys {extra}.')
        for key, item in value.items():
            if key in properties:
                validate(item, properties[key], f'{where}.{key}')
            elif 'values' in schema:
                validate(item, schema['values'], f'{where}.{key}')
    if isinstance(value, list) and 'items' in schema:
        for index, item in enumerate(value):
            validate(item, schema['items'], f'{where}[{index}]')
    return True


def _metric_names(reports):
    present = {m for r in reports.values() for m in r.metrics}
    ordered = [m for m in TEXT_METRICS + IMAGE_METRICS if m in present]
    return ordered + sorted(present - set(ordered))


def render_table(reports, metrics=None):
    """Fixed-width table, one row per report and one column per metric."""
    metrics = metrics or _metric_names(reports)
    width = max([len('name')] + [len(n) for n in reports])
    lines = [f'{"name":<{width}} ' + ' '.join(f'{m:>16}' for m in metrics)]
    for name, report in reports.items():
        lines.append(f'{name:<{width}} ' + ' '.join(
            f'{report.metrics[m]:>16.4f}' if m in report.metrics else f'{"-":>16}' for m in metrics
        ))
    return '\n'.join(lines) + '\n'


def render_record(record):
    """Fixed-width table of a run record, one row per metric and one column per report."""
    names = sorted(record.reports)
    metrics = _metric_names(record.reports)
    width = max([len('metric')] + [len(m) for m in metrics])
    lines = [f'run {record.config_hash[:16]} seed {record.seed}', f'{"metric":<{width}} ' + ' '.join(f'{n:>16}' for n in names)]
    for metric in metrics:
        lines.append(f'{metric:<{width}} ' + ' '.join(
            f'{record.reports[n].metrics[metric]:>16.4f}' if metric in record.reports[n].metrics else f'{"-":>16}'
            for n in names
        ))
    return '\n'.join(lines) + '\n'


def report_dict(records):
    return {
        'schema_version': REPORT_SCHEMA_VERSION,
        'runs': [{
            'config_hash': r.config_hash, 'seed': r.seed, 'digests': dict(sorted(r.digests.items())),
            'reports': {k: v.to_dict() for k, v in sorted(r.reports.items())},
        } for r in records],
    }


def plot_reports(reports, path):
    metrics = _metric_names(reports)
    figure, axes = plt.subplots(1, len(metrics), figsize=(2.2 * len(metrics), 3), squeeze=False)
    for axis, metric in zip(axes[0], metrics):
        names = [n for n, r in reports.items() if metric in r.metrics]
        axis.bar(range(len(names)), [reports[n].metrics[metric] for n in names])
        axis.set_xticks(range(len(names)))
        axis.set_xticklabels(names, rotation=60, fontsize='x-small')
        axis.set_title(metric, fontsize='small')
    figure.tight_layout()
    figure.savefig(path)
    plt.close(figure)


def report(records, out, plots=True):
    """Writes `report.txt`, `report.json` (schema validated) and per-record PNG plots in `out`.

    Args:
        records (list of RunRecord): at least one run record.
        out (str): output directory.
        plots (bool, default=True): also write plots.

    Returns:
        (dict) written file kind to path.

    """
    if not records:
        raise ReportError('report needs at least one run record.')
    os.makedirs(out, exist_ok=True)
    values = report_dict(records)
    validate(values, load_schema())
    paths = {'text': os.path.join(out, 'report.txt'), 'json': os.path.join(out, 'report.json')}
    with open(paths['text'], 'w') as fid:
        fid.write('\n'.join(render_record(r) for r in records))
    with open(paths['json'], 'w') as fid:
        fid.write(_json.dumps(values, sort_keys=True, indent=2) + '\n')
    if plots:
        for index, record in enumerate(records):
            if record.reports:
                paths[f'plot_{index}'] = os.path.join(out, f'report_{index}.png')
                plot_reports(record.reports, paths[f'plot_{index}'])
    logger.info(f'Report written to {out}.')
    return paths
