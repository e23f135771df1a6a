import csv as _csv
import logging
import os

import matplotlib.pyplot as plt

from ..blm import load_blm
from ..metrics import TEXT_METRICS

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = '1'
CSV_FIELDS = ('schema_version', 'coeff', 'metric', 'value')


def noise_sweep(pipeline, coeffs=None, subject=None):
    """Caption metrics of test recordings corrupted with Gaussian noise of increasing strength.

    For each coefficient c, noise of std c times each raw recording base std is added before
    standardization; a clean coefficient 0 row precedes them and equals the clean evaluation.

    Args:
        pipeline (Pipeline): pipeline whose BLM stage has completed.
        coeffs (list of float, default=None): noise coefficients, `harness.noise_coeffs` by default.
        subject (str, default=None): subject, the first configured one by default.

    Returns:
        (list of dict) CSV rows, also written to `outputs/noise_sweep_{subject}.csv` with a line plot.

    Raises:
        StageError: if the BLM checkpoint is missing.

    """
    config = pipeline.config
    coeffs = config.harness.noise_coeffs if coeffs is None else coeffs
    subject = subject or config.subjects[0]
    pipeline.require('blm', 'noise-sweep')
    blm, statistics = load_blm(pipeline.workspace.load_checkpoint(f'blm_{subject}', 'blm', 'noise-sweep'))
    rows = []
    for coeff in [0.] + [float(c) for c in coeffs if c != 0]:
        captions = pipeline.caption(blm, statistics, subject, coeff=coeff, noise_seed=pipeline.seed('noise', subject, coeff))
        report = pipeline.evaluate(captions, f'noise_{coeff}', subject=subject, coeff=coeff)
        rows.extend({'schema_version': CSV_SCHEMA_VERSION, 'coeff': coeff, 'metric': m, 'value': report[m]} for m in TEXT_METRICS)
        logger.info(f'Noise coefficient {coeff}: CIDEr {report["cider"]:.4f}, METEOR {report["meteor"]:.4f}.')
    rel = os.path.join('outputs', f'noise_sweep_{subject}.csv')
    write_sweep_csv(pipeline.workspace.path(rel), rows)
    if config.harness.plots:
        plot_sweep(rows, pipeline.workspace.path(os.path.join('outputs', f'noise_sweep_{subject}.png')))
    return rows


def write_sweep_csv(path, rows):
    with open(path, 'w', newline='') as fid:
        writer = _csv.DictWriter(fid, fieldnames=CSV_FIELDS, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, 'value': repr(float(row['value']))})


def read_sweep_csv(path):
    with open(path, newline='') as fid:
        rows = list(_csv.DictReader(fid))
    for row in rows:
        if row['schema_version'] != CSV_SCHEMA_VERSION:
            raise ValueError(f'Unsupported noise sweep schema version {row["schema_version"]}.')
        row['coeff'] = float(row['coeff'])
        row['value'] = float(row['value'])
    return rows


def plot_sweep(rows, path):
    figure, axis = plt.subplots(figsize=(6, 4))
    for metric in TEXT_METRICS:
        points = [(r['coeff'], r['value']) for r in rows if r['metric'] == metric]
        axis.plot([p[0] for p in points], [p[1] for p in points], marker='o', label=metric)
    axis.set_xlabel('noise coefficient')
    axis.set_ylabel('score')
    axis.legend(fontsize='small')
    figure.tight_layout()
    figure.savefig(path)
    plt.close(figure)
