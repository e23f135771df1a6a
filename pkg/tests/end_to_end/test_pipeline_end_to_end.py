from ..context import mindcap
from mindcap import harness
from mindcap.harness import cli
import json
import numpy as np
import os
import shutil
import pytest


@pytest.fixture(scope='module')
def run_dir(tmp_path_factory, session_config):
    root = str(tmp_path_factory.mktemp('e2e') / 'run')
    harness.run_pipeline(session_config, root)
    return root


@pytest.fixture(scope='module')
def record(run_dir):
    return harness.RunRecord.load(os.path.join(run_dir, harness.RECORD_FILE))


@pytest.mark.end_to_end
def test_pipeline_executes_every_stage(record):
    assert record.executed == list(harness.STAGES)
    assert set(record.reports) == {'subj01', 'imgcap', 'recon_subj01'}
    assert set(record.reports['subj01'].metrics) == set(mindcap.metrics.TEXT_METRICS)
    assert set(record.reports['recon_subj01'].metrics) == set(mindcap.metrics.IMAGE_METRICS)
    assert 'checkpoints/blm_subj01.ckpt' in record.digests


@pytest.mark.end_to_end
def test_pipeline_writes_captions_and_reconstructions(run_dir, session_config):
    captions = [json.loads(line) for line in open(os.path.join(run_dir, 'outputs', 'captions_subj01.jsonl'))]
    assert len(captions) == session_config.data.n_test
    assert captions[0]['strategy'] == 'greedy'
    sidecars = sorted(f for f in os.listdir(os.path.join(run_dir, 'outputs', 'recon_subj01')) if f.endswith('.json'))
    assert len(sidecars) == session_config.data.n_test
    with open(os.path.join(run_dir, 'outputs', 'recon_subj01', sidecars[0])) as fid:
        sidecar = json.load(fid)
    assert sidecar['start_step'] == 8
    assert sidecar['reverse_steps'] == 8
    assert os.path.exists(os.path.join(run_dir, 'outputs', 'recon_subj01', sidecar['stimulus_id'] + '.png'))
    assert {'pixcorr', 'ssim', 'sketch_pixcorr', 'sketch_ssim'} <= set(sidecar)
    assert -1 <= sidecar['pixcorr'] <= 1
    assert -1 <= sidecar['sketch_ssim'] <= 1


@pytest.mark.end_to_end
def test_reconstruction_sidecar_scores_average_to_the_report(run_dir, record):
    directory = os.path.join(run_dir, 'outputs', 'recon_subj01')
    sidecars = []
    for name in sorted(f for f in os.listdir(directory) if f.endswith('.json')):
        with open(os.path.join(directory, name)) as fid:
            sidecars.append(json.load(fid))
    report = record.reports['recon_subj01']
    assert np.mean([s['pixcorr'] for s in sidecars]) == pytest.approx(report['pixcorr'])
    assert np.mean([s['ssim'] for s in sidecars]) == pytest.approx(report['ssim'])


@pytest.mark.end_to_end
def test_pipeline_second_run_skips_every_stage(run_dir, session_config, record):
    again = harness.run_pipeline(session_config, run_dir)
    assert again.executed == []
    assert again.skipped == list(harness.STAGES)
    assert again.reports['subj01'].metrics == record.reports['subj01'].metrics


@pytest.mark.end_to_end
def test_pipeline_is_reproducible_in_a_fresh_run_directory(tmp_path, session_config, run_dir):
    root = str(tmp_path / 'other')
    harness.Pipeline(session_config, root).run(stages=list(harness.STAGES[:-2]))
    for name in ('captions_subj01.jsonl', 'captions_imgcap.jsonl'):
        with open(os.path.join(root, 'outputs', name)) as a, open(os.path.join(run_dir, 'outputs', name)) as b:
            assert [json.loads(line)['caption'] for line in a] == [json.loads(line)['caption'] for line in b]


@pytest.mark.end_to_end
def test_pipeline_raises_exception_on_tampered_checkpoint(tmp_path, session_config, run_dir):
    root = str(tmp_path / 'copy')
    shutil.copytree(run_dir, root)
    with open(os.path.join(root, 'checkpoints', 'bed.ckpt'), 'ab') as fid:
        fid.write(b'\0')
    with pytest.raises(harness.StageError, match='bed'):
        harness.run_pipeline(session_config, root)


@pytest.mark.end_to_end
def test_noise_sweep_rows(run_dir, session_config, record):
    pipeline = harness.Pipeline(session_config, run_dir)
    rows = harness.noise_sweep(pipeline)
    metrics = mindcap.metrics.TEXT_METRICS
    assert len(rows) == 11 * len(metrics)
    clean = {r['metric']: r['value'] for r in rows if r['coeff'] == 0.}
    assert clean == pytest.approx(record.reports['subj01'].metrics)
    path = os.path.join(run_dir, 'outputs', 'noise_sweep_subj01.csv')
    assert harness.read_sweep_csv(path) == [dict(r, coeff=float(r['coeff']), value=float(r['value'])) for r in rows]


@pytest.mark.end_to_end
def test_ablation_tables(run_dir, session_config):
    pipeline = harness.Pipeline(session_config, run_dir)
    tables = harness.ablate(pipeline, variants=['full', 'm1'])
    assert list(tables['captioning']) == ['full', 'm1']
    assert set(tables['captioning']['m1'].metrics) == set(mindcap.metrics.TEXT_METRICS)
    assert set(tables['reconstruction']) == set(harness.RECON_VARIANTS)
    table = harness.render_table(tables['captioning']).splitlines()
    assert len(table) == 3
    assert len(table[0].split()) == 1 + len(mindcap.metrics.TEXT_METRICS)
    assert os.path.exists(os.path.join(run_dir, 'outputs', 'ablation_subj01.json'))


@pytest.mark.end_to_end
def test_linear_prefix_ablation_decodes_one_caption_per_test_stimulus(run_dir, session_config):
    tables = harness.ablate(harness.Pipeline(session_config, run_dir), variants=['wo_be_btformer'])
    assert tables['captioning']['wo_be_btformer'].metadata['count'] == session_config.data.n_test


@pytest.mark.end_to_end
def test_report_of_a_run_validates_and_cli_report_returns_zero(run_dir, record, tmp_path):
    paths = harness.report([record], str(tmp_path / 'report'), plots=False)
    with open(paths['json']) as fid:
        assert harness.validate(json.load(fid), harness.load_schema())
    assert cli.main(['report', run_dir, '--out', str(tmp_path / 'cli'), '--no-plots', '-q']) == 0
    assert os.path.exists(str(tmp_path / 'cli' / 'report.txt'))
