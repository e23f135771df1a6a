from ..context import mindcap
from mindcap import harness
import importlib
report_module = importlib.import_module("mindcap.harness.report")
import json
import os
import pytest


@pytest.fixture
def record():
    metadata = {'split': 'test', 'seed': 0, 'config_hash': 'h' * 64, 'count': 16}
    return harness.RunRecord('h' * 64, 0, digests={'data/manifest.yaml': 'd' * 64}, reports={
        'subj01': mindcap.MetricReport({'cider': 0.5, 'meteor': 0.25}, metadata),
        'imgcap': mindcap.MetricReport({'cider': 1.25, 'meteor': 0.5}, metadata),
    })


def test_render_table_has_one_row_per_report(record):
    table = harness.render_table(record.reports)
    lines = table.splitlines()
    assert len(lines) == 3
    assert lines[0].split() == ['name', 'meteor', 'cider']
    assert lines[1].split()[0] == 'subj01'
    assert '0.2500' in lines[1]


def test_render_record_has_one_row_per_metric(record):
    lines = harness.render_record(record).splitlines()
    assert lines[0].startswith('run hhhh')
    assert lines[1].split() == ['metric', 'imgcap', 'subj01']
    assert lines[2].split() == ['meteor', '0.5000', '0.2500']


def test_report_writes_schema_valid_json_and_text(record, tmp_path):
    out = str(tmp_path / 'report')
    paths = harness.report([record], out, plots=False)
    assert set(paths) == {'text', 'json'}
    with open(paths['json']) as fid:
        values = json.load(fid)
    assert harness.validate(values, harness.load_schema())
    assert values['runs'][0]['reports']['subj01']['metrics']['cider'] == 0.5
    with open(paths['text']) as fid:
        assert 'cider' in fid.read()


def test_report_writes_plots(record, tmp_path):
    paths = harness.report([record], str(tmp_path), plots=True)
    assert os.path.exists(paths['plot_0'])


def test_report_raises_exception_without_records(tmp_path):
    with pytest.raises(harness.ReportError):
        harness.report([], str(tmp_path))


def test_validate_raises_exception_naming_the_invalid_location(record):
    schema = harness.load_schema()
    values = report_module.report_dict([record])
    values['runs'][0]['seed'] = 'zero'
    with pytest.raises(harness.ReportError, match=r'\$\.runs\[0\]\.seed'):
        harness.validate(values, schema)
    values = report_module.report_dict([record])
    values['runs'][0]['reports']['subj01']['metrics']['cider'] = True
    with pytest.raises(harness.ReportError):
        harness.validate(values, schema)
    values = report_module.report_dict([record])
    values['extra'] = 1
    with pytest.raises(harness.ReportError, match='unexpected'):
        harness.validate(values, schema)
    values = report_module.report_dict([record])
    values['schema_version'] = '2'
    with pytest.raises(harness.ReportError):
        harness.validate(values, schema)
