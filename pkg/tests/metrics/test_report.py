from ..context import mindcap
from mindcap import metrics
import json
import pytest


@pytest.fixture
def metadata():
    return {'split': 'test', 'seed': 0, 'config_hash': 'abc', 'count': 3}


def test_metric_report_serializes_to_sorted_json(metadata):
    report = mindcap.MetricReport({'rouge_l': 0.5, 'cider': 1}, metadata)
    text = report.to_json()
    assert text.endswith('\n')
    assert json.loads(text) == {'schema_version': '1', 'metrics': {'cider': 1., 'rouge_l': 0.5}, 'metadata': metadata}
    assert text.index('"metadata"') < text.index('"metrics"')
    assert mindcap.MetricReport.from_json(text).to_json() == text
    assert report['cider'] == 1.


def test_metric_report_save_and_load(metadata, tmp_path):
    report = mindcap.MetricReport({'ssim': 0.25}, metadata)
    path = str(tmp_path / 'report.json')
    report.save(path)
    loaded = mindcap.MetricReport.load(path)
    assert loaded.metrics == report.metrics
    assert loaded.metadata == report.metadata
    assert 'ssim' in str(loaded)


def test_metric_report_raises_exception_on_missing_declared_metric(metadata):
    with pytest.raises(mindcap.MetricError):
        mindcap.MetricReport({'rouge_l': 0.5}, metadata, declared=metrics.TEXT_METRICS)


def test_metric_report_raises_exception_on_non_finite_value(metadata):
    with pytest.raises(mindcap.MetricError):
        mindcap.MetricReport({'rouge_l': float('nan')}, metadata)


def test_metric_report_raises_exception_on_missing_metadata(metadata):
    del metadata['config_hash']
    with pytest.raises(mindcap.MetricError):
        mindcap.MetricReport({'rouge_l': 0.5}, metadata)


def test_metric_report_raises_exception_on_unsupported_schema_version(metadata):
    with pytest.raises(mindcap.MetricError):
        mindcap.MetricReport.from_dict({'schema_version': '0', 'metrics': {}, 'metadata': metadata})
