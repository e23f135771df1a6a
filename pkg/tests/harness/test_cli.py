from ..context import mindcap  # noqa: F401
from mindcap.harness import cli
import os
import pytest


@pytest.fixture
def config_file(tiny_config, tmp_path):
    path = tmp_path / 'tiny.yaml'
    path.write_text(tiny_config.dump())
    return str(path)


def test_parser_knows_every_verb():
    parser = cli.build_parser()
    for verb in list(cli.STAGE_VERBS) + ['noise-sweep', 'ablate']:
        assert parser.parse_args([verb]).verb == verb
    args = parser.parse_args(['report', 'runs/a', 'runs/b', '--no-plots'])
    assert args.runs == ['runs/a', 'runs/b']


def test_parser_rejects_unknown_verb():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(['train-everything'])


def test_verb_options_become_config_overrides():
    args = cli.build_parser().parse_args(['recon', '--strength', '0', '--steps', '20', '--set', 'seed=1'])
    assert cli._overrides(args) == ['seed=1', 'recon.strength=0.0', 'recon.steps=20']
    args = cli.build_parser().parse_args(['caption', '--strategy', 'beam', '--beam-width', '3'])
    assert cli._overrides(args) == ['blm.decode_strategy=beam', 'blm.beam_width=3']


def test_make_synth_verb_returns_zero(config_file, tmp_path):
    out = str(tmp_path / 'run')
    assert cli.main(['make-synth', '--config', config_file, '--out', out, '-q']) == 0
    assert os.path.exists(os.path.join(out, 'data', 'manifest.yaml'))
    assert os.path.exists(os.path.join(out, 'stages', 'synth.done'))


def test_invalid_configuration_returns_two(config_file, tmp_path):
    out = str(tmp_path / 'run')
    assert cli.main(['make-synth', '--config', config_file, '--out', out, '--set', 'bed.mask_ratio=2', '-q']) == 2
    assert cli.main(['make-synth', '--config', str(tmp_path / 'missing.yaml'), '--out', out, '-q']) == 2
    assert cli.main(['recon', '--config', config_file, '--out', out, '--set', 'recon.enabled=false', '-q']) == 2


def test_runtime_failure_returns_one(config_file, tmp_path):
    assert cli.main(['report', str(tmp_path / 'no-run'), '--out', str(tmp_path / 'out'), '-q']) == 1
