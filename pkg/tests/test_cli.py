import json

import pytest
from click.testing import CliRunner

from app import cli
from controllers.session_harness import STRIDES_FILE, SUMMARY_FILE, SWEEP_INDEX_FILE
from models.run_config import RunConfig


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.json'
    RunConfig.from_dict({'protocol': {'sessions': [
        {'name': 'BSLN', 'mode': 'transparent', 'strides': 20},
        {'name': 'T-1', 'mode': 'aan', 'strides': 20},
        {'name': 'T-2', 'mode': 'aan', 'strides': 20},
        {'name': 'PT-1', 'mode': 'transparent', 'strides': 10},
    ]}}).save(str(path))
    return str(path)


def test_validate_default(runner):
    result = runner.invoke(cli, ['--quiet', 'validate'])
    assert result.exit_code == 0
    assert 'default_run.json: OK' in result.output
    assert '2435 strides, about 44.6 min of walking, 2000 of them assisted' in result.output


def test_quiet_after_command(runner, small_config, tmp_path):
    result = runner.invoke(cli, ['validate', '--quiet', '--config', small_config])
    assert result.exit_code == 0
    assert 'small.json: OK' in result.output

    result = runner.invoke(cli, ['run', '--config', small_config, '--out', str(tmp_path / 'run'), '--quiet'])
    assert result.exit_code == 0, result.output
    assert '70 strides written' in result.output


def test_validate_reports_every_problem(runner, tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'pi2': {'K': 0}, 'subject': {'Q': 4}, 'shoe_size': 43}))
    result = runner.invoke(cli, ['--quiet', 'validate', '--config', str(path)])
    assert result.exit_code == 1
    assert 'pi2' in result.output
    assert 'subject.Q' in result.output
    assert 'shoe_size' in result.output


def test_malformed_config_exits_one(runner, tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('[1, 2')
    result = runner.invoke(cli, ['--quiet', 'validate', '--config', str(path)])
    assert result.exit_code == 1
    assert 'malformed JSON' in result.output


@pytest.mark.parametrize('args', [
    ['simulate'],
    ['run', '--speed', '3'],
    ['run', '--seed', '-1'],
    ['run', '--seed', str(2 ** 64)],
    ['validate', '--config', 'no/such/file.json'],
    ['metrics'],
])
def test_usage_errors_exit_two(runner, args):
    assert runner.invoke(cli, ['--quiet'] + args).exit_code == 2


def test_run_replays_with_seed(runner, small_config, tmp_path):
    outputs = []
    for name in ('a', 'b'):
        out = tmp_path / name
        result = runner.invoke(cli, ['--quiet', 'run', '--config', small_config, '--seed', '7', '--out', str(out)])
        assert result.exit_code == 0, result.output
        assert '70 strides written' in result.output
        outputs.append(out)
    for name in (STRIDES_FILE, SUMMARY_FILE):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
    assert json.loads((outputs[0] / SUMMARY_FILE).read_text())['seed'] == 7


def test_run_rejects_invalid_config(runner, tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'protocol': {'sessions': [{'name': 'T-1', 'mode': 'aan', 'strides': 5}]}}))
    result = runner.invoke(cli, ['--quiet', 'run', '--config', str(path), '--out', str(tmp_path / 'run')])
    assert result.exit_code == 1
    assert 'must be transparent' in result.output
    assert not (tmp_path / 'run').exists()


def test_metrics_prints_stored_summary(runner, small_config, tmp_path):
    out = tmp_path / 'run'
    assert runner.invoke(cli, ['--quiet', 'run', '--config', small_config, '--out', str(out)]).exit_code == 0
    result = runner.invoke(cli, ['--quiet', 'metrics', '--out', str(out)])
    assert result.exit_code == 0
    assert result.stdout == (out / SUMMARY_FILE).read_text()


def test_metrics_on_empty_directory(runner, tmp_path):
    result = runner.invoke(cli, ['--quiet', 'metrics', '--out', str(tmp_path)])
    assert result.exit_code == 1


def test_sweep(runner, small_config, tmp_path):
    out = tmp_path / 'sweep'
    result = runner.invoke(cli, ['--quiet', 'sweep', '--config', small_config, '--out', str(out),
                                 '--set', 'subject.l_h=0,0.1', '--workers', '2'])
    assert result.exit_code == 0, result.output
    assert '2 cells written' in result.output
    assert (out / SWEEP_INDEX_FILE).is_file()
    assert (out / 'cell_001' / SUMMARY_FILE).is_file()


def test_sweep_bad_setting(runner, small_config, tmp_path):
    result = runner.invoke(cli, ['--quiet', 'sweep', '--config', small_config, '--out', str(tmp_path),
                                 '--set', 'subject.l_h'])
    assert result.exit_code == 2
