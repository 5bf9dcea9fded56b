import math

import pandas as pd
import pytest
from click.testing import CliRunner

from app import cli
from models import ComparisonReport


@pytest.fixture
def runner():
    return CliRunner()


def read_output(result):
    from io import StringIO
    return pd.read_csv(StringIO(result.stdout))


def test_scale_command(runner):
    result = runner.invoke(cli, ['scale', '--b', '2', '--lifespan', 'exp:1', '--t', '1,2'])
    assert result.exit_code == 0, result.output
    frame = read_output(result)
    assert list(frame.columns) == ['t', 'W', 'W_theta', 'survival', 'extinction', 'expected_population']
    assert frame.loc[1, 'W'] == pytest.approx(13.778112, abs=1e-4)


def test_scale_writes_file(runner, tmp_path):
    out = tmp_path / 'scale.csv'
    result = runner.invoke(cli, ['scale', '--b', '1', '--lifespan', 'immortal', '--t', '1', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert pd.read_csv(out).loc[0, 'survival'] == pytest.approx(1.0)


def test_scale_grid_table(runner):
    result = runner.invoke(cli, ['scale', '--b', '2', '--lifespan', 'exp:1', '--step', '0.1', '--horizon', '1'])
    assert result.exit_code == 0, result.output
    frame = read_output(result)
    assert len(frame) == 11
    assert frame['t'].tolist() == pytest.approx([0.1 * i for i in range(11)])
    assert frame.loc[0, 'W'] == 1.0
    assert frame.loc[10, 'W'] == pytest.approx(2.0 * math.e - 1.0, rel=1e-2)
    assert frame['W'].is_monotonic_increasing

    result = runner.invoke(cli, ['scale', '--b', '2', '--lifespan', 'exp:1', '--step', '0.1',
                                 '--horizon', '1', '--stride', '5'])
    assert read_output(result)['t'].tolist() == pytest.approx([0.0, 0.5, 1.0])


def test_missing_parameters_exit_with_one(runner):
    result = runner.invoke(cli, ['scale', '--lifespan', 'exp:1'])
    assert result.exit_code == 1
    assert 'error: b:' in result.output


def test_bad_lifespan(runner):
    result = runner.invoke(cli, ['simulate', '--b', '1', '--lifespan', 'weibull:2'])
    assert result.exit_code == 1
    assert 'lifespan' in result.output


def test_unknown_command_is_a_usage_error(runner):
    result = runner.invoke(cli, ['frobnicate'])
    assert result.exit_code == 1


def test_simulate_command(runner):
    result = runner.invoke(cli, ['simulate', '--b', '2', '--theta', '0.5', '--lifespan', 'exp:1',
                                 '--t', '1', '--reps', '20'])
    assert result.exit_code == 0, result.output
    frame = read_output(result)
    assert list(frame.columns) == ['replica', 't', 'N', 'Z0', 'families', 'spectrum']
    assert frame['replica'].tolist() == list(range(20))
    assert (frame['N'] >= frame['Z0']).all()


def test_forward_command(runner):
    result = runner.invoke(cli, ['forward', '--b', '2', '--theta', '0.5', '--lifespan', 'exp:1',
                                 '--t', '1', '--reps', '10'])
    assert result.exit_code == 0, result.output
    frame = read_output(result)
    assert len(frame) == 10
    assert not frame['overflow'].any()


def test_moments_command(runner):
    result = runner.invoke(cli, ['moments', '--b', '2', '--theta', '0.5', '--lifespan', 'exp:1',
                                 '--t', '2', '--kmax', '3'])
    assert result.exit_code == 0, result.output
    frame = read_output(result)
    clonal = frame[(frame['quantity'] == 'P(Z0=k)') & (frame['k'] == 0)]
    assert clonal['value'].iloc[0] == pytest.approx(0.356178, abs=1e-4)


def test_validate_dry_run(runner):
    result = runner.invoke(cli, ['validate', '--b', '2', '--theta', '0.5', '--lifespan', 'exp:1',
                                 '--t', '1', '--reps', '0', '--checks', 'population,means', '--kmax', '2'])
    assert result.exit_code == 0, result.output
    frame = read_output(result)
    assert frame['check'].tolist() == ['population', 'means', 'means']


def test_validate_failure_exits_with_two(runner, monkeypatch):
    failing = [ComparisonReport(check='means', quantity='E[A(1)]', t=1.0, passed=False)]
    monkeypatch.setattr('commands.validate.run_validation', lambda config: failing)
    result = runner.invoke(cli, ['validate', '--b', '2', '--lifespan', 'exp:1', '--reps', '0'])
    assert result.exit_code == 2
    assert 'FAILED means:E[A(1)]' in result.output


def test_config_file_supplies_defaults(runner, tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('# birth-death tree\nb = 2\nlifespan=exp:1\n--t=1\n', encoding='utf-8')
    result = runner.invoke(cli, ['--config', str(path), 'scale'])
    assert result.exit_code == 0, result.output
    assert read_output(result).loc[0, 't'] == 1.0

    result = runner.invoke(cli, ['--config', str(path), 'scale', '--t', '2'])
    assert read_output(result).loc[0, 't'] == 2.0


def test_malformed_config_file(runner, tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('b 2\n', encoding='utf-8')
    result = runner.invoke(cli, ['--config', str(path), 'scale'])
    assert result.exit_code == 1
