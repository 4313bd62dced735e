import json

import pytest

from loganvil.analyze import AnalysisConfig
from loganvil.backend import BackendConfig
from loganvil.config import PipelineConfig
from loganvil.correlate import CorrelationConfig
from loganvil.errors import ConfigError
from loganvil.ingest import LogFormat


def test_defaults():
    config = PipelineConfig()
    assert config.log_format is LogFormat.AUTO
    assert config.cap == 2857
    assert config.correlation == CorrelationConfig()
    assert config.analysis.chunk_size == 7
    assert config.forge.correlated_tail_groups == 4
    assert config.rules_path is None
    assert not config.has_backend
    assert config.outputs == {}


def test_from_dict():
    config = PipelineConfig.from_dict({
        'ingest': {'format': 'pipe', 'cap': 100},
        'correlation': {'window_seconds': 10, 'link_on_machine': False},
        'rules_path': 'rules.json',
        'analysis': {'chunk_size': 5},
        'forge': {'target_count': 20, 'correlated_tail_groups': 0},
        'backend': {'http': {'endpoint_url': 'https://llm.example.test/v1/chat/completions', 'model_id': 'm'}},
        'outputs': {'report': 'report.json'},
    })
    assert config.log_format is LogFormat.PIPE_STYLE
    assert config.cap == 100
    assert config.correlation == CorrelationConfig(window_seconds=10, link_on_machine=False)
    assert config.rules_path == 'rules.json'
    assert config.analysis == AnalysisConfig(chunk_size=5)
    assert config.forge.target_count == 20
    assert config.backend_config.model_id == 'm'
    assert config.mock_fixture is None
    assert config.outputs == {'report': 'report.json'}


@pytest.mark.parametrize('values', [
    [],
    {'analyse': {}},
    {'ingest': {'format': 'xml'}},
    {'ingest': {'cap': 0}},
    {'ingest': 'pipe'},
    {'correlation': {'window': 60}},
    {'correlation': {'window_seconds': 0}},
    {'analysis': {'chunk_size': 0}},
    {'forge': {'example_logs': []}},
    {'rules_path': 3},
    {'backend': {'mock_fixture': 'a.json', 'http': {}}},
    {'backend': {'grpc': {}}},
    {'backend': {'http': {'max_retries': -1}}},
    {'outputs': {'plots': 'x'}},
])
def test_invalid_configuration(values):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(values)


def test_from_file(tmp_path):
    path = tmp_path / 'loganvil.json'
    path.write_text(json.dumps({'backend': {'mock_fixture': 'fixture.json'}}), encoding='utf-8')
    config = PipelineConfig.from_file(str(path))
    assert config.mock_fixture == 'fixture.json'
    assert config.has_backend


def test_from_file_bad_json(tmp_path):
    path = tmp_path / 'loganvil.json'
    path.write_text('{"ingest": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(str(path))


def test_one_backend_at_a_time():
    config = PipelineConfig()
    config.mock_fixture = 'fixture.json'
    config.backend_config = BackendConfig(endpoint_url='http://localhost:8000/v1/chat/completions', model_id='m')
    assert config.mock_fixture is None
    config.mock_fixture = 'fixture.json'
    assert config.backend_config is None


def test_wrong_config_objects():
    config = PipelineConfig()
    with pytest.raises(AttributeError):
        config.log_format = 'csv'
    with pytest.raises(AttributeError):
        config.cap = -5
    with pytest.raises(AttributeError):
        config.correlation = AnalysisConfig()
    with pytest.raises(AttributeError):
        config.analysis = CorrelationConfig()
    with pytest.raises(AttributeError):
        config.forge = {}
    with pytest.raises(AttributeError):
        config.backend_config = 'http://localhost'
    with pytest.raises(AttributeError):
        config.mock_fixture = None
    with pytest.raises(AttributeError):
        config.rules_path = 7
