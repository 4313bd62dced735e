# pylint: disable=too-many-instance-attributes
import json
import logging
from dataclasses import fields
from typing import Optional

from loganvil.analyze import AnalysisConfig
from loganvil.backend.base import BackendConfig
from loganvil.correlate import CorrelationConfig
from loganvil.errors import ConfigError
from loganvil.forge import ForgeConfig
from loganvil.ingest import LogFormat

logger = logging.getLogger('loganvil')

SECTIONS = ('ingest', 'correlation', 'rules_path', 'analysis', 'backend', 'forge', 'outputs')
OUTPUT_KEYS = ('report', 'dataset', 'training_config', 'evaluation')


def _dataclass_from(section: str, cls, values: dict):
    if not isinstance(values, dict):
        raise ConfigError(f'{section} needs to be a JSON object')
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f'unknown {section} keys: {", ".join(sorted(unknown))}')
    try:
        return cls(**values)
    except (TypeError, ValueError) as error:
        raise ConfigError(f'invalid {section}: {error}') from error


class PipelineConfig:
    """ Pipeline run configuration object """

    def __init__(self):
        self._log_format = LogFormat.AUTO
        self._cap = 2857  # pragma: no mutate
        self._correlation = CorrelationConfig()
        self._rules_path: Optional[str] = None
        self._analysis = AnalysisConfig()
        self._forge = ForgeConfig()
        self._backend_config: Optional[BackendConfig] = None
        self._mock_fixture: Optional[str] = None
        self.outputs = {}

    @property
    def log_format(self) -> LogFormat:
        return self._log_format

    @log_format.setter
    def log_format(self, value: LogFormat):
        """ Set ingestion format """
        if not isinstance(value, LogFormat):
            raise AttributeError("log_format needs to be LogFormat")
        self._log_format = value

    @property
    def cap(self) -> int:
        return self._cap

    @cap.setter
    def cap(self, value: int):
        """ Set per-machine split cap """
        if not isinstance(value, int) or value < 1:
            raise AttributeError("cap needs to be a positive integer")
        self._cap = value

    @property
    def correlation(self) -> CorrelationConfig:
        return self._correlation

    @correlation.setter
    def correlation(self, value: CorrelationConfig):
        if not isinstance(value, CorrelationConfig):
            raise AttributeError("correlation needs to be CorrelationConfig")
        self._correlation = value

    @property
    def rules_path(self) -> Optional[str]:
        return self._rules_path

    @rules_path.setter
    def rules_path(self, value: Optional[str]):
        if value is not None and not isinstance(value, str):
            raise AttributeError("rules_path needs to be a path string")
        self._rules_path = value

    @property
    def analysis(self) -> AnalysisConfig:
        return self._analysis

    @analysis.setter
    def analysis(self, value: AnalysisConfig):
        if not isinstance(value, AnalysisConfig):
            raise AttributeError("analysis needs to be AnalysisConfig")
        self._analysis = value

    @property
    def forge(self) -> ForgeConfig:
        return self._forge

    @forge.setter
    def forge(self, value: ForgeConfig):
        if not isinstance(value, ForgeConfig):
            raise AttributeError("forge needs to be ForgeConfig")
        self._forge = value

    @property
    def backend_config(self) -> Optional[BackendConfig]:
        return self._backend_config

    @backend_config.setter
    def backend_config(self, value: BackendConfig):
        """ Use an http backend, replacing any mock fixture """
        if not isinstance(value, BackendConfig):
            raise AttributeError("backend_config needs to be BackendConfig")
        self._backend_config = value
        self._mock_fixture = None

    @property
    def mock_fixture(self) -> Optional[str]:
        return self._mock_fixture

    @mock_fixture.setter
    def mock_fixture(self, value: str):
        """ Use the mock backend, replacing any http backend """
        if not isinstance(value, str):
            raise AttributeError("mock_fixture needs to be a path string")
        self._mock_fixture = value
        self._backend_config = None

    @property
    def has_backend(self) -> bool:
        return self._mock_fixture is not None or self._backend_config is not None

    @classmethod
    def from_dict(cls, values: dict) -> 'PipelineConfig':
        if not isinstance(values, dict):
            raise ConfigError('configuration needs to be a JSON object')
        unknown = set(values) - set(SECTIONS)
        if unknown:
            raise ConfigError(f'unknown configuration sections: {", ".join(sorted(unknown))}')
        config = cls()
        ingest = values.get('ingest', {})
        if not isinstance(ingest, dict):
            raise ConfigError('ingest needs to be a JSON object')
        try:
            if 'format' in ingest:
                config.log_format = LogFormat(ingest['format'])
            if 'cap' in ingest:
                config.cap = ingest['cap']
        except (ValueError, AttributeError) as error:
            raise ConfigError(f'invalid ingest: {error}') from error
        if 'correlation' in values:
            config.correlation = _dataclass_from('correlation', CorrelationConfig, values['correlation'])
        if 'rules_path' in values:
            if not isinstance(values['rules_path'], str):
                raise ConfigError('rules_path needs to be a path')
            config.rules_path = values['rules_path']
        if 'analysis' in values:
            config.analysis = _dataclass_from('analysis', AnalysisConfig, values['analysis'])
        if 'forge' in values:
            forge_values = values['forge']
            if isinstance(forge_values, dict) and 'example_logs' in forge_values:
                raise ConfigError('forge example logs are given with --examples, not in the configuration')
            config.forge = _dataclass_from('forge', ForgeConfig, forge_values)
        config._load_backend(values.get('backend'))
        outputs = values.get('outputs', {})
        if not isinstance(outputs, dict) or set(outputs) - set(OUTPUT_KEYS):
            raise ConfigError(f'outputs accepts only {", ".join(OUTPUT_KEYS)}')
        config.outputs = dict(outputs)
        return config

    def _load_backend(self, backend: Optional[dict]):
        if backend is None:
            return
        if not isinstance(backend, dict) or set(backend) - {'mock_fixture', 'http'}:
            raise ConfigError('backend accepts mock_fixture or http')
        if 'mock_fixture' in backend and 'http' in backend:
            raise ConfigError('configure exactly one backend, mock_fixture or http')
        if 'mock_fixture' in backend:
            if not isinstance(backend['mock_fixture'], str):
                raise ConfigError('backend.mock_fixture needs to be a path')
            self.mock_fixture = backend['mock_fixture']
        elif 'http' in backend:
            self.backend_config = _dataclass_from('backend.http', BackendConfig, backend['http'])

    @classmethod
    def from_file(cls, path: str) -> 'PipelineConfig':
        with open(path, encoding='utf-8') as file:
            try:
                values = json.load(file)
            except json.JSONDecodeError as error:
                raise ConfigError(f'{path} is not valid JSON: {error}') from error
        logger.debug(f'Loaded configuration from {path}')
        return cls.from_dict(values)
