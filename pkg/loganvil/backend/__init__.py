from .base import BackendConfig, ChatRequest, ChatResponse, LogAnvilBackend
from .http import HttpBackend
from .mock import MockBackend, mock_from_fixture
