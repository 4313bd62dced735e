import json
import logging
from typing import Dict, Optional

from loganvil.backend.base import ChatRequest, ChatResponse, LogAnvilBackend
from loganvil.core import NO_PROBLEM_OUTPUT
from loganvil.errors import FormatError

logger = logging.getLogger('loganvil')


class MockBackend(LogAnvilBackend):
    """ Deterministic backend answering from a substring -> response fixture map """

    def __init__(self, fixture: Optional[Dict[str, str]] = None, default: str = NO_PROBLEM_OUTPUT,
                 max_in_flight: int = 4):
        super().__init__(max_in_flight)
        self.fixture = dict(fixture or {})
        self.default = default
        # lexicographic order decides between several matching keys
        self._keys = sorted(self.fixture)

    def complete(self, request: ChatRequest) -> ChatResponse:
        # pure lookup, nothing to throttle
        return self._complete(request)

    def _complete(self, request: ChatRequest) -> ChatResponse:
        text = self.default
        for key in self._keys:
            if key in request.user_content:
                text = self.fixture[key]
                break
        return ChatResponse(text=text,
                            prompt_tokens=len(request.system_prompt.split()) + len(request.user_content.split()),
                            completion_tokens=len(text.split()),
                            latency_ms=0)


def mock_from_fixture(path: str, default: str = NO_PROBLEM_OUTPUT, max_in_flight: int = 4) -> MockBackend:
    """ Load a JSON object mapping match substrings to response texts """
    with open(path, encoding='utf-8') as file:
        try:
            fixture = json.load(file)
        except json.JSONDecodeError as error:
            raise FormatError(f'{path} is not valid JSON: {error}') from error
    if not isinstance(fixture, dict) or not all(isinstance(v, str) for v in fixture.values()):
        raise FormatError(f'{path} needs to hold a JSON object of strings')
    logger.debug(f'Loaded mock fixture {path} with {len(fixture)} keys')
    return MockBackend(fixture, default=default, max_in_flight=max_in_flight)
