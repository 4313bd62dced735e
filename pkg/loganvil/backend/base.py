import threading
from abc import abstractmethod
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_content: str
    prior_response: Optional[str] = None
    max_new_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if not self.user_content:
            raise ValueError('user_content cannot be empty')
        if self.max_new_tokens < 1:
            raise ValueError('max_new_tokens needs to be positive')
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError('temperature needs to be within 0..2')


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0

    def __post_init__(self):
        if min(self.prompt_tokens, self.completion_tokens, self.latency_ms) < 0:
            raise ValueError('usage counts cannot be negative')


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = ''
    model_id: str = ''
    timeout_seconds: int = 120
    max_retries: int = 3
    max_in_flight: int = 4

    def __post_init__(self):
        if self.timeout_seconds < 1:
            raise ValueError('timeout_seconds needs to be positive')
        if self.max_retries < 0:
            raise ValueError('max_retries cannot be negative')
        if self.max_in_flight < 1:
            raise ValueError('max_in_flight needs to be at least 1')


class LogAnvilBackend:
    """
    Inference backend contract. Instances are shared between threads and
    allow at most max_in_flight concurrent complete() calls
    """

    def __init__(self, max_in_flight: int = 4):
        if max_in_flight < 1:
            raise ValueError('max_in_flight needs to be at least 1')
        self.max_in_flight = max_in_flight
        self._in_flight = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: ChatRequest) -> ChatResponse:
        """
        Send one request to the model
        :param request: prompt and generation settings
        :return: model text with usage metadata
        """
        with self._in_flight:
            return self._complete(request)

    @abstractmethod
    def _complete(self, request: ChatRequest) -> ChatResponse:
        raise Exception("This is just abstract class, not implementation")
