import logging
import os
import time
from typing import Callable, Optional

import requests

from loganvil.backend.base import BackendConfig, ChatRequest, ChatResponse, LogAnvilBackend
from loganvil.errors import BackendTimeout, ProtocolError, TransportError

logger = logging.getLogger('loganvil')

API_KEY_VARIABLE = 'LOGANVIL_API_KEY'
BACKOFF_BASE_SECONDS = 1.0
BACKOFF_FACTOR = 2


def backoff_delay(retry: int) -> float:
    """ Delay before the given retry, counting from 0: 1 s, 2 s, 4 s, ... """
    return BACKOFF_BASE_SECONDS * BACKOFF_FACTOR ** retry


def _retryable_status(status_code: int) -> bool:
    return status_code == 429 or status_code >= 500


class HttpBackend(LogAnvilBackend):
    """ Generic chat-completion endpoint, OpenRouter style request and reply bodies """

    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None,
                 sleep: Callable[[float], None] = time.sleep):
        super().__init__(config.max_in_flight)
        if not config.endpoint_url or not config.model_id:
            raise ValueError('http backend needs endpoint_url and model_id')
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict:
        headers = {'Content-Type': 'application/json'}
        api_key = os.environ.get(API_KEY_VARIABLE)
        if api_key:
            headers['Authorization'] = f'Bearer {api_key}'
        return headers

    def payload(self, request: ChatRequest) -> dict:
        messages = [{'role': 'system', 'content': request.system_prompt}]
        if request.prior_response is not None:
            messages.append({'role': 'assistant', 'content': request.prior_response})
        messages.append({'role': 'user', 'content': request.user_content})
        return {
            'model': self.config.model_id,
            'messages': messages,
            'max_tokens': request.max_new_tokens,
            'temperature': request.temperature,
        }

    def _complete(self, request: ChatRequest) -> ChatResponse:
        payload = self.payload(request)
        last_error: Exception = TransportError('no attempt made')
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = backoff_delay(attempt - 1)
                logger.warning(f'Retrying {self.config.endpoint_url} in {delay:.0f}s after: {last_error}')
                self._sleep(delay)
            start = time.monotonic()
            try:
                reply = self.session.post(self.config.endpoint_url, json=payload, headers=self._headers(),
                                          timeout=self.config.timeout_seconds)
            except requests.Timeout as error:
                last_error = BackendTimeout(f'no reply within {self.config.timeout_seconds}s')
                last_error.__cause__ = error
                continue
            except requests.RequestException as error:
                last_error = TransportError(f'request failed: {error}')
                last_error.__cause__ = error
                continue
            if _retryable_status(reply.status_code):
                last_error = TransportError(f'endpoint answered HTTP {reply.status_code}')
                continue
            if reply.status_code >= 400:
                raise TransportError(f'endpoint answered HTTP {reply.status_code}')
            latency_ms = int((time.monotonic() - start) * 1000)
            return self._parse_reply(reply, latency_ms)
        raise last_error

    @staticmethod
    def _parse_reply(reply: requests.Response, latency_ms: int) -> ChatResponse:
        try:
            body = reply.json()
            text = body['choices'][0]['message']['content']
        except (ValueError, KeyError, IndexError, TypeError) as error:
            raise ProtocolError(f'malformed endpoint reply: {error}') from error
        if not isinstance(text, str):
            raise ProtocolError('choices[0].message.content is not text')
        usage = body.get('usage') if isinstance(body.get('usage'), dict) else {}
        try:
            return ChatResponse(text=text,
                                prompt_tokens=int(usage.get('prompt_tokens', 0)),
                                completion_tokens=int(usage.get('completion_tokens', 0)),
                                latency_ms=latency_ms)
        except (TypeError, ValueError) as error:
            raise ProtocolError(f'malformed usage counts: {error}') from error
