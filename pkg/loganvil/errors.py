from typing import Optional


class LogAnvilError(Exception):
    """ Base class of every error loganvil raises on purpose """


class FormatError(LogAnvilError, ValueError):
    """ Input text does not have the expected shape """

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f'line {line_number}: {message}'
        super().__init__(message)
        self.line_number = line_number


class PreconditionError(LogAnvilError, ValueError):
    pass


class ConfigError(LogAnvilError):
    pass


class BackendError(LogAnvilError):
    """ Inference backend failed """


class BackendTimeout(BackendError, TimeoutError):
    pass


class TransportError(BackendError):
    pass


class ProtocolError(BackendError):
    pass


class UnparseableOutput(LogAnvilError):
    """ Model text follows neither the problem nor the no-problem form """


class GenerationExhausted(LogAnvilError):
    pass


class MissingLabel(LogAnvilError):

    def __init__(self, input_text: str):
        super().__init__(f'no labelled output for input: {input_text!r}')
        self.input_text = input_text


class SchemaError(LogAnvilError):

    def __init__(self, expert_id: str, key: str, message: str):
        super().__init__(f'expert {expert_id}: {key}: {message}')
        self.expert_id = expert_id
        self.key = key


class KindMismatch(LogAnvilError):
    pass


class MissingModel(LogAnvilError):
    pass
