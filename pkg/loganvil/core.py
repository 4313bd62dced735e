""" Shared domain types. All of them are immutable value objects validated at construction. """
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional, Tuple

from loganvil.errors import FormatError

TIMESTAMP_FORMAT = '%Y-%m-%d %H:%M:%S'
UNKNOWN_SOURCE = 'unknown'
NO_PROBLEM_OUTPUT = 'No problem identified.'
QUESTION_IDS = tuple(f'Q{i}' for i in range(1, 17))


def canonical_timestamp(text: str) -> datetime:
    """ Parse 'YYYY-MM-DD HH:MM:SS'. Anything else is a FormatError """
    try:
        value = datetime.strptime(text, TIMESTAMP_FORMAT)
    except ValueError as error:
        raise FormatError(f'invalid timestamp {text!r}') from error
    # strptime accepts unpadded fields, the canonical form does not
    if value.strftime(TIMESTAMP_FORMAT) != text:
        raise FormatError(f'invalid timestamp {text!r}')
    return value


def render_timestamp(value: datetime) -> str:
    return value.strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class EventRecord:
    """ One parsed Windows event log line """
    timestamp: datetime
    event_id: str
    source: str
    description: str = ''
    machine: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.timestamp, datetime):
            raise ValueError('timestamp needs to be datetime')
        if self.timestamp.microsecond or self.timestamp.tzinfo is not None:
            raise ValueError('timestamp has seconds precision and no timezone')
        if not self.event_id:
            raise ValueError('event_id cannot be empty')
        if not self.source:
            raise ValueError('source cannot be empty')
        if self.machine == '':
            raise ValueError('machine is either absent or non-empty')


class GroupBasis(Enum):
    SINGLETON = 'singleton'
    SHARED_SOURCE_WINDOW = 'shared-source-window'
    SHARED_MACHINE_WINDOW = 'shared-machine-window'
    REPETITION = 'repetition'


@dataclass(frozen=True)
class LogGroup:
    """ Correlated records which together describe one activity """
    group_id: int
    records: Tuple[EventRecord, ...]
    basis: GroupBasis

    def __post_init__(self):
        object.__setattr__(self, 'records', tuple(self.records))
        if not self.records:
            raise ValueError('log group cannot be empty')
        if any(a.timestamp > b.timestamp for a, b in zip(self.records, self.records[1:])):
            raise ValueError('log group records need to be chronological')
        if len(self.records) == 1 and self.basis is not GroupBasis.SINGLETON:
            raise ValueError('a group of one record has singleton basis')

    def __len__(self):
        return len(self.records)


class DetectionCategory(Enum):
    BRUTE_FORCE = 'brute_force'
    PRIVILEGE_ESCALATION = 'privilege_escalation'
    RANSOMWARE = 'ransomware'
    REPETITION_FLOOD = 'repetition_flood'
    SOFTWARE_FAILURE = 'software_failure'


@dataclass(frozen=True)
class Detection:
    category: DetectionCategory
    triggering_indices: Tuple[int, ...]
    rule_id: str

    def __post_init__(self):
        object.__setattr__(self, 'triggering_indices', tuple(self.triggering_indices))
        if not self.triggering_indices:
            raise ValueError('detection needs at least one triggering record')
        if min(self.triggering_indices) < 0:
            raise ValueError('triggering indices cannot be negative')


def chunk_count(group_size: int, chunk_size: int = 7) -> int:
    return max(1, math.ceil(group_size / chunk_size))


@dataclass(frozen=True)
class AnalysisReport:
    problem_identified: bool
    problem: str
    remediation: Tuple[str, ...]
    chunks_used: int
    detections: Tuple[Detection, ...] = ()
    raw_final_response: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'remediation', tuple(self.remediation))
        object.__setattr__(self, 'detections', tuple(self.detections))
        if self.chunks_used < 1:
            raise ValueError('chunks_used needs to be positive')
        if self.problem_identified:
            if not self.problem or not self.remediation:
                raise ValueError('identified problem needs text and remediation steps')
        elif self.problem or self.remediation:
            raise ValueError('no problem identified means empty problem and remediation')


@dataclass(frozen=True)
class FineTuneExample:
    instruction: str
    input: str
    output: str

    def to_dict(self) -> dict:
        # key order is part of the JSONL format
        return {'instruction': self.instruction, 'input': self.input, 'output': self.output}


class ModelClass(Enum):
    SLM = 'slm'
    LLM = 'llm'


@dataclass(frozen=True)
class TrainingConfig:
    model_name: str
    model_class: ModelClass
    batch_size: int
    max_token_length: int
    epochs: int = 3
    method: str = 'lora'

    def __post_init__(self):
        if self.epochs != 3:
            raise ValueError('every model trains for 3 epochs')
        if self.batch_size not in (16, 4, 2):
            raise ValueError(f'batch size {self.batch_size} is not one of 16, 4, 2')
        if self.method != 'lora':
            raise ValueError('method is always lora')
        if self.max_token_length < 1:
            raise ValueError('max_token_length needs to be positive')

    def to_dict(self) -> dict:
        return {
            'model_name': self.model_name,
            'model_class': self.model_class.value,
            'batch_size': self.batch_size,
            'epochs': self.epochs,
            'method': self.method,
            'max_token_length': self.max_token_length,
        }


class Choice(Enum):
    YES = 'yes'
    SOMEWHAT = 'somewhat'
    NO = 'no'


def question_number(question_id: str) -> int:
    if question_id not in QUESTION_IDS:
        raise ValueError(f'unknown question {question_id!r}')
    return int(question_id[1:])


def is_per_model(question_id: str) -> bool:
    return question_number(question_id) >= 9


@dataclass(frozen=True)
class QuestionnaireResponse:
    """
    One expert's answers.
    choice_answers keys are (question_id, model_name or None), rating_answers keys (question_id, model_name)
    """
    expert_id: str
    choice_answers: Mapping[Tuple[str, Optional[str]], Choice] = field(default_factory=dict)
    rating_answers: Mapping[Tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for (question_id, model_name), answer in self.choice_answers.items():
            if is_per_model(question_id) == (model_name is None):
                raise ValueError(f'{question_id} model name does not match the question')
            if not isinstance(answer, Choice):
                raise ValueError(f'{question_id} answer needs to be Choice')
        for (question_id, model_name), score in self.rating_answers.items():
            if not is_per_model(question_id) or model_name is None:
                raise ValueError(f'{question_id} ratings are per model')
            if isinstance(score, bool) or not isinstance(score, int) or not 1 <= score <= 5:
                raise ValueError(f'{question_id} rating {score!r} is not within 1..5')
        object.__setattr__(self, 'choice_answers', MappingProxyType(dict(self.choice_answers)))
        object.__setattr__(self, 'rating_answers', MappingProxyType(dict(self.rating_answers)))
