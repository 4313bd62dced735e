"""
Solution-aware fine-tuning dataset: two stage generation with a language model,
correlated group injection, JSONL emission and validation, training config emission
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from loganvil.analyze import ParsedOutput, parse_model_output
from loganvil.backend.base import ChatRequest, LogAnvilBackend
from loganvil.core import (NO_PROBLEM_OUTPUT, EventRecord, FineTuneExample, LogGroup, ModelClass,
                           TrainingConfig, canonical_timestamp)
from loganvil.errors import FormatError, GenerationExhausted, MissingLabel, UnparseableOutput
from loganvil.ingest import LogFormat, parse_line, render_line, stride_indices

logger = logging.getLogger('loganvil')

GENERATION_PROMPT = (
    'You are a Windows event log generator. Generate {count:,} realistic Windows event logs (including '
    'performance from performance monitor, system logs, and application events) as JSON objects. Each log '
    'entry should always have the following fields: Date/Time, Event ID, Application and Description. '
    'All columns should not include any commas. Include logs as separate entries and do not add additional '
    'columns.'
)
LABELING_PROMPT = (
    'You are an event log analyser. Reply only with the text to fill in the output field. '
    'Reply only in the format: Problem Identified..., How to resolve: …,'
)
DEFAULT_INSTRUCTION = (
    'You are a Windows event log analyser. Analyse the event log(s) in the input. Identify any security, '
    'system-health, or operational issues and explain how to resolve them.'
)
FAILURE_BUDGET = 10
LABEL_ATTEMPTS = 2
DEFAULT_MIN_COUNT = 5000
JSONL_KEYS = ['instruction', 'input', 'output']

# name -> class of the models evaluated with this dataset
REFERENCE_MODELS = {
    'btlm-3b': ModelClass.SLM,
    'gemma-4b': ModelClass.SLM,
    'bloom-4b': ModelClass.SLM,
    'mistral-7b': ModelClass.LLM,
    'gemma-7b': ModelClass.LLM,
    'bloom-7b': ModelClass.LLM,
}

_FIELD_ALIASES = {
    'timestamp': ('Date/Time', 'DateTime', 'Date', 'timestamp', 'date_time'),
    'event_id': ('Event ID', 'EventID', 'event_id', 'ID'),
    'source': ('Application', 'Source', 'source', 'application'),
    'description': ('Description', 'description', 'Message', 'message'),
    'machine': ('Machine', 'machine', 'Computer'),
}


@dataclass(frozen=True)
class ForgeConfig:
    target_count: int = 10000
    generation_batch: int = 50
    instruction_text: str = DEFAULT_INSTRUCTION
    example_logs: Tuple[EventRecord, ...] = ()
    correlated_tail_groups: int = 4
    max_new_tokens: int = 8192
    temperature: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, 'example_logs', tuple(self.example_logs))
        if self.target_count < 1:
            raise ValueError('target_count needs to be at least 1')
        if self.generation_batch < 1:
            raise ValueError('generation_batch needs to be at least 1')
        if self.correlated_tail_groups < 0:
            raise ValueError('correlated_tail_groups cannot be negative')
        if not self.instruction_text:
            raise ValueError('instruction_text cannot be empty')


def _field(raw: dict, name: str) -> Optional[str]:
    for alias in _FIELD_ALIASES[name]:
        if alias in raw and raw[alias] is not None:
            return str(raw[alias]).strip()
    return None


def record_from_json(raw: dict) -> EventRecord:
    """ Generated log object -> record. Id, application or machine columns with commas or pipes are rejected """
    if not isinstance(raw, dict):
        raise FormatError('generated log is not a JSON object')
    timestamp, event_id, source = (_field(raw, name) for name in ('timestamp', 'event_id', 'source'))
    if not timestamp or not event_id or not source:
        raise FormatError(f'generated log lacks a required field: {raw!r}')
    machine = _field(raw, 'machine') or None
    if any(mark in column for column in (event_id, source, machine or '') for mark in ',|'):
        raise FormatError(f'generated log has commas or pipes in its columns: {raw!r}')
    # one line per log, group inputs are told apart by their newlines
    description = ' '.join((_field(raw, 'description') or '').split())
    try:
        return EventRecord(timestamp=canonical_timestamp(timestamp), event_id=event_id, source=source,
                           description=description, machine=machine)
    except ValueError as error:
        raise FormatError(str(error)) from error


def _json_objects(text: str) -> List[dict]:
    """ Every JSON object in a reply: a whole array, a single object, or objects embedded in prose """
    try:
        whole = json.loads(text)
    except ValueError:
        whole = None
    if isinstance(whole, list):
        return [item for item in whole if isinstance(item, dict)]
    if isinstance(whole, dict):
        nested = next((v for v in whole.values() if isinstance(v, list)), None)
        return [item for item in nested if isinstance(item, dict)] if nested is not None else [whole]
    decoder = json.JSONDecoder()
    objects = []
    position = text.find('{')
    while position != -1:
        try:
            value, end = decoder.raw_decode(text, position)
        except ValueError:
            position = text.find('{', position + 1)
            continue
        if isinstance(value, dict):
            objects.append(value)
        position = text.find('{', end)
    return objects


def parse_generated_logs(text: str) -> List[EventRecord]:
    records = []
    for raw in _json_objects(text):
        try:
            records.append(record_from_json(raw))
        except FormatError as error:
            logger.debug(f'Skipping generated log: {error}')
    return records


def stage1_generate(backend: LogAnvilBackend, cfg: ForgeConfig) -> List[EventRecord]:
    """
    Generate synthetic logs in batches until target_count unique records exist.
    Ten consecutive batches without a new record raise GenerationExhausted
    """
    user_content = '\n'.join(render_line(r) for r in cfg.example_logs) or 'No example logs supplied.'
    records: List[EventRecord] = []
    seen = set()
    failures = 0
    batch_number = 0
    while len(records) < cfg.target_count:
        count = min(cfg.generation_batch, cfg.target_count - len(records))
        batch_number += 1
        request = ChatRequest(system_prompt=GENERATION_PROMPT.format(count=count), user_content=user_content,
                              max_new_tokens=cfg.max_new_tokens, temperature=cfg.temperature)
        added = 0
        for record in parse_generated_logs(backend.complete(request).text):
            key = (record.timestamp, record.event_id, record.description)
            if key in seen:
                continue
            seen.add(key)
            records.append(record)
            added += 1
        logger.debug(f'Generation batch {batch_number}: {added} new records, {len(records)} in total')
        if added:
            failures = 0
            continue
        failures += 1
        logger.warning(f'Generation batch {batch_number} produced no new records ({failures}/{FAILURE_BUDGET})')
        if failures >= FAILURE_BUDGET:
            raise GenerationExhausted(f'{FAILURE_BUDGET} consecutive batches without new records, '
                                      f'{len(records)} of {cfg.target_count} generated')
    logger.info(f'Generated {cfg.target_count} records in {batch_number} batches')
    return records[:cfg.target_count]


def format_output(parsed: ParsedOutput) -> str:
    """ Canonical dataset output text """
    if not parsed.problem_identified:
        return NO_PROBLEM_OUTPUT
    steps = '\n'.join(f'{number}) {step}' for number, step in enumerate(parsed.remediation, start=1))
    return f'Problem Identified: {parsed.problem}\nHow to resolve:\n{steps}'


def stage2_label(backend: LogAnvilBackend, input_text: str, max_new_tokens: int = 1024) -> str:
    """ Label one log line or newline-joined group with a problem/remediation statement """
    if not input_text:
        raise ValueError('input_text cannot be empty')
    request = ChatRequest(system_prompt=LABELING_PROMPT, user_content=input_text, max_new_tokens=max_new_tokens)
    for attempt in range(1, LABEL_ATTEMPTS + 1):
        text = backend.complete(request).text
        try:
            return format_output(parse_model_output(text))
        except UnparseableOutput:
            logger.warning(f'Label attempt {attempt}/{LABEL_ATTEMPTS} did not follow the output format')
    raise UnparseableOutput(f'no parseable label after {LABEL_ATTEMPTS} attempts for {input_text[:80]!r}')


def group_input(group: LogGroup) -> str:
    return '\n'.join(render_line(record) for record in group.records)


def label_inputs(backend: LogAnvilBackend, inputs: Iterable[str], parallel: Optional[int] = None) -> Dict[str, str]:
    """ Label distinct inputs concurrently """
    unique = list(dict.fromkeys(inputs))
    with ThreadPoolExecutor(max_workers=parallel or backend.max_in_flight) as executor:
        outputs = list(executor.map(lambda text: stage2_label(backend, text), unique))
    logger.info(f'Labelled {len(unique)} inputs')
    return dict(zip(unique, outputs))


def select_tail_groups(groups: Sequence[LogGroup], count: int) -> List[LogGroup]:
    """ Up to count multi-record groups with a spread of sizes, in original order """
    candidates = sorted((g for g in groups if len(g) > 1), key=lambda g: (len(g), g.group_id))
    chosen = [candidates[i] for i in stride_indices(len(candidates), count)]
    return sorted(chosen, key=lambda g: g.group_id)


def assemble_dataset(records: Sequence[EventRecord], groups: Sequence[LogGroup], outputs: Mapping[str, str],
                     cfg: ForgeConfig) -> List[FineTuneExample]:
    """ One example per record, then exactly correlated_tail_groups group examples at the end """
    if len(groups) < cfg.correlated_tail_groups:
        raise ValueError(f'{cfg.correlated_tail_groups} tail groups needed, {len(groups)} given')
    inputs = [render_line(r) for r in records] + [group_input(g) for g in groups[:cfg.correlated_tail_groups]]
    examples = []
    for text in inputs:
        if text not in outputs:
            raise MissingLabel(text)
        examples.append(FineTuneExample(instruction=cfg.instruction_text, input=text, output=outputs[text]))
    return examples


def write_jsonl(examples: Iterable[FineTuneExample], path: str) -> int:
    count = 0
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        for example in examples:
            file.write(json.dumps(example.to_dict(), ensure_ascii=False) + '\n')
            count += 1
    logger.info(f'Wrote {count} examples to {path}')
    return count


def load_jsonl(path: str) -> List[FineTuneExample]:
    with open(path, encoding='utf-8') as file:
        return [FineTuneExample(**json.loads(line)) for line in file if line.strip()]


class _Pairs(list):
    """ Key-value pairs of one JSON object, order and duplicates kept """


@dataclass(frozen=True)
class Violation:
    line: Optional[int]
    check: str
    message: str


@dataclass
class ValidationReport:
    path: str
    line_count: int = 0
    min_count: int = DEFAULT_MIN_COUNT
    violations: List[Violation] = field(default_factory=list)

    CHECKS = ('json', 'keys', 'instruction_uniformity', 'output_grammar', 'size', 'comma_rule', 'group_placement')

    def add(self, line: Optional[int], check: str, message: str):
        self.violations.append(Violation(line, check, message))

    def failed_checks(self) -> List[str]:
        return [check for check in self.CHECKS if any(v.check == check for v in self.violations)]

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f'{self.path}: {self.line_count} lines']
        for check in self.CHECKS:
            count = sum(1 for v in self.violations if v.check == check)
            lines.append(f'{check}: {"ok" if count == 0 else f"{count} violation(s)"}')
        for violation in self.violations[:20]:
            where = f'line {violation.line}' if violation.line else 'file'
            lines.append(f'  {where}: [{violation.check}] {violation.message}')
        return '\n'.join(lines)


def _check_single_log(report: ValidationReport, line_number: int, text: str):
    try:
        record = parse_line(text, LogFormat.AUTO)
    except FormatError as error:
        report.add(line_number, 'comma_rule', f'input is not a well formed log line: {error}')
        return
    if any(',' in value for value in (record.event_id, record.source)):
        report.add(line_number, 'comma_rule', 'leading columns contain commas')


def validate_dataset(path: str, min_count: int = DEFAULT_MIN_COUNT,
                     tail_groups: Optional[int] = None) -> ValidationReport:
    """ Check a JSONL dataset. Findings are report entries, only I/O problems raise """
    report = ValidationReport(path=str(path), min_count=min_count)
    instructions = {}
    kinds = []
    with open(path, encoding='utf-8') as file:
        lines = file.read().split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    report.line_count = len(lines)
    for line_number, line in enumerate(lines, start=1):
        try:
            row = json.loads(line, object_pairs_hook=_Pairs)
        except ValueError as error:
            report.add(line_number, 'json', f'invalid JSON: {error}')
            continue
        if not isinstance(row, _Pairs):
            report.add(line_number, 'json', 'line is not a JSON object')
            continue
        if [key for key, _ in row] != JSONL_KEYS or not all(isinstance(value, str) for _, value in row):
            report.add(line_number, 'keys', f'keys need to be exactly {JSONL_KEYS} with text values')
            continue
        instruction, text, output = (value for _, value in row)
        instructions.setdefault(instruction, line_number)
        try:
            parse_model_output(output)
        except UnparseableOutput:
            report.add(line_number, 'output_grammar', 'output follows neither output form')
        is_group = '\n' in text
        kinds.append((line_number, is_group))
        if not is_group:
            _check_single_log(report, line_number, text)
    if len(instructions) > 1:
        first, *others = sorted(instructions.items(), key=lambda item: item[1])
        for _, line_number in others:
            report.add(line_number, 'instruction_uniformity', f'instruction differs from line {first[1]}')
    seen_group = False
    for line_number, is_group in kinds:
        if seen_group and not is_group:
            report.add(line_number, 'group_placement', 'single log after correlated groups')
        seen_group = seen_group or is_group
    if tail_groups is not None:
        found = sum(1 for _, is_group in kinds if is_group)
        if found != tail_groups:
            report.add(None, 'group_placement', f'{found} correlated groups, expected {tail_groups}')
    if report.line_count < min_count:
        report.add(None, 'size', f'{report.line_count} examples, at least {min_count} recommended')
    logger.info(f'Validated {path}: {len(report.violations)} violations')
    return report


def normalize_model_name(model_name: str) -> str:
    return '-'.join(model_name.strip().lower().replace('_', ' ').replace('-', ' ').split())


def emit_training_config(model_name: str, model_class: ModelClass, max_token_length: int) -> TrainingConfig:
    """ LoRA run settings: batch 16 for small models, 4 for large ones, 2 for bloom-7b """
    if normalize_model_name(model_name) == 'bloom-7b':
        batch_size = 2
    elif model_class is ModelClass.SLM:
        batch_size = 16
    else:
        batch_size = 4
    return TrainingConfig(model_name=model_name, model_class=model_class, batch_size=batch_size,
                          max_token_length=max_token_length)
