""" Per-group analysis: prompt assembly, chunked conversation with the backend and output parsing """
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from loganvil.backend.base import ChatRequest, LogAnvilBackend
from loganvil.core import AnalysisReport, Detection, EventRecord, LogGroup, chunk_count
from loganvil.errors import PreconditionError, UnparseableOutput
from loganvil.ingest import render_line
from loganvil.predetect import Rule, scan

logger = logging.getLogger('loganvil')

DEFAULT_SYSTEM_PROMPT = (
    'You are a Windows event log analyser. Analyse the following event logs. '
    'Reply with whether a problem was identified. If a problem is identified, reply in the format: '
    'Problem Identified: …, How to resolve: …. If not, reply: No problem identified.'
)
DETECTION_PREAMBLE = 'Pre-detection flags: '
CONTINUATION = 'Update your response if there is any additional information; otherwise keep it the same.'

_NO_PROBLEM = re.compile(r'[*_]*\s*no problems? identified\s*[*_]*\s*[.!:;]*\s*[*_]*', re.IGNORECASE)
_PROBLEM = re.compile(
    r'[*_]*\s*problem identified\s*(?:[:—–-]|\.\.\.|…)?\s*[*_]*\s*'
    r'(?P<problem>.*?)[\s,;.…]*[*_]*\s*'
    r'(?:how to resolve|recommended actions)\s*[*_]*\s*:?\s*[*_]*\s*'
    r'(?P<steps>.*)',
    re.IGNORECASE | re.DOTALL)
# '1)' '2.' '3:' at line start, '4)' inline after whitespace, '5.' '6:' inline only when the count runs on
_STEP_MARKER = re.compile(r'(?:^[ \t]*(?:[-*•][ \t]*)?(?P<lead>\d{1,3})[.):]|(?<=\s)(?P<paren>\d{1,3})\)'
                          r'|(?<=\s)(?P<inline>\d{1,3})[.:])[ \t]+', re.MULTILINE)
_BULLET = re.compile(r'^[ \t]*[-*•][ \t]+(?P<text>.*)$', re.MULTILINE)


@dataclass(frozen=True)
class AnalysisConfig:
    chunk_size: int = 7
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    include_detections: bool = True
    max_new_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError('chunk_size needs to be at least 1')


@dataclass(frozen=True)
class CostModel:
    seconds_per_request: float
    dollars_per_request: float

    def __post_init__(self):
        if self.seconds_per_request <= 0:
            raise ValueError('seconds_per_request needs to be positive')
        if self.dollars_per_request < 0:
            raise ValueError('dollars_per_request cannot be negative')

    @classmethod
    def from_projection(cls, items: int, total_seconds: float, total_dollars: float) -> 'CostModel':
        """ Per-request rates back-derived from a projected total """
        return cls(seconds_per_request=total_seconds / items, dollars_per_request=total_dollars / items)


@dataclass(frozen=True)
class ParsedOutput:
    problem_identified: bool
    problem: str
    remediation: Tuple[str, ...]


def _clean(text: str) -> str:
    return ' '.join(text.strip(' \t\r\n*_').split())


def _step_markers(text: str) -> List[re.Match]:
    markers = []
    previous = 0
    for match in _STEP_MARKER.finditer(text):
        number = int(match.group('lead') or match.group('paren') or match.group('inline'))
        if match.group('inline') and number != previous + 1:
            continue
        markers.append(match)
        previous = number
    return markers


def _split_steps(text: str) -> List[str]:
    markers = _step_markers(text)
    if markers:
        bounds = [m.end() for m in markers]
        ends = [m.start() for m in markers[1:]] + [len(text)]
        steps = [text[start:end] for start, end in zip(bounds, ends)]
    else:
        steps = [m.group('text') for m in _BULLET.finditer(text)] or [text]
    return [step for step in (_clean(s) for s in steps) if step]


def parse_model_output(text: str) -> ParsedOutput:
    """
    Parse 'No problem identified' or 'Problem Identified: …, How to resolve: …'.
    Remediation steps lose their original numbering, list order is the new numbering
    """
    stripped = text.strip()
    if _NO_PROBLEM.fullmatch(stripped):
        return ParsedOutput(False, '', ())
    match = _PROBLEM.match(stripped)
    if match:
        problem = _clean(match.group('problem'))
        steps = _split_steps(match.group('steps'))
        if problem and steps:
            return ParsedOutput(True, problem, tuple(steps))
    raise UnparseableOutput(f'cannot parse model output: {text[:80]!r}')


def _describe(detection: Detection) -> str:
    return f'{detection.category.value} ({len(detection.triggering_indices)} matching)'


def build_prompt(group_slice: Sequence[EventRecord], detections: Sequence[Detection], prior: Optional[str],
                 cfg: AnalysisConfig) -> ChatRequest:
    if not group_slice:
        raise PreconditionError('cannot build a prompt without records')
    parts = []
    if cfg.include_detections and detections:
        parts.append(DETECTION_PREAMBLE + ', '.join(_describe(d) for d in detections))
    parts.append('\n'.join(render_line(record) for record in group_slice))
    if prior is not None:
        ending = '' if prior.endswith('.') else '.'
        parts.append(f'Previous response: {prior}{ending} {CONTINUATION}')
    return ChatRequest(system_prompt=cfg.system_prompt,
                       user_content='\n'.join(parts),
                       prior_response=prior,
                       max_new_tokens=cfg.max_new_tokens,
                       temperature=cfg.temperature)


def analyze_group(group: LogGroup, backend: LogAnvilBackend, rules: Sequence[Rule],
                  cfg: AnalysisConfig) -> AnalysisReport:
    """
    Analyse one group. Groups larger than chunk_size are sent chunk by chunk, each request
    carrying the previous answer, and only the final answer is kept
    """
    if group is None or not group.records:
        raise PreconditionError('cannot analyse an empty group')
    detections = scan(group, rules)
    records = group.records
    size = cfg.chunk_size
    chunks = [records[i * size:(i + 1) * size] for i in range(chunk_count(len(records), size))]
    prior = None
    for number, chunk in enumerate(chunks, start=1):
        logger.debug(f'Group {group.group_id}: chunk {number}/{len(chunks)} with {len(chunk)} records')
        response = backend.complete(build_prompt(chunk, detections, prior, cfg))
        prior = response.text
    parsed = parse_model_output(prior)
    return AnalysisReport(problem_identified=parsed.problem_identified,
                          problem=parsed.problem,
                          remediation=parsed.remediation,
                          chunks_used=len(chunks),
                          detections=tuple(detections),
                          raw_final_response=prior)


def analyze_groups(groups: Sequence[LogGroup], backend: LogAnvilBackend, rules: Sequence[Rule],
                   cfg: AnalysisConfig, parallel: Optional[int] = None) -> List[AnalysisReport]:
    """ Analyse groups concurrently, results in group order """
    workers = parallel or backend.max_in_flight
    logger.info(f'Analysing {len(groups)} groups with {workers} workers')
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda group: analyze_group(group, backend, rules, cfg), groups))


def report_to_dict(report: AnalysisReport, group_id: Optional[int] = None) -> dict:
    return {
        'group_id': group_id,
        'problem_identified': report.problem_identified,
        'problem': report.problem,
        'remediation': list(report.remediation),
        'chunks_used': report.chunks_used,
        'detections': [{'rule_id': d.rule_id,
                        'category': d.category.value,
                        'triggering_indices': list(d.triggering_indices)} for d in report.detections],
        'raw_final_response': report.raw_final_response,
    }


def estimate_cost(n_items: int, model: CostModel) -> Tuple[float, float]:
    """ Linear time and money projection for n_items requests """
    if n_items < 0:
        raise ValueError('n_items cannot be negative')
    return n_items * model.seconds_per_request, n_items * model.dollars_per_request
