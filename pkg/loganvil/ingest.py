""" Parsing of textual Windows event log renderings and per-machine test splits """
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Tuple

from loganvil.core import UNKNOWN_SOURCE, EventRecord, canonical_timestamp, render_timestamp
from loganvil.errors import FormatError

logger = logging.getLogger('loganvil')

PIPE_MARKER = ' | '


class LogFormat(Enum):
    CSV_STYLE = 'csv'
    PIPE_STYLE = 'pipe'
    AUTO = 'auto'


@dataclass(frozen=True)
class LogFile:
    path: str
    format: LogFormat
    records: Tuple[EventRecord, ...]

    def __len__(self):
        return len(self.records)


def parse_csv_line(line: str) -> EventRecord:
    """ 'timestamp, event id, source, description' where the description may hold commas """
    line = line.rstrip('\r\n')
    if not line.strip():
        raise FormatError('empty line')
    fields = line.split(',', 3)
    if len(fields) < 3:
        raise FormatError(f'expected at least 3 comma separated fields: {line!r}')
    timestamp = canonical_timestamp(fields[0].strip())
    event_id = fields[1].strip()
    source = fields[2].strip()
    if not event_id or not source:
        raise FormatError(f'event id and source cannot be empty: {line!r}')
    description = fields[3].strip() if len(fields) == 4 else ''
    return EventRecord(timestamp=timestamp, event_id=event_id, source=source, description=description)


def parse_pipe_line(line: str) -> EventRecord:
    """ 'timestamp | Machine=… | Source=… | ID=… | description' with Machine and Source optional """
    line = line.rstrip('\r\n')
    if not line.strip():
        raise FormatError('empty line')
    segments = [segment.strip() for segment in line.split('|')]
    timestamp = canonical_timestamp(segments[0])
    keyed = {}
    position = 1
    while position < len(segments):
        key, separator, value = segments[position].partition('=')
        if not separator or key not in ('Machine', 'Source', 'ID') or key in keyed:
            break
        keyed[key] = value.strip()
        position += 1
        if key == 'ID':
            break
    if not keyed.get('ID'):
        raise FormatError(f'missing ID segment: {line!r}')
    # whatever follows the keyed segments is free text, even when it contains '|'
    description = ' | '.join(segments[position:]).strip()
    return EventRecord(timestamp=timestamp,
                       event_id=keyed['ID'],
                       source=keyed.get('Source') or UNKNOWN_SOURCE,
                       description=description,
                       machine=keyed.get('Machine') or None)


def render_csv_line(record: EventRecord) -> str:
    head = f'{render_timestamp(record.timestamp)}, {record.event_id}, {record.source},'
    return f'{head} {record.description}' if record.description else head


def render_pipe_line(record: EventRecord) -> str:
    parts = [render_timestamp(record.timestamp)]
    if record.machine:
        parts.append(f'Machine={record.machine}')
    if record.source != UNKNOWN_SOURCE:
        parts.append(f'Source={record.source}')
    parts.append(f'ID={record.event_id}')
    parts.append(record.description)
    return PIPE_MARKER.join(parts).rstrip()


def render_line(record: EventRecord) -> str:
    """ Canonical rendering used in prompts and datasets. Sniffing it gives back the style it was written in """
    if record.machine or record.source == UNKNOWN_SOURCE:
        return render_pipe_line(record)
    line = render_csv_line(record)
    return render_pipe_line(record) if PIPE_MARKER in line else line


def sniff_format(line: str) -> LogFormat:
    return LogFormat.PIPE_STYLE if PIPE_MARKER in line else LogFormat.CSV_STYLE


def parse_line(line: str, log_format: LogFormat) -> EventRecord:
    if log_format is LogFormat.AUTO:
        log_format = sniff_format(line)
    if log_format is LogFormat.PIPE_STYLE:
        return parse_pipe_line(line)
    return parse_csv_line(line)


def parse_lines(lines: Iterable[str], log_format: LogFormat = LogFormat.AUTO) -> Tuple[LogFormat, List[EventRecord]]:
    """
    Parse non-blank lines. In auto mode the first line decides the format for the whole input
    :return: resolved format and records in input order
    """
    resolved = log_format
    records = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if log_format is LogFormat.AUTO:
            sniffed = sniff_format(line)
            if resolved is LogFormat.AUTO:
                resolved = sniffed
            elif sniffed is not resolved:
                raise FormatError(f'mixed formats, expected {resolved.value} style', line_number)
        try:
            records.append(parse_line(line, resolved))
        except FormatError as error:
            raise FormatError(str(error), line_number) from error
    return resolved, records


def load_file(path: str, log_format: LogFormat = LogFormat.AUTO) -> LogFile:
    """ Load a UTF-8 log file, LF or CRLF endings, one event per line """
    with open(path, encoding='utf-8-sig') as file:
        resolved, records = parse_lines(file, log_format)
    logger.debug(f'Loaded {len(records)} records from {path} as {resolved.value}')
    return LogFile(path=str(path), format=resolved, records=tuple(records))


def stride_indices(available: int, cap: int) -> List[int]:
    """ Uniform stride over range(available) picking min(cap, available) positions """
    if available <= cap:
        return list(range(available))
    return [i * available // cap for i in range(cap)]


def split_by_machine(records: Iterable[EventRecord], cap: int) -> Dict[str, List[EventRecord]]:
    """ Per-machine chronological lists of at most cap records covering each machine's time range """
    if cap < 1:
        raise ValueError('cap needs to be at least 1')
    by_machine = defaultdict(list)
    for record in records:
        by_machine[record.machine or UNKNOWN_SOURCE].append(record)
    splits = {}
    for machine in sorted(by_machine):
        ordered = sorted(by_machine[machine], key=lambda r: r.timestamp)
        splits[machine] = [ordered[i] for i in stride_indices(len(ordered), cap)]
        logger.debug(f'Machine {machine}: kept {len(splits[machine])} of {len(ordered)} records')
    return splits
