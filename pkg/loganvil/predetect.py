""" Cheap rule based pre-detection over a log group. Detections are advisory hints for the model """
import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

from loganvil.core import Detection, DetectionCategory, EventRecord, LogGroup
from loganvil.errors import FormatError

logger = logging.getLogger('loganvil')

WHOLE_GROUP_WINDOW = 86400


@dataclass(frozen=True)
class Rule:
    rule_id: str
    category: DetectionCategory
    id_patterns: Tuple[str, ...] = ()
    text_patterns: Tuple[str, ...] = ()
    min_count: int = 1
    window_seconds: int = 60
    # count identical (event_id, description) records instead of pattern matches
    same_event: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'id_patterns', tuple(self.id_patterns))
        object.__setattr__(self, 'text_patterns', tuple(p.lower() for p in self.text_patterns))
        if not self.rule_id:
            raise ValueError('rule_id cannot be empty')
        if not (self.id_patterns or self.text_patterns or self.same_event):
            raise ValueError(f'rule {self.rule_id} matches nothing')
        if self.min_count < 1 or self.window_seconds < 1:
            raise ValueError(f'rule {self.rule_id} needs positive min_count and window_seconds')

    def matches(self, record: EventRecord) -> bool:
        if self.same_event:
            return True
        if record.event_id in self.id_patterns:
            return True
        description = record.description.lower()
        return any(pattern in description for pattern in self.text_patterns)


def default_rules() -> List[Rule]:
    return [
        Rule('brute_force', DetectionCategory.BRUTE_FORCE, id_patterns=('4625',),
             text_patterns=('failed logon', 'authentication failure'), min_count=5, window_seconds=60),
        Rule('privilege_escalation', DetectionCategory.PRIVILEGE_ESCALATION, id_patterns=('4672', '4673', '4674'),
             text_patterns=('special privileges',), min_count=1, window_seconds=WHOLE_GROUP_WINDOW),
        Rule('ransomware', DetectionCategory.RANSOMWARE, text_patterns=('encrypted', 'ransom', '.locked'),
             min_count=3, window_seconds=300),
        Rule('repetition_flood', DetectionCategory.REPETITION_FLOOD, same_event=True, min_count=20,
             window_seconds=60),
        Rule('software_failure', DetectionCategory.SOFTWARE_FAILURE, text_patterns=('error', 'crash', 'fatal'),
             min_count=1, window_seconds=WHOLE_GROUP_WINDOW),
    ]


def load_rules(path: str) -> List[Rule]:
    """ Rules from a JSON array of objects using the Rule field names """
    with open(path, encoding='utf-8') as file:
        try:
            raw_rules = json.load(file)
        except json.JSONDecodeError as error:
            raise FormatError(f'{path} is not valid JSON: {error}') from error
    if not isinstance(raw_rules, list):
        raise FormatError(f'{path} needs to hold a JSON array of rules')
    rules = []
    for raw in raw_rules:
        try:
            rules.append(Rule(rule_id=raw['rule_id'],
                              category=DetectionCategory(raw['category']),
                              id_patterns=tuple(raw.get('id_patterns', ())),
                              text_patterns=tuple(raw.get('text_patterns', ())),
                              min_count=int(raw.get('min_count', 1)),
                              window_seconds=int(raw.get('window_seconds', 60)),
                              same_event=bool(raw.get('same_event', False))))
        except (KeyError, TypeError, ValueError) as error:
            raise FormatError(f'invalid rule {raw!r}: {error}') from error
    logger.debug(f'Loaded {len(rules)} rules from {path}')
    return rules


def densest_window(records: Sequence[EventRecord], indices: Sequence[int], window_seconds: int) -> List[int]:
    """
    Largest run of the given chronological indices whose time span is at most window_seconds.
    The earliest run wins ties
    """
    best_start, best_end = 0, 0
    end = 0
    for start in range(len(indices)):
        end = max(end, start)
        while end < len(indices) and \
                (records[indices[end]].timestamp - records[indices[start]].timestamp).total_seconds() <= window_seconds:
            end += 1
        if end - start > best_end - best_start:
            best_start, best_end = start, end
    return list(indices[best_start:best_end])


def _best_match(rule: Rule, records: Sequence[EventRecord]) -> List[int]:
    matching = [i for i, record in enumerate(records) if rule.matches(record)]
    if not rule.same_event:
        return densest_window(records, matching, rule.window_seconds)
    by_event = defaultdict(list)
    for i in matching:
        by_event[(records[i].event_id, records[i].description)].append(i)
    best: List[int] = []
    for indices in by_event.values():
        candidate = densest_window(records, indices, rule.window_seconds)
        if len(candidate) > len(best) or (len(candidate) == len(best) and candidate and candidate[0] < best[0]):
            best = candidate
    return best


def scan(group: Union[LogGroup, Sequence[EventRecord]], rules: Iterable[Rule]) -> List[Detection]:
    """ One detection per rule reaching min_count matches inside its window, sorted by rule_id """
    records = group.records if isinstance(group, LogGroup) else tuple(group)
    detections = []
    for rule in rules:
        indices = _best_match(rule, records)
        if indices and len(indices) >= rule.min_count:
            logger.debug(f'Rule {rule.rule_id} fired on {len(indices)} records')
            detections.append(Detection(category=rule.category, triggering_indices=tuple(indices),
                                        rule_id=rule.rule_id))
    return sorted(detections, key=lambda d: (d.rule_id, d.category.value, d.triggering_indices))
