""" Grouping of a chronological log stream into communities of related records """
import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import networkx as nx

from loganvil.core import UNKNOWN_SOURCE, EventRecord, GroupBasis, LogGroup
from loganvil.errors import PreconditionError

logger = logging.getLogger('loganvil')


@dataclass(frozen=True)
class CorrelationConfig:
    window_seconds: int = 60
    link_on_source: bool = True
    link_on_machine: bool = True
    repetition_threshold: int = 20

    def __post_init__(self):
        if self.window_seconds < 1:
            raise ValueError('window_seconds needs to be at least 1')
        if self.repetition_threshold < 2:
            raise ValueError('repetition_threshold needs to be at least 2')


def _require_sorted(records: Sequence[EventRecord]):
    if any(a.timestamp > b.timestamp for a, b in zip(records, records[1:])):
        raise PreconditionError('records need to be sorted by timestamp')


def _source_link(a: EventRecord, b: EventRecord, cfg: CorrelationConfig) -> bool:
    return cfg.link_on_source and a.source == b.source != UNKNOWN_SOURCE


def _machine_link(a: EventRecord, b: EventRecord, cfg: CorrelationConfig) -> bool:
    return cfg.link_on_machine and a.machine is not None and a.machine == b.machine


def _correlation_graph(records: Sequence[EventRecord], cfg: CorrelationConfig) -> nx.Graph:
    _require_sorted(records)
    graph = nx.Graph()
    graph.add_nodes_from(range(len(records)))
    for i, first in enumerate(records):
        for j in range(i + 1, len(records)):
            second = records[j]
            if (second.timestamp - first.timestamp).total_seconds() > cfg.window_seconds:
                break
            via_source = _source_link(first, second, cfg)
            if via_source or _machine_link(first, second, cfg):
                graph.add_edge(i, j, via_source=via_source)
    return graph


def build_edges(records: Sequence[EventRecord], cfg: CorrelationConfig) -> List[Tuple[int, int]]:
    """ Undirected edges (i, j), i < j, between records sharing a key inside the time window """
    graph = _correlation_graph(records, cfg)
    return sorted((min(i, j), max(i, j)) for i, j in graph.edges())


def community_indices(records: Sequence[EventRecord], cfg: CorrelationConfig) -> List[Tuple[List[int], GroupBasis]]:
    """ Connected components as sorted index lists, ordered by earliest member """
    graph = _correlation_graph(records, cfg)
    components = sorted((sorted(component) for component in nx.connected_components(graph)), key=lambda c: c[0])
    result = []
    for component in components:
        if len(component) == 1:
            basis = GroupBasis.SINGLETON
        elif any(data['via_source'] for _, _, data in graph.subgraph(component).edges(data=True)):
            basis = GroupBasis.SHARED_SOURCE_WINDOW
        else:
            basis = GroupBasis.SHARED_MACHINE_WINDOW
        result.append((component, basis))
    return result


def groups_from_indices(records: Sequence[EventRecord],
                        components: Sequence[Tuple[List[int], GroupBasis]]) -> List[LogGroup]:
    return [LogGroup(group_id=group_id, records=tuple(records[i] for i in indices), basis=basis)
            for group_id, (indices, basis) in enumerate(components)]


def communities(records: Sequence[EventRecord], cfg: CorrelationConfig) -> List[LogGroup]:
    groups = groups_from_indices(records, community_indices(records, cfg))
    logger.info(f'Correlated {len(records)} records into {len(groups)} groups')
    return groups


def flag_repetitions(groups: Sequence[LogGroup], cfg: CorrelationConfig) -> List[LogGroup]:
    """ Mark groups where one (event id, description) pair repeats at least repetition_threshold times """
    flagged = []
    for group in groups:
        counts = Counter((r.event_id, r.description) for r in group.records)
        if max(counts.values()) >= cfg.repetition_threshold:
            logger.debug(f'Group {group.group_id} flagged as repetition')
            group = replace(group, basis=GroupBasis.REPETITION)
        flagged.append(group)
    return flagged
