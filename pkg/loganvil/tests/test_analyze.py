import math
from datetime import datetime, timedelta

import pytest
from hypothesis import given
from hypothesis.strategies import floats, integers, lists, sampled_from

from loganvil.analyze import (CONTINUATION, AnalysisConfig, CostModel, ParsedOutput, analyze_group, analyze_groups,
                              build_prompt, estimate_cost, parse_model_output, report_to_dict)
from loganvil.backend import MockBackend
from loganvil.core import Detection, DetectionCategory, EventRecord, GroupBasis, LogGroup
from loganvil.errors import PreconditionError, UnparseableOutput
from loganvil.forge import format_output
from loganvil.predetect import default_rules
from loganvil.tests.backends import ScriptedBackend

CPU_OUTPUT = ('Problem Identified: High CPU utilisation detected — Processor Time counter exceeded 85% threshold '
               '(current value: 92%).\n'
               'Recommended Actions:\n'
               '1) Identify resource‑intensive processes\n'
               '2) Check for runaway processes\n'
               '3) Consider scaling resources\n'
               '4) Optimise application code\n'
               '5) Schedule heavy workloads off‑peak\n'
               '6) Monitor for potential malware')
VSS_OUTPUT = ('Problem Identified:\n'
               'svchost error writing to a database log file; VSS service shutdown due to idle timeout.\n'
               'How to Resolve:\n'
               'Investigate the svchost error, verify disk space, restart the VSS service, and consider '
               'increasing the VSS idle timeout.')
BASE = datetime(2024, 1, 15, 10)


def _records(count):
    return [EventRecord(BASE + timedelta(seconds=i), str(100 + i), 'PerfMon', f'counter sample {i}')
            for i in range(count)]


def _group(count):
    return LogGroup(3, _records(count), GroupBasis.SINGLETON if count == 1 else GroupBasis.SHARED_SOURCE_WINDOW)


def _numbered_reply(number, _request):
    return f'Problem Identified: issue {number}\nHow to resolve:\n1) step {number}'


def test_parse_recommended_actions_output():
    parsed = parse_model_output(CPU_OUTPUT)
    assert parsed.problem_identified
    assert parsed.problem.startswith('High CPU utilisation detected')
    assert len(parsed.remediation) == 6
    assert parsed.remediation[0] == 'Identify resource‑intensive processes'
    assert parsed.remediation[-1] == 'Monitor for potential malware'


def test_parse_single_paragraph_remediation():
    parsed = parse_model_output(VSS_OUTPUT)
    assert parsed.problem == 'svchost error writing to a database log file; VSS service shutdown due to idle timeout'
    assert parsed.remediation == ('Investigate the svchost error, verify disk space, restart the VSS service, and '
                                  'consider increasing the VSS idle timeout.',)


@pytest.mark.parametrize('text', ['No problem identified.', '  no problem identified', 'No problems identified!',
                                  '**No problem identified.**'])
def test_parse_no_problem(text):
    assert parse_model_output(text) == ParsedOutput(False, '', ())


def test_parse_inline_and_renumbered_steps():
    parsed = parse_model_output('Problem Identified — Disk full. How to resolve: 1) Free space 3) Rotate logs')
    assert parsed.problem == 'Disk full'
    assert parsed.remediation == ('Free space', 'Rotate logs')


@pytest.mark.parametrize('text, steps', [
    ('Problem Identified: Disk full. How to resolve: 1. Free space. 2. Rotate logs.', ('Free space.', 'Rotate logs.')),
    ('Problem Identified: Disk full. How to resolve: do this 1: Free space 2: Rotate logs 3: Alert',
     ('Free space', 'Rotate logs', 'Alert')),
    ('Problem Identified: Old agent. How to resolve: Upgrade to version 2. Then restart it.',
     ('Upgrade to version 2. Then restart it.',)),
    ('Problem Identified: Disk full. How to resolve:\n1. Free 3.5 GB. 2. Rotate logs.\n3. Alert',
     ('Free 3.5 GB.', 'Rotate logs.', 'Alert')),
])
def test_parse_inline_dotted_steps(text, steps):
    assert parse_model_output(text).remediation == steps


def test_parse_bullets():
    parsed = parse_model_output('Problem Identified: Service crash\nHow to resolve:\n- Restart it\n- Read the dump')
    assert parsed.remediation == ('Restart it', 'Read the dump')


@pytest.mark.parametrize('text', ['lorem ipsum', '', 'Problem Identified: something', 'How to resolve: 1) x'])
def test_parse_unparseable(text):
    with pytest.raises(UnparseableOutput):
        parse_model_output(text)


words = sampled_from(['disk', 'service', 'memory', 'restart', 'check', 'logs', 'update', 'driver', 'network',
                      'CPU', 'usage', 'high', 'account', 'locked', 'policy', '85%', '(current)', 'value:'])
phrases = lists(words, min_size=1, max_size=8).map(' '.join)


@given(problem=phrases, steps=lists(phrases, min_size=1, max_size=8))
def test_forge_outputs_always_parse(problem, steps):
    parsed = ParsedOutput(True, problem, tuple(steps))
    assert parse_model_output(format_output(parsed)) == parsed
    assert parse_model_output(format_output(ParsedOutput(False, '', ()))) == ParsedOutput(False, '', ())


def test_build_prompt_minimal():
    records = _records(2)
    request = build_prompt(records, [], None, AnalysisConfig())
    assert request.user_content == ('2024-01-15 10:00:00, 100, PerfMon, counter sample 0\n'
                                    '2024-01-15 10:00:01, 101, PerfMon, counter sample 1')
    assert request.system_prompt == AnalysisConfig().system_prompt
    assert request.prior_response is None


def test_build_prompt_continuation():
    request = build_prompt(_records(1), [], 'Problem Identified: X', AnalysisConfig())
    assert request.user_content.endswith(f'Previous response: Problem Identified: X. {CONTINUATION}')
    assert request.prior_response == 'Problem Identified: X'


def test_build_prompt_detections():
    detection = Detection(DetectionCategory.BRUTE_FORCE, (0, 1, 2, 3, 4), 'brute_force')
    request = build_prompt(_records(2), [detection], None, AnalysisConfig())
    assert request.user_content.startswith('Pre-detection flags: brute_force')
    request = build_prompt(_records(2), [detection], None, AnalysisConfig(include_detections=False))
    assert not request.user_content.startswith('Pre-detection flags')


def test_build_prompt_needs_records():
    with pytest.raises(PreconditionError):
        build_prompt([], [], None, AnalysisConfig())


@pytest.mark.parametrize('size', range(1, 101))
def test_chunked_analysis(size):
    backend = ScriptedBackend(_numbered_reply)
    report = analyze_group(_group(size), backend, [], AnalysisConfig())
    expected_calls = max(1, math.ceil(size / 7))
    assert backend.calls == expected_calls
    assert report.chunks_used == expected_calls
    assert report.problem == f'issue {expected_calls}'
    assert report.raw_final_response == backend.responses[-1]
    for number in range(1, expected_calls):
        request = backend.requests[number]
        assert request.prior_response == backend.responses[number - 1]
        assert backend.responses[number - 1] in request.user_content
    assert backend.requests[0].prior_response is None
    sent = [line for request in backend.requests for line in request.user_content.split('\n')
            if line.startswith('2024-01-15')]
    assert len(sent) == size


def test_seven_records_one_call_eight_records_two():
    backend = ScriptedBackend(_numbered_reply)
    analyze_group(_group(7), backend, [], AnalysisConfig())
    assert backend.calls == 1
    backend = ScriptedBackend(_numbered_reply)
    analyze_group(_group(8), backend, [], AnalysisConfig())
    assert backend.calls == 2
    assert backend.requests[1].prior_response == backend.responses[0]


def test_analyze_needs_a_group():
    with pytest.raises(PreconditionError):
        analyze_group(None, ScriptedBackend(['No problem identified.']), [], AnalysisConfig())


def test_unparseable_final_response():
    backend = ScriptedBackend(['Problem Identified: a\nHow to resolve:\n1) b', 'I am not sure.'])
    with pytest.raises(UnparseableOutput):
        analyze_group(_group(8), backend, [], AnalysisConfig())


def test_detections_reach_report_and_prompt():
    records = [EventRecord(BASE + timedelta(seconds=i), '4625', 'Security', 'failed logon for admin')
               for i in range(5)]
    backend = ScriptedBackend(['No problem identified.'])
    report = analyze_group(LogGroup(0, records, GroupBasis.SHARED_SOURCE_WINDOW), backend, default_rules(),
                           AnalysisConfig())
    assert not report.problem_identified
    assert [d.rule_id for d in report.detections] == ['brute_force']
    assert backend.requests[0].user_content.startswith('Pre-detection flags: brute_force (5 matching)')


def test_analyze_groups_keeps_order():
    groups = [LogGroup(i, [EventRecord(BASE + timedelta(minutes=i), str(i), f'App{i}', f'message {i}')],
                       GroupBasis.SINGLETON) for i in range(12)]
    backend = MockBackend({'message 3': CPU_OUTPUT, 'message 7': VSS_OUTPUT})
    reports = analyze_groups(groups, backend, [], AnalysisConfig(), parallel=4)
    assert [r.problem_identified for r in reports] == [i in (3, 7) for i in range(12)]
    assert reports[7].problem.startswith('svchost error')


def test_report_to_dict_field_order():
    report = analyze_group(_group(2), ScriptedBackend([CPU_OUTPUT]), [], AnalysisConfig())
    values = report_to_dict(report, 3)
    assert list(values) == ['group_id', 'problem_identified', 'problem', 'remediation', 'chunks_used', 'detections',
                            'raw_final_response']
    assert values['group_id'] == 3
    assert len(values['remediation']) == 6


def test_estimate_cost():
    assert estimate_cost(0, CostModel(2, 0.001)) == (0, 0)
    seconds, dollars = estimate_cost(100, CostModel(2, 0.001))
    assert seconds == 200
    assert dollars == pytest.approx(0.1)
    with pytest.raises(ValueError):
        estimate_cost(-1, CostModel(2, 0.001))
    with pytest.raises(ValueError):
        CostModel(0, 0.001)


def test_projection_closure():
    model = CostModel.from_projection(600000, 209 * 86400, 7085.43)
    assert model.seconds_per_request == pytest.approx(30.1, rel=0.01)
    seconds, dollars = estimate_cost(600000, model)
    assert seconds / 86400 == pytest.approx(209, rel=0.01)
    assert dollars == pytest.approx(7085.43, rel=0.01)
    seconds, dollars = estimate_cost(600000, CostModel(30.1, 0.0118))
    assert seconds / 86400 == pytest.approx(209, rel=0.01)
    assert dollars == pytest.approx(7085.43, rel=0.01)


@given(a=integers(0, 10 ** 6), b=integers(0, 10 ** 6), seconds=floats(0.01, 100), dollars=floats(0, 1))
def test_estimate_is_linear(a, b, seconds, dollars):
    model = CostModel(seconds, dollars)
    total = estimate_cost(a + b, model)
    parts = tuple(x + y for x, y in zip(estimate_cost(a, model), estimate_cost(b, model)))
    assert total == pytest.approx(parts)
