# pylint: disable=too-many-arguments,redefined-builtin
import json
import logging
import sys
from dataclasses import replace
from typing import List, Optional, Sequence

import click

from loganvil import __version__
from loganvil.analyze import AnalysisConfig, CostModel, analyze_groups, estimate_cost, report_to_dict
from loganvil.backend import BackendConfig, HttpBackend, LogAnvilBackend, mock_from_fixture
from loganvil.config import PipelineConfig
from loganvil.core import ModelClass
from loganvil.correlate import community_indices, flag_repetitions, groups_from_indices
from loganvil.errors import ConfigError, LogAnvilError
from loganvil.evaluation import load_responses, render_report, write_csv_tables
from loganvil.forge import (REFERENCE_MODELS, assemble_dataset, emit_training_config, group_input, label_inputs,
                            normalize_model_name, select_tail_groups, stage1_generate, validate_dataset,
                            write_jsonl)
from loganvil.ingest import LogFormat, load_file, render_line, split_by_machine
from loganvil.predetect import default_rules, load_rules, scan

logger = logging.getLogger('loganvil')

SECONDS_PER_DAY = 86400
FORMAT_CHOICES = click.Choice([f.value for f in LogFormat])


class LogAnvilGroup(click.Group):
    """ Turns domain errors into one-line diagnostics with exit code 1 """

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (LogAnvilError, OSError, ValueError) as error:
            raise click.ClickException(' '.join(str(error).split()) or type(error).__name__) from error


def _override(settings, **values):
    """ Command line values win over configuration values, None means not given """
    given = {key: value for key, value in values.items() if value is not None}
    return replace(settings, **given) if given else settings


def _emit(text: str, out: Optional[str]):
    if out is None:
        click.echo(text)
        return
    with open(out, 'w', encoding='utf-8', newline='\n') as file:
        file.write(text + '\n')
    logger.info(f'Wrote {out}')


def _dump(value) -> str:
    return json.dumps(value, indent=2, ensure_ascii=False)


def _load_sorted(config: PipelineConfig, input_path: str, log_format: Optional[str]):
    """ Records in chronological order plus each one's position in the file """
    log_file = load_file(input_path, LogFormat(log_format) if log_format else config.log_format)
    order = sorted(range(len(log_file.records)), key=lambda i: log_file.records[i].timestamp)
    return [log_file.records[i] for i in order], order


def _correlation(config: PipelineConfig, window: Optional[int], repetition_threshold: Optional[int]):
    return _override(config.correlation, window_seconds=window, repetition_threshold=repetition_threshold)


def _groups(records, correlation):
    components = community_indices(records, correlation)
    return components, flag_repetitions(groups_from_indices(records, components), correlation)


def _rules(config: PipelineConfig, rules_path: Optional[str]):
    path = rules_path or config.rules_path
    return load_rules(path) if path else default_rules()


def _backend(config: PipelineConfig, backend: Optional[str], parallel: Optional[int],
             endpoint: Optional[str] = None, model_id: Optional[str] = None) -> LogAnvilBackend:
    if backend is not None and backend.startswith('mock:'):
        return mock_from_fixture(backend[len('mock:'):], max_in_flight=parallel or 4)
    if backend is not None and backend != 'http':
        raise click.BadParameter(f'{backend!r} is neither mock:<fixture.json> nor http', param_hint='--backend')
    if backend is None and config.mock_fixture is not None:
        return mock_from_fixture(config.mock_fixture, max_in_flight=parallel or 4)
    http_config = config.backend_config or BackendConfig()
    http_config = _override(http_config, endpoint_url=endpoint, model_id=model_id, max_in_flight=parallel)
    if not http_config.endpoint_url or not http_config.model_id:
        raise ConfigError('no backend configured, use --backend mock:<fixture.json> or configure an http endpoint')
    return HttpBackend(http_config)


def _split_models(models: str) -> List[str]:
    return [model.strip() for model in models.split(',') if model.strip()]


@click.group(cls=LogAnvilGroup)
@click.version_option(__version__, prog_name='loganvil')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pipeline configuration JSON")
@click.option('--verbose', '-v', is_flag=True, help="Debug logging to stderr")
@click.pass_context
def loganvil_cli(ctx, config_path, verbose):
    """ Windows event log analysis and fine-tuning dataset pipeline """
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    if verbose and not logger.handlers:
        logger.addHandler(logging.StreamHandler(sys.stderr))
    ctx.obj = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()


@loganvil_cli.command()
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--format', 'log_format', type=FORMAT_CHOICES, default=None, help="Log line format")
@click.option('--cap', type=click.IntRange(min=1), default=None, help="Records kept per machine")
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def ingest(config, input_path, log_format, cap, out):
    """ Parse a log file and split it per machine """
    records, _ = _load_sorted(config, input_path, log_format)
    splits = split_by_machine(records, cap or config.cap)
    _emit(_dump({machine: [render_line(r) for r in split] for machine, split in splits.items()}), out)


@loganvil_cli.command()
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--format', 'log_format', type=FORMAT_CHOICES, default=None)
@click.option('--window', type=click.IntRange(min=1), default=None, help="Correlation window in seconds")
@click.option('--repetition-threshold', type=click.IntRange(min=2), default=None)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def correlate(config, input_path, log_format, window, repetition_threshold, out):
    """ Group related records, indices point at file lines (blank lines skipped) """
    records, order = _load_sorted(config, input_path, log_format)
    components, groups = _groups(records, _correlation(config, window, repetition_threshold))
    _emit(_dump([{'group_id': group.group_id,
                  'indices': sorted(order[i] for i in indices),
                  'basis': group.basis.value} for (indices, _), group in zip(components, groups)]), out)


@loganvil_cli.command()
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--format', 'log_format', type=FORMAT_CHOICES, default=None)
@click.option('--rules', 'rules_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def detect(config, input_path, log_format, rules_path, out):
    """ Run the rule based pre-detection over every correlated group """
    records, _ = _load_sorted(config, input_path, log_format)
    _, groups = _groups(records, config.correlation)
    rules = _rules(config, rules_path)
    result = []
    for group in groups:
        result.append({'group_id': group.group_id,
                       'detections': [{'rule_id': d.rule_id, 'category': d.category.value,
                                       'triggering_indices': list(d.triggering_indices)}
                                      for d in scan(group, rules)]})
    _emit(_dump(result), out)


@loganvil_cli.command()
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--format', 'log_format', type=FORMAT_CHOICES, default=None)
@click.option('--rules', 'rules_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--backend', default=None, help="mock:<fixture.json> or http")
@click.option('--endpoint', default=None, help="Chat-completion endpoint for the http backend")
@click.option('--model-id', default=None)
@click.option('--chunk-size', type=click.IntRange(min=1), default=None)
@click.option('--parallel', type=click.IntRange(min=1), default=None, help="Groups analysed concurrently")
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def analyze(config, input_path, log_format, rules_path, backend, endpoint, model_id, chunk_size, parallel, out):
    """ Analyse every correlated group with the language model """
    records, _ = _load_sorted(config, input_path, log_format)
    _, groups = _groups(records, config.correlation)
    cfg: AnalysisConfig = _override(config.analysis, chunk_size=chunk_size)
    model = _backend(config, backend, parallel, endpoint, model_id)
    reports = analyze_groups(groups, model, _rules(config, rules_path), cfg, parallel)
    out = out or config.outputs.get('report')
    _emit(_dump([report_to_dict(report, group.group_id) for report, group in zip(reports, groups)]), out)


@loganvil_cli.command(name='gen-dataset')
@click.option('--target', type=click.IntRange(min=1), default=None, help="Synthetic logs to generate")
@click.option('--batch', type=click.IntRange(min=1), default=None, help="Logs requested per generation call")
@click.option('--examples', 'examples_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help="Real logs shown to the generator")
@click.option('--groups-from', type=click.Path(exists=True, dir_okay=False), default=None,
              help="Real logs correlated into the final group examples")
@click.option('--tail-groups', type=click.IntRange(min=0), default=None)
@click.option('--backend', default=None, help="mock:<fixture.json> or http")
@click.option('--parallel', type=click.IntRange(min=1), default=None)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def gen_dataset(config, target, batch, examples_path, groups_from, tail_groups, backend, parallel, out):
    """ Generate, label and write the fine-tuning dataset """
    out = out or config.outputs.get('dataset')
    if out is None:
        raise click.UsageError('--out is required when no dataset output is configured')
    example_logs = load_file(examples_path).records if examples_path else ()
    cfg = _override(config.forge, target_count=target, generation_batch=batch, correlated_tail_groups=tail_groups,
                    example_logs=example_logs)
    tail = []
    if cfg.correlated_tail_groups:
        if groups_from is None:
            raise click.UsageError('--groups-from is required when tail groups are requested')
        records, _ = _load_sorted(config, groups_from, None)
        tail = select_tail_groups(_groups(records, config.correlation)[1], cfg.correlated_tail_groups)
    model = _backend(config, backend, parallel)
    generated = stage1_generate(model, cfg)
    inputs = [render_line(r) for r in generated] + [group_input(g) for g in tail]
    outputs = label_inputs(model, inputs, parallel)
    count = write_jsonl(assemble_dataset(generated, tail, outputs, cfg), out)
    click.echo(f'Wrote {count} examples to {out}')


@loganvil_cli.command()
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--format', 'log_format', type=FORMAT_CHOICES, default=None)
@click.option('--group', 'as_group', is_flag=True, help="Label the whole file as one correlated group")
@click.option('--backend', default=None, help="mock:<fixture.json> or http")
@click.option('--parallel', type=click.IntRange(min=1), default=None)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def label(config, input_path, log_format, as_group, backend, parallel, out):
    """ Write output statements for log lines """
    lines = [render_line(r) for r in load_file(input_path, LogFormat(log_format) if log_format else config.log_format)
             .records]
    inputs = ['\n'.join(lines)] if as_group and lines else lines
    outputs = label_inputs(_backend(config, backend, parallel), inputs, parallel)
    _emit(_dump([{'input': text, 'output': outputs[text]} for text in inputs]), out)


@loganvil_cli.command()
@click.argument('path', type=click.Path(exists=True, dir_okay=False))
@click.option('--min-count', type=click.IntRange(min=1), default=5000, help="Recommended minimum dataset size")
@click.option('--tail-groups', type=click.IntRange(min=0), default=None, help="Expected correlated group examples")
def validate(path, min_count, tail_groups):
    """ Check a JSONL fine-tuning dataset """
    report = validate_dataset(path, min_count, tail_groups)
    click.echo(report.summary())
    if not report.ok:
        raise click.ClickException(f'dataset failed: {", ".join(report.failed_checks())}')


@loganvil_cli.command(name='emit-config')
@click.option('--model', 'model_name', required=True)
@click.option('--class', 'model_class', type=click.Choice([c.value for c in ModelClass]), default=None,
              help="slm or llm, known models default to their catalogue class")
@click.option('--max-tokens', type=click.IntRange(min=1), required=True)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def emit_config(config, model_name, model_class, max_tokens, out):
    """ Write the LoRA training configuration for a model """
    if model_class is None:
        known = REFERENCE_MODELS.get(normalize_model_name(model_name))
        if known is None:
            raise click.UsageError(f'--class is required for {model_name}')
        model_class = known.value
    training = emit_training_config(model_name, ModelClass(model_class), max_tokens)
    _emit(_dump(training.to_dict()), out or config.outputs.get('training_config'))


@loganvil_cli.command()
@click.option('--responses', 'responses_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--models', default=','.join(REFERENCE_MODELS), help="Comma separated model names in table order")
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@click.option('--csv', 'csv_dir', type=click.Path(file_okay=False), default=None, help="Also write one CSV per table")
@click.pass_obj
def evaluate(config, responses_path, models, out, csv_dir):
    """ Aggregate expert questionnaire responses into tables """
    responses = load_responses(responses_path)
    model_names = _split_models(models)
    _emit(render_report(responses, model_names), out or config.outputs.get('evaluation'))
    if csv_dir:
        write_csv_tables(responses, model_names, csv_dir)


@loganvil_cli.command()
@click.option('--items', type=click.IntRange(min=0), required=True)
@click.option('--seconds-per', type=click.FloatRange(min=0, min_open=True), required=True)
@click.option('--dollars-per', type=click.FloatRange(min=0), required=True)
def estimate(items, seconds_per, dollars_per):
    """ Project time and cost of analysing items one request each """
    seconds, dollars = estimate_cost(items, CostModel(seconds_per, dollars_per))
    click.echo(f'{items} items: {seconds:.0f} s ({seconds / SECONDS_PER_DAY:.1f} days), ${dollars:.2f}')


def run(argv: Optional[Sequence[str]] = None) -> int:
    """ Run the command line and return its exit code instead of exiting """
    try:
        loganvil_cli.main(args=list(argv) if argv is not None else None, prog_name='loganvil')
    except SystemExit as exit_:
        return exit_.code if isinstance(exit_.code, int) else (0 if exit_.code is None else 1)
    return 0


if __name__ == '__main__':
    loganvil_cli()
