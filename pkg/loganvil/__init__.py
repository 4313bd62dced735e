__version__ = '0.1.0'

from loganvil.analyze import AnalysisConfig, analyze_group, analyze_groups, estimate_cost, parse_model_output
from loganvil.config import PipelineConfig
from loganvil.core import AnalysisReport, Detection, EventRecord, FineTuneExample, LogGroup
from loganvil.correlate import CorrelationConfig, build_edges, communities, flag_repetitions
from loganvil.forge import ForgeConfig, emit_training_config, stage1_generate, stage2_label, validate_dataset
from loganvil.ingest import LogFormat, load_file, parse_line, split_by_machine
from loganvil.predetect import Rule, default_rules, scan
