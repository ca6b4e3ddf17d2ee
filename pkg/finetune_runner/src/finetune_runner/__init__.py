"""Thin low-rank-adapter fine-tuning runner for instruction JSONL exports."""

from .config import ConfigIssue, TuneConfig, validate_config
from .planning import adapter_parameter_count, plan

__version__ = "0.1.0"
