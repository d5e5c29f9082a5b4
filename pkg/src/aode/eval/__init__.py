"""Transcript normalization, word error rate and multi-domain aggregation."""

from .aggregate import EvalReport, eval_report, format_sig, geometric_mean
from .normalize import NormalizationConfig, default_config, load_config, normalize_text
from .wer import BACKEND, EmptyReference, WerBreakdown, corpus_wer, word_error_rate

__all__ = [
    "BACKEND",
    "EmptyReference",
    "EvalReport",
    "NormalizationConfig",
    "WerBreakdown",
    "corpus_wer",
    "default_config",
    "eval_report",
    "format_sig",
    "geometric_mean",
    "load_config",
    "normalize_text",
    "word_error_rate",
]
