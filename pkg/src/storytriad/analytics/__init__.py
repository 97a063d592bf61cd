"""Workshop measurement instruments and paired-sample statistics."""

from .report import AnalysisReport, ScaleResponse, analyze_workshop, read_responses
from .scales import ChsScore, score_chs, score_tssf, score_umux_lite
from .stats import (
    PairedTestResult,
    ReliabilityResult,
    cronbach_alpha,
    paired_t,
    regularized_incomplete_beta,
    t_to_p,
)

__all__ = [
    "AnalysisReport",
    "ChsScore",
    "PairedTestResult",
    "ReliabilityResult",
    "ScaleResponse",
    "analyze_workshop",
    "cronbach_alpha",
    "paired_t",
    "read_responses",
    "regularized_incomplete_beta",
    "score_chs",
    "score_tssf",
    "score_umux_lite",
    "t_to_p",
]
