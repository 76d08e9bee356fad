"""Annotation-quality metrics and report generation."""

from .metrics import mpjpe, percentile, yield_rate
from .report import QualityReport, ReportRow, build_report, report_to_dict, report_to_table

__all__ = [
    "mpjpe",
    "percentile",
    "yield_rate",
    "QualityReport",
    "ReportRow",
    "build_report",
    "report_to_dict",
    "report_to_table",
]
