"""Utility functions for formatting patterns, reports and summaries."""

from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from rich.table import Table

from ..variational.fitting import FitReport
from .io import PERCENTILES


def format_pairs(pairs: Iterable[Tuple[int, int]]) -> str:
    """Format index pairs as "(1,4) (2,4)", or "none" when empty.

    Args:
        pairs: (j, k) pairs.

    Returns:
        Space-separated pairs.
    """
    text = " ".join(f"({j},{k})" for j, k in sorted(pairs))
    return text or "none"


def format_float(value: Union[int, float, None], precision: int = 6) -> str:
    """Format a float compactly.

    Args:
        value: Value to format.
        precision: Significant digits.

    Returns:
        Formatted string, "N/A" for None and "inf" for infinities.
    """
    if value is None:
        return "N/A"
    if not np.isfinite(value):
        return "inf" if value > 0 else "-inf" if value < 0 else "nan"
    return f"{value:.{precision}g}"


def format_ordering(perm: Sequence[int]) -> str:
    return " ".join(str(v) for v in perm)


def fit_report_table(report: FitReport) -> Table:
    """Two-column summary of a fit."""
    table = Table(title="Fit report", show_header=False)
    table.add_column("quantity", style="bold")
    table.add_column("value", justify="right")
    rows: List[Tuple[str, str]] = [
        ("method", report.method),
        ("converged", "yes" if report.converged else "no"),
        ("iterations", str(report.iterations)),
        ("objective", format_float(report.final_objective, 10)),
        ("gradient norm", format_float(report.gradient_norm, 3)),
        ("variance diagnostic", format_float(report.variance_diagnostic, 3)),
        ("log normalizing constant", format_float(report.log_normalizing_constant, 10)),
    ]
    if report.clamped_samples:
        rows.append(("clamped samples", str(report.clamped_samples)))
    for name, value in rows:
        table.add_row(name, value)
    return table


def steps_table(
    rows: Iterable[Tuple[int, float, float, bool]], log_evidence: float
) -> Table:
    """Per-step log c, diagnostic and convergence."""
    table = Table(title=f"Assimilation (log evidence {format_float(log_evidence, 10)})")
    table.add_column("step", justify="right")
    table.add_column("log c", justify="right")
    table.add_column("diagnostic", justify="right")
    table.add_column("converged")
    for index, log_c, diagnostic, converged in rows:
        table.add_row(
            str(index),
            format_float(log_c, 8),
            format_float(diagnostic, 3),
            "yes" if converged else "[red]no[/red]",
        )
    return table


def percentile_rich_table(names: Sequence[str], table: np.ndarray, limit: int = 20) -> Table:
    """Percentile summary, truncated to the first ``limit`` coordinates."""
    out = Table(title="Percentiles")
    out.add_column("coordinate")
    for q in PERCENTILES:
        out.add_column(f"p{q}", justify="right")
    for name, row in list(zip(names, table))[:limit]:
        out.add_row(name, *(format_float(v, 4) for v in row))
    if len(names) > limit:
        out.caption = f"{len(names) - limit} more coordinates in the CSV"
    return out
