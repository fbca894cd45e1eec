"""Comparison tables and figures for correction runs.

A run produces one evaluation per feature setting plus the uncorrected
baseline. This module lays those out as a delimited table and renders the
two headline metrics as bar charts saved next to it. Rendering uses the
Agg backend with fixed geometry so repeated runs write byte-identical
files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import EmptyCorpus, IoFailure

COMPARISON_HEADER = ("setting", "wer", "chrf", "wer_change")


@dataclass(frozen=True)
class ComparisonRow:
    """One evaluated system: a feature setting or the uncorrected baseline."""

    setting: str
    wer: float
    chrf: float

    def __post_init__(self):
        if not self.setting:
            raise ValueError("setting name must be non-empty")
        if self.wer < 0 or not 0 <= self.chrf <= 1:
            raise ValueError("metric out of range")


def relative_change(value: float, baseline: float) -> float:
    """(value - baseline) / baseline; 0 when the baseline is 0."""
    if baseline == 0:
        return 0.0
    return (value - baseline) / baseline


def write_comparison(rows: Sequence[ComparisonRow], path) -> None:
    """TSV with the baseline in row one and a relative-WER-change column."""
    if not rows:
        raise EmptyCorpus("no comparison rows")
    base = rows[0].wer
    lines = ["\t".join(COMPARISON_HEADER)]
    for row in rows:
        lines.append(
            "%s\t%.6f\t%.6f\t%+.6f"
            % (row.setting, row.wer, row.chrf, relative_change(row.wer, base))
        )
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write comparison %s: %s" % (path, exc))


def _bar_chart(rows, values, ylabel, path):
    fig, ax = plt.subplots(figsize=(7.0, 4.0), dpi=100)
    positions = range(len(rows))
    bars = ax.bar(positions, values, color="#4878a8", width=0.6)
    ax.bar_label(bars, fmt="%.3f", padding=2, fontsize=8)
    ax.set_xticks(list(positions))
    ax.set_xticklabels([row.setting for row in rows], rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_ylim(0, max(values) * 1.2 if max(values) > 0 else 1.0)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    try:
        fig.savefig(path, format="png")
    except OSError as exc:
        raise IoFailure("cannot write figure %s: %s" % (path, exc))
    finally:
        plt.close(fig)


def render_comparison_figures(rows: Sequence[ComparisonRow], wer_path, chrf_path):
    """Bar chart per metric; returns the two paths written."""
    if not rows:
        raise EmptyCorpus("no comparison rows")
    _bar_chart(rows, [row.wer for row in rows], "word error rate", wer_path)
    _bar_chart(rows, [row.chrf for row in rows], "chrF++", chrf_path)
    return wer_path, chrf_path
