"""Comparison table format and figure rendering determinism."""

import pytest

from aeckit.errors import EmptyCorpus
from aeckit.reporting import (
    COMPARISON_HEADER,
    ComparisonRow,
    relative_change,
    render_comparison_figures,
    write_comparison,
)

ROWS = [
    ComparisonRow("uncorrected", 0.25, 0.70),
    ComparisonRow("aec", 0.15, 0.80),
    ComparisonRow("aec+ipa+align", 0.10, 0.85),
]


class TestRelativeChange:
    def test_drop(self):
        assert relative_change(0.15, 0.25) == pytest.approx(-0.4)

    def test_zero_baseline(self):
        assert relative_change(0.5, 0.0) == 0.0


class TestComparisonTable:
    def test_layout(self, tmp_path):
        path = tmp_path / "comparison.tsv"
        write_comparison(ROWS, path)
        lines = path.read_text().splitlines()
        assert lines[0].split("\t") == list(COMPARISON_HEADER)
        assert len(lines) == 1 + len(ROWS)
        first = lines[1].split("\t")
        assert first[0] == "uncorrected"
        assert first[3] == "+0.000000"  # baseline change is zero by definition
        last = lines[3].split("\t")
        assert float(last[1]) == pytest.approx(0.10)
        assert float(last[3]) == pytest.approx(-0.6)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(EmptyCorpus):
            write_comparison([], tmp_path / "x.tsv")

    def test_row_validation(self):
        with pytest.raises(ValueError):
            ComparisonRow("", 0.1, 0.5)
        with pytest.raises(ValueError):
            ComparisonRow("x", -0.1, 0.5)
        with pytest.raises(ValueError):
            ComparisonRow("x", 0.1, 1.5)


class TestFigures:
    def test_written_and_byte_stable(self, tmp_path):
        # the determinism audit hashes these files across whole runs
        paths = []
        for trial in range(2):
            wer = tmp_path / ("wer-%d.png" % trial)
            chrf = tmp_path / ("chrf-%d.png" % trial)
            render_comparison_figures(ROWS, wer, chrf)
            paths.append((wer.read_bytes(), chrf.read_bytes()))
        assert paths[0] == paths[1]
        assert paths[0][0][:8] == b"\x89PNG\r\n\x1a\n"

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(EmptyCorpus):
            render_comparison_figures([], tmp_path / "a.png", tmp_path / "b.png")
