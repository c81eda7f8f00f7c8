"""Summarize the evaluation reports of several experiments as a CSV table and a grouped bar chart in SVG."""
import csv
import io
import pathlib
import xml.sax.saxutils
from typing import List, Sequence

import icontract

from qocr.errors import EmptyDatasetError
from qocr.metrics import EvalReport, read_reports

SUMMARY_HEADER = ['experiment', 'dataset', 'samples', 'total_chars', 'total_distance', 'crr', 'wrr']

_BAR_WIDTH = 24
_BAR_GAP = 4
_GROUP_GAP = 28
_PLOT_HEIGHT = 240
_MARGIN_LEFT = 56
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 72
_MARGIN_RIGHT = 24

_CRR_COLOR = '#2f5597'
_WRR_COLOR = '#c55a11'


class Experiment:
    """Associate an evaluation report with the name of its experiment."""

    def __init__(self, name: str, report: EvalReport) -> None:
        """Initialize with the given values."""
        self.name = name
        self.report = report


def collect_experiments(paths: Sequence[pathlib.Path]) -> List[Experiment]:
    """
    Read the evaluation CSVs in the given order.

    The experiment is named after the file stem; a file with several rows yields one experiment per row named
    ``{stem}/{dataset}``.

    :raise ParseError: if a CSV is malformed
    :raise EmptyDatasetError: if there is no report at all
    """
    experiments = []  # type: List[Experiment]
    for path in paths:
        reports = read_reports(path)
        for report in reports:
            name = path.stem if len(reports) == 1 else "{}/{}".format(path.stem, report.dataset)
            experiments.append(Experiment(name=name, report=report))

    if not experiments:
        raise EmptyDatasetError("Expected at least one evaluation report, but the inputs contain none.")

    return experiments


def summary_csv(experiments: Sequence[Experiment]) -> str:
    """Render the experiments as a CSV table in the input order."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(SUMMARY_HEADER)
    for experiment in experiments:
        writer.writerow([experiment.name] + experiment.report.to_row())

    return buffer.getvalue()


def _fmt(value: float) -> str:
    return "{:.2f}".format(value)


@icontract.require(lambda experiments: len(experiments) >= 1)
def render_chart(experiments: Sequence[Experiment], title: str = "Recognition rates") -> str:
    """
    Draw one group per experiment with a CRR and a WRR bar on a percent axis.

    The output only depends on the inputs, so identical inputs give identical bytes.
    """
    group_width = 2 * _BAR_WIDTH + _BAR_GAP
    plot_width = len(experiments) * group_width + (len(experiments) + 1) * _GROUP_GAP
    width = _MARGIN_LEFT + plot_width + _MARGIN_RIGHT
    height = _MARGIN_TOP + _PLOT_HEIGHT + _MARGIN_BOTTOM
    baseline = _MARGIN_TOP + _PLOT_HEIGHT

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">'.format(
            width, height),
        '<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>'.format(width, height),
        '<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>'.format(
            _fmt(width / 2.0), _MARGIN_TOP - 18, xml.sax.saxutils.escape(title)),
    ]

    for percent in range(0, 101, 20):
        y = baseline - _PLOT_HEIGHT * percent / 100.0
        lines.append('<line class="grid" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#d9d9d9" stroke-width="1"/>'.format(
            _MARGIN_LEFT, _fmt(y), _MARGIN_LEFT + plot_width, _fmt(y)))
        lines.append('<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}%</text>'.format(
            _MARGIN_LEFT - 6, _fmt(y + 3), percent))

    lines.append('<line class="axis" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#000000" stroke-width="1"/>'.format(
        _MARGIN_LEFT, _MARGIN_TOP, baseline))
    lines.append('<line class="axis" x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#000000" stroke-width="1"/>'.format(
        _MARGIN_LEFT, baseline, _MARGIN_LEFT + plot_width))

    for index, experiment in enumerate(experiments):
        left = _MARGIN_LEFT + _GROUP_GAP + index * (group_width + _GROUP_GAP)
        for offset, (metric, value, color) in enumerate(
            (('crr', experiment.report.crr, _CRR_COLOR), ('wrr', experiment.report.wrr, _WRR_COLOR))):
            bar_height = _PLOT_HEIGHT * value
            x = left + offset * (_BAR_WIDTH + _BAR_GAP)
            lines.append('<rect class="bar {}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>'.format(
                metric, x, _fmt(baseline - bar_height), _BAR_WIDTH, _fmt(bar_height), color))
            lines.append(
                '<text x="{}" y="{}" font-family="sans-serif" font-size="8" text-anchor="middle">{}</text>'.format(
                    _fmt(x + _BAR_WIDTH / 2.0), _fmt(baseline - bar_height - 3), _fmt(100.0 * value)))

        lines.append(
            '<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>'.format(
                _fmt(left + group_width / 2.0), baseline + 16, xml.sax.saxutils.escape(experiment.name)))

    legend_y = height - 20
    for offset, (label, color) in enumerate((('CRR', _CRR_COLOR), ('WRR', _WRR_COLOR))):
        x = _MARGIN_LEFT + offset * 80
        lines.append('<rect class="legend" x="{}" y="{}" width="12" height="12" fill="{}"/>'.format(
            x, legend_y - 10, color))
        lines.append('<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>'.format(
            x + 18, legend_y, label))

    lines.append('</svg>')
    return '\n'.join(lines) + '\n'


def write_report(experiments: Sequence[Experiment], directory: pathlib.Path) -> None:
    """Write ``summary.csv`` and ``chart.svg`` into the directory."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / 'summary.csv').write_bytes(summary_csv(experiments).encode('utf-8'))
    (directory / 'chart.svg').write_bytes(render_chart(experiments).encode('utf-8'))
