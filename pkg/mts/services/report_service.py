"""
Report Service for the MTS Domain Adaptation toolkit
Aggregates evaluation reports over seeds and renders text tables
"""

import logging
from dataclasses import dataclass

import numpy as np
from jinja2 import Environment, PackageLoader, StrictUndefined

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SummaryRow:
    """Mean and standard deviation of OS, OS* and Unk over runs"""

    name: str
    runs: int
    os_mean: float
    os_std: float
    os_star_mean: float
    os_star_std: float
    unk_mean: float
    unk_std: float
    rotation: float = 0.0

    def as_row(self):
        return [self.name, self.rotation, self.runs, self.os_mean, self.os_std,
                self.os_star_mean, self.os_star_std, self.unk_mean, self.unk_std]


SUMMARY_HEADER = ('name', 'rotation', 'runs', 'os_mean', 'os_std', 'os_star_mean',
                  'os_star_std', 'unk_mean', 'unk_std')


def _mean_std(values):
    values = np.asarray(values, dtype=np.float64)
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std


class ReportService:
    """
    Service to summarize and render evaluation results with Jinja templates
    """

    def __init__(self, environment=None):
        """
        Initialize report service

        Args:
            environment: Optional Jinja environment (templates ship in mts/templates)
        """
        self.environment = environment or Environment(
            loader=PackageLoader('mts', 'templates'),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )

    def summarize(self, name, reports, rotation=0.0):
        """
        Aggregate reports of repeated runs

        Args:
            name (str): Row label (variant or method)
            reports (list): EvalReports, one per seed
            rotation (float): Domain gap of the runs

        Returns:
            SummaryRow: Mean / std of the aggregates
        """
        os_mean, os_std = _mean_std([r.os for r in reports])
        star_mean, star_std = _mean_std([r.os_star for r in reports])
        unk_mean, unk_std = _mean_std([r.unk for r in reports])
        return SummaryRow(name=name, runs=len(reports), os_mean=os_mean, os_std=os_std,
                          os_star_mean=star_mean, os_star_std=star_std,
                          unk_mean=unk_mean, unk_std=unk_std, rotation=float(rotation))

    def render_report(self, report, with_confusion=True):
        """Text table of one EvalReport"""
        rows = [(name, value) for name, value in report.rows() if name != 'n_evaluated']
        confusion = report.confusion.tolist() if with_confusion else None
        return self.environment.get_template('report.txt.j2').render(
            report=report, rows=rows, confusion=confusion)

    def render_comparison(self, rows, title='Ablation comparison'):
        """Text table of ablation variants; names the variant with the best mean OS"""
        best = max(rows, key=lambda r: r.os_mean).name if rows else None
        return self.environment.get_template('comparison.txt.j2').render(
            rows=rows, title=title, best=best)

    def benchmark_gaps(self, rows, method='mts', baseline='source_only'):
        """(rotation, mean OS of method - mean OS of baseline) per rotation"""
        by_key = {(r.rotation, r.name): r for r in rows}
        rotations = sorted({r.rotation for r in rows})
        return [(rotation, by_key[(rotation, method)].os_mean - by_key[(rotation, baseline)].os_mean)
                for rotation in rotations
                if (rotation, method) in by_key and (rotation, baseline) in by_key]

    def render_benchmark(self, rows, seeds):
        """Text table of the domain gap sweep"""
        return self.environment.get_template('benchmark.txt.j2').render(
            rows=rows, seeds=seeds, gaps=self.benchmark_gaps(rows))


# Singleton instance
report_service = ReportService()
