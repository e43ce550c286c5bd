"""
Run Repository for the MTS Domain Adaptation toolkit
Run directory artifacts: resolved config, history, reports and summary tables
"""

import csv
import logging
import os

from mts.models.training import HISTORY_FIELDS
from mts.repositories.dataset_repository import format_float

logger = logging.getLogger(__name__)

CONFIG_FILE = 'config.cfg'
HISTORY_FILE = 'history.csv'
REPORT_FILE = 'report.csv'
REPORT_TEXT_FILE = 'report.txt'
CHECKPOINT_FILE = 'checkpoint.txt'


def _cell(value):
    if isinstance(value, float):
        return format_float(value)
    return value


class RunRepository:
    """
    Repository for files written into a run directory
    """

    def ensure_dir(self, directory):
        os.makedirs(directory, exist_ok=True)
        return directory

    def write_text(self, path, text):
        self.ensure_dir(os.path.dirname(os.path.abspath(path)))
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        logger.info(f"Wrote {path}")

    def write_rows(self, path, header, rows):
        """Write a CSV file with LF newlines and round-trip float formatting"""
        self.ensure_dir(os.path.dirname(os.path.abspath(path)))
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        logger.info(f"Wrote {path}")

    def write_history(self, path, history):
        """
        Write a training history

        Args:
            path (str): Destination file
            history (TrainHistory): Records, possibly empty
        """
        rows = [[getattr(record, name) for name in HISTORY_FIELDS] for record in history]
        self.write_rows(path, HISTORY_FIELDS, rows)

    def write_report(self, path, report):
        """Write an EvalReport as metric,value rows"""
        self.write_rows(path, ('metric', 'value'), report.rows())


# Singleton instance
run_repository = RunRepository()
