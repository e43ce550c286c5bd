"""
Dataset Repository for the MTS Domain Adaptation toolkit
CSV persistence of source and target datasets
"""

import csv
import logging
import os

import numpy as np

from mts.errors import DataError, ParseError
from mts.models.dataset import DOMAINS, SOURCE, Dataset

logger = logging.getLogger(__name__)


def format_float(value):
    """Shortest decimal text that reads back to the identical float64"""
    return repr(float(value))


class DatasetRepository:
    """
    Repository for dataset files

    File layout: header f0,...,f{d-1},label,domain; one sample per row;
    UTF-8 with LF newlines.
    """

    def save_csv(self, dataset, path):
        """
        Write a dataset

        Args:
            dataset (Dataset): Dataset to write
            path (str): Destination file
        """
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        header = [f"f{i}" for i in range(dataset.dim)] + ['label', 'domain']
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row, label, tag in zip(dataset.x, dataset.y, dataset.domain):
                writer.writerow([format_float(v) for v in row] + [int(label), tag])
        logger.info(f"Saved {len(dataset)} samples to {path}")

    def load_csv(self, path, num_known):
        """
        Read a dataset

        Args:
            path (str): Source file
            num_known (int): Number of known classes K; labels must lie in 1..K+1

        Returns:
            Dataset: Parsed dataset

        Raises:
            DataError: File missing
            ParseError: Malformed content, with the offending line number
        """
        if not os.path.exists(path):
            raise DataError(f"Dataset file not found: {path}")
        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise ParseError("missing header", path=path, line=1)
            dim = len(header) - 2
            expected = [f"f{i}" for i in range(dim)] + ['label', 'domain']
            if dim < 1 or header != expected:
                raise ParseError(f"header must be {','.join(expected) if dim >= 1 else 'f0,...,label,domain'}",
                                 path=path, line=1)
            rows, labels, domains = [], [], []
            for line_number, fields in enumerate(reader, start=2):
                if len(fields) != dim + 2:
                    raise ParseError(f"expected {dim + 2} fields, got {len(fields)}", path=path, line=line_number)
                try:
                    values = [float(v) for v in fields[:dim]]
                except ValueError:
                    raise ParseError("non-numeric feature value", path=path, line=line_number)
                if not all(np.isfinite(values)):
                    raise ParseError("non-finite feature value", path=path, line=line_number)
                try:
                    label = int(fields[dim])
                except ValueError:
                    raise ParseError(f"label '{fields[dim]}' is not an integer", path=path, line=line_number)
                tag = fields[dim + 1]
                if tag not in DOMAINS:
                    raise ParseError(f"unknown domain '{tag}'", path=path, line=line_number)
                if not 1 <= label <= num_known + 1:
                    raise ParseError(f"label {label} outside 1..{num_known + 1}", path=path, line=line_number)
                if tag == SOURCE and label == num_known + 1:
                    raise ParseError("source sample carries the unknown label", path=path, line=line_number)
                rows.append(values)
                labels.append(label)
                domains.append(tag)
        x = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
        logger.info(f"Loaded {len(rows)} samples from {path}")
        return Dataset(x, labels, domains, num_known)


# Singleton instance
dataset_repository = DatasetRepository()
