"""
Checkpoint Repository for the MTS Domain Adaptation toolkit
Flat-text persistence of trained models, exact for float64 values
"""

import logging
import os

import numpy as np

from mts.engine.nn import GROUP_IDS, NetworkBundle, ParamGroup
from mts.errors import DataError, ParseError
from mts.models.trained_model import TrainedModel
from mts.repositories.dataset_repository import format_float

logger = logging.getLogger(__name__)

MAGIC = 'mts-checkpoint 1'
META_KEYS = ('kind', 'input_dim', 'num_known', 'shared_extractor', 'threshold',
             'inference', 'similarity_threshold')


class CheckpointRepository:
    """
    Repository for model checkpoints

    Layout: a magic line, one 'key value' line per metadata field, then for
    every group a 'group <id> <layer count>' line followed by
    'layer <index> <weight|bias> <rows> <cols>' lines, each followed by its
    rows of space-separated values. An aliased extractor is stored once.
    """

    def save(self, model, path):
        """
        Write a checkpoint

        Args:
            model (TrainedModel): Model to write
            path (str): Destination file
        """
        bundle = model.bundle
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        lines = [MAGIC,
                 f"kind {model.kind}",
                 f"input_dim {bundle.input_dim}",
                 f"num_known {bundle.num_known}",
                 f"shared_extractor {int(bundle.shared_extractor)}",
                 f"threshold {format_float(model.threshold)}",
                 f"inference {model.inference}",
                 f"similarity_threshold {format_float(model.similarity_threshold)}"]
        for gid in GROUP_IDS:
            if gid == 'f2' and bundle.shared_extractor:
                continue
            group = bundle.group(gid)
            lines.append(f"group {gid} {len(group.layers)}")
            for index, (weight, bias) in enumerate(group.layers):
                for kind, tensor in (('weight', weight), ('bias', bias)):
                    rows, cols = tensor.shape
                    lines.append(f"layer {index} {kind} {rows} {cols}")
                    lines.extend(' '.join(format_float(v) for v in row) for row in tensor.values)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write('\n'.join(lines) + '\n')
        logger.info(f"Saved checkpoint to {path}")

    def load(self, path):
        """
        Read a checkpoint

        Args:
            path (str): Checkpoint file

        Returns:
            TrainedModel: Restored model
        """
        if not os.path.exists(path):
            raise DataError(f"Checkpoint not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().split('\n')
        if lines and lines[-1] == '':
            lines.pop()
        cursor = _Cursor(lines, path)
        if cursor.next() != MAGIC:
            raise ParseError("not an MTS checkpoint", path=path, line=cursor.line)

        meta = {}
        for key in META_KEYS:
            parts = cursor.next().split(' ')
            if len(parts) != 2 or parts[0] != key:
                raise ParseError(f"expected '{key} <value>'", path=path, line=cursor.line)
            meta[key] = parts[1]
        try:
            shared = bool(int(meta['shared_extractor']))
            input_dim = int(meta['input_dim'])
            num_known = int(meta['num_known'])
            threshold = float(meta['threshold'])
            similarity_threshold = float(meta['similarity_threshold'])
        except ValueError:
            raise ParseError("malformed metadata value", path=path, line=cursor.line)

        groups = {}
        while not cursor.done():
            parts = cursor.next().split(' ')
            if len(parts) != 3 or parts[0] != 'group' or parts[1] not in GROUP_IDS:
                raise ParseError("expected 'group <id> <layers>'", path=path, line=cursor.line)
            gid = parts[1]
            layers = []
            for index in range(_int(parts[2], cursor)):
                weight = self._read_matrix(cursor, index, 'weight')
                bias = self._read_matrix(cursor, index, 'bias')
                layers.append((weight, bias))
            groups[gid] = ParamGroup(gid, layers)

        expected = [gid for gid in GROUP_IDS if not (shared and gid == 'f2')]
        if sorted(groups) != sorted(expected):
            raise ParseError(f"groups {sorted(groups)} do not match {sorted(expected)}", path=path, line=cursor.line)
        bundle = NetworkBundle(groups, input_dim, num_known, shared_extractor=shared)
        logger.info(f"Loaded checkpoint from {path}")
        return TrainedModel(bundle, kind=meta['kind'], threshold=threshold,
                            inference=meta['inference'], similarity_threshold=similarity_threshold)

    def _read_matrix(self, cursor, index, kind):
        parts = cursor.next().split(' ')
        if len(parts) != 5 or parts[0] != 'layer' or parts[1] != str(index) or parts[2] != kind:
            raise ParseError(f"expected 'layer {index} {kind} <rows> <cols>'", path=cursor.path, line=cursor.line)
        rows, cols = _int(parts[3], cursor), _int(parts[4], cursor)
        values = np.zeros((rows, cols))
        for r in range(rows):
            fields = cursor.next().split(' ')
            if len(fields) != cols:
                raise ParseError(f"expected {cols} values", path=cursor.path, line=cursor.line)
            try:
                values[r] = [float(v) for v in fields]
            except ValueError:
                raise ParseError("non-numeric value", path=cursor.path, line=cursor.line)
        return values


class _Cursor:
    """Line reader that remembers the 1-based line number"""

    def __init__(self, lines, path):
        self.lines = lines
        self.path = path
        self.line = 0

    def done(self):
        return self.line >= len(self.lines)

    def next(self):
        if self.done():
            raise ParseError("unexpected end of file", path=self.path, line=self.line + 1)
        self.line += 1
        return self.lines[self.line - 1]


def _int(text, cursor):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"'{text}' is not an integer", path=cursor.path, line=cursor.line)


# Singleton instance
checkpoint_repository = CheckpointRepository()
