"""
Evaluation Report Model for the MTS Domain Adaptation toolkit
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    """
    Per-class recall and open-set aggregates

    per_class_acc holds alpha_k for k = 1..K+1, the last entry being the
    unknown class.
    """

    per_class_acc: tuple
    os: float
    os_star: float
    unk: float
    confusion: np.ndarray
    n_evaluated: int

    @property
    def num_known(self):
        return len(self.per_class_acc) - 1

    def rows(self):
        """(metric, value) pairs in report order"""
        rows = [('os', self.os), ('os_star', self.os_star), ('unk', self.unk)]
        for k, acc in enumerate(self.per_class_acc, start=1):
            name = 'acc_unknown' if k == len(self.per_class_acc) else f'acc_class_{k}'
            rows.append((name, acc))
        rows.append(('n_evaluated', self.n_evaluated))
        return rows

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return (self.per_class_acc == other.per_class_acc
                and self.os == other.os and self.os_star == other.os_star and self.unk == other.unk
                and self.n_evaluated == other.n_evaluated
                and np.array_equal(self.confusion, other.confusion))
