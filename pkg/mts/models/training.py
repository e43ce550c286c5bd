"""
Training Models for the MTS Domain Adaptation toolkit
Similarity weights, triplets, per-step results and epoch history
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from mts.errors import ContractError

HISTORY_FIELDS = ('epoch', 'loss_theta1', 'loss_theta2a', 'loss_theta2b', 'loss_mse', 'os', 'os_star', 'unk')


@dataclass(frozen=True)
class BatchWeights:
    """Per-target-sample head probabilities p and similarity w = row max of p"""

    p: np.ndarray
    w: np.ndarray

    @classmethod
    def from_probabilities(cls, p):
        p = np.array(p, dtype=np.float64)
        return cls(p=p, w=p.max(axis=1))

    @classmethod
    def uniform(cls, n, num_known):
        return cls(p=np.ones((n, num_known)), w=np.ones(n))

    def __len__(self):
        return self.w.size


@dataclass(frozen=True)
class Triplet:
    """Source exemplar, most-known target exemplar and most-unknown target exemplar"""

    pi1: np.ndarray
    pi2: np.ndarray
    pi3: np.ndarray
    source_index: int
    known_index: int
    unknown_index: int
    degenerate: bool = False

    def stacked(self):
        """3 x d matrix with rows pi1, pi2, pi3"""
        return np.vstack([self.pi1, self.pi2, self.pi3])


@dataclass
class StepResult:
    """Objective values measured at the parameters before an update"""

    objective: float
    components: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss_theta1: float
    loss_theta2a: float
    loss_theta2b: float
    loss_mse: float
    os: float
    os_star: float
    unk: float

    def as_dict(self):
        return asdict(self)


class TrainHistory:
    """Ordered per-epoch records; one record per epoch"""

    def __init__(self, records=None):
        self.records = []
        for record in records or []:
            self.append(record)

    def append(self, record):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ContractError(
                f"History epochs must increase: {record.epoch} after {self.records[-1].epoch}")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        if not isinstance(other, TrainHistory):
            return NotImplemented
        return self.records == other.records

    def last(self):
        return self.records[-1] if self.records else None
