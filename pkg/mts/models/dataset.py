"""
Dataset Models for the MTS Domain Adaptation toolkit
Samples, datasets, shift configurations and mini-batches
"""

from dataclasses import dataclass, field

import numpy as np

from mts.errors import ContractError, DataError

SOURCE = 'source'
TARGET = 'target'
DOMAINS = (SOURCE, TARGET)


@dataclass(frozen=True)
class Sample:
    """One labeled feature vector with its domain tag"""

    x: tuple
    y: int
    domain: str


class Dataset:
    """
    Immutable collection of samples from one or both domains

    Labels are 1..K for known classes and K+1 for the unknown class.
    Source samples never carry the unknown label.
    """

    def __init__(self, x, y, domain, num_known):
        """
        Initialize a dataset

        Args:
            x: n x d feature matrix
            y: length-n integer labels
            domain: length-n sequence of 'source' / 'target'
            num_known (int): Number of known classes K
        """
        x = np.array(x, dtype=np.float64)
        if x.ndim == 1 and x.size == 0:
            x = x.reshape(0, 0)
        y = np.array(y, dtype=np.int64).reshape(-1)
        domain = tuple(domain)
        if x.ndim != 2 or x.shape[0] != y.size or y.size != len(domain):
            raise DataError(f"Inconsistent dataset sizes: x {x.shape}, y {y.size}, domain {len(domain)}")
        if num_known < 1:
            raise DataError(f"num_known must be >= 1, got {num_known}")
        for index, (label, tag) in enumerate(zip(y, domain)):
            if tag not in DOMAINS:
                raise DataError(f"Sample {index}: unknown domain '{tag}'")
            if not 1 <= label <= num_known + 1:
                raise DataError(f"Sample {index}: label {label} outside 1..{num_known + 1}")
            if tag == SOURCE and label == num_known + 1:
                raise DataError(f"Sample {index}: source samples cannot carry the unknown label")
        x.setflags(write=False)
        y.setflags(write=False)
        self.x = x
        self.y = y
        self.domain = domain
        self.num_known = int(num_known)

    @property
    def unknown_label(self):
        return self.num_known + 1

    @property
    def dim(self):
        return self.x.shape[1]

    def __len__(self):
        return self.y.size

    def __iter__(self):
        for row, label, tag in zip(self.x, self.y, self.domain):
            yield Sample(tuple(float(v) for v in row), int(label), tag)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.num_known == other.num_known
                and self.domain == other.domain
                and self.x.shape == other.x.shape
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y))

    def subset(self, indices):
        """Dataset restricted to the given row indices"""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.x[indices].reshape(len(indices), self.x.shape[1]), self.y[indices],
                       [self.domain[i] for i in indices], self.num_known)

    def known_only(self):
        """Dataset without unknown-class samples"""
        return self.subset(np.flatnonzero(self.y != self.unknown_label))

    @classmethod
    def empty(cls, dim, num_known):
        return cls(np.zeros((0, dim)), [], [], num_known)


@dataclass(frozen=True)
class ShiftConfig:
    """Parameters of the synthetic open-set domain shift"""

    d: int = 2
    num_known: int = 3
    num_unknown: int = 2
    rotation_deg: float = 15.0
    translation: tuple = field(default_factory=tuple)
    noise_sigma: float = 0.5
    n_source: int = 300
    n_target: int = 300
    seed: int = 47

    def __post_init__(self):
        if self.d < 2:
            raise ContractError(f"d must be >= 2, got {self.d}")
        if self.num_known < 2:
            raise ContractError(f"num_known must be >= 2, got {self.num_known}")
        if self.num_unknown < 1:
            raise ContractError(f"num_unknown must be >= 1, got {self.num_unknown}")
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")
        translation = tuple(float(v) for v in self.translation) or (0.0,) * self.d
        if len(translation) != self.d:
            raise ContractError(f"translation has {len(translation)} entries, expected {self.d}")
        object.__setattr__(self, 'translation', translation)


@dataclass(frozen=True)
class LabeledBatch:
    """Source mini-batch handed to the trainer"""

    x: np.ndarray
    y: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return self.y.size


@dataclass(frozen=True)
class UnlabeledBatch:
    """Target mini-batch; labels are withheld from the trainer"""

    x: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return self.x.shape[0]
