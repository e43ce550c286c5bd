"""
Shared fixtures for the MTS Domain Adaptation test suite
"""

import numpy as np
import pytest

from mts.engine.nn import NetworkBundle, ParamGroup
from mts.models.dataset import LabeledBatch, ShiftConfig, UnlabeledBatch
from mts.models.hyperparams import Hyperparams
from mts.services.data_service import data_service


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="run desk-scale benchmarks")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_hp():
    return Hyperparams(lr=0.05, batch_size=8, epochs=2, hidden_dim=6, feature_dim=4,
                       disc_hidden_dim=3, seed=47)


@pytest.fixture
def bundle(small_hp):
    """Random bundle with d=2, K=2"""
    return NetworkBundle.initialize(2, 2, small_hp, rng=np.random.default_rng(7))


@pytest.fixture
def batches():
    """Source batch of 6 (K=2) and target batch of 5"""
    rng = np.random.default_rng(11)
    source = LabeledBatch(x=rng.normal(size=(6, 2)), y=np.array([1, 2, 1, 2, 1, 2]), indices=np.arange(6))
    target = UnlabeledBatch(x=rng.normal(size=(5, 2)), indices=np.arange(5))
    return source, target


@pytest.fixture
def tiny_shift():
    return ShiftConfig(d=2, num_known=2, num_unknown=1, rotation_deg=30.0, n_source=24, n_target=24, seed=5)


@pytest.fixture
def tiny_data(tiny_shift):
    return data_service.generate(tiny_shift)


def zero_group(group_id, dims):
    """ParamGroup whose weights and biases are all zero"""
    return ParamGroup(group_id, [(np.zeros((a, b)), np.zeros((1, b))) for a, b in zip(dims[:-1], dims[1:])])


def zero_bundle(input_dim=2, num_known=2, hidden=3, feature=2):
    groups = {
        'f1': zero_group('f1', [input_dim, hidden, feature]),
        'y1': zero_group('y1', [feature, num_known]),
        'c': zero_group('c', [feature, num_known]),
        'f2': zero_group('f2', [input_dim, hidden, feature]),
        'y2': zero_group('y2', [feature, num_known + 1]),
        'd': zero_group('d', [feature, 2, 1]),
        'ds': zero_group('ds', [feature, 3]),
    }
    return NetworkBundle(groups, input_dim, num_known)
