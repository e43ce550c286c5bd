"""
Tests for synthetic shift generation and minibatch sampling
"""

import numpy as np
import pytest

from mts.errors import ContractError, DataError
from mts.models.dataset import SOURCE, TARGET, Dataset, ShiftConfig
from mts.services.data_service import CENTROID_RADIUS, data_service


def test_generate_is_deterministic(tiny_shift):
    first = data_service.generate(tiny_shift)
    second = data_service.generate(tiny_shift)
    assert first[0] == second[0]
    assert first[1] == second[1]


def test_label_sets(tiny_shift):
    source, target = data_service.generate(tiny_shift)
    assert set(source.y.tolist()) == {1, 2}
    assert set(target.y.tolist()) == {1, 2, 3}
    assert set(source.domain) == {SOURCE}
    assert set(target.domain) == {TARGET}
    assert len(source) == 24 and len(target) == 24


def test_unknown_classes_collapse_to_one_label():
    config = ShiftConfig(num_known=3, num_unknown=2, n_source=30, n_target=50)
    _, target = data_service.generate(config)
    assert target.y.max() == 4
    assert np.count_nonzero(target.y == 4) == 20


def test_zero_shift_keeps_centroids():
    config = ShiftConfig(rotation_deg=0.0, noise_sigma=0.5, n_source=600, n_target=1000, seed=3)
    source, target = data_service.generate(config)
    for label in range(1, config.num_known + 1):
        s = source.x[source.y == label]
        t = target.x[target.y == label]
        tolerance = 3 * config.noise_sigma / np.sqrt(min(len(s), len(t)))
        assert np.all(np.abs(s.mean(axis=0) - t.mean(axis=0)) < 2 * tolerance)


@pytest.mark.parametrize('k,u,degrees', [(3, 2, [0, 120, 240, 60, 180]),
                                         (2, 3, [0, 180, 60, 120, 270]),
                                         (4, 1, [0, 90, 180, 270, 45])])
def test_unknown_classes_sit_between_known_ones(k, u, degrees):
    angles = data_service.centroid_angles(k, u)
    assert np.allclose(np.rad2deg(angles), degrees)
    centers = data_service.centroids(ShiftConfig(num_known=k, num_unknown=u))
    assert np.allclose(np.linalg.norm(centers, axis=1), CENTROID_RADIUS)


@pytest.mark.parametrize('rotation', [15.0, 45.0, 75.0])
def test_benchmark_rotations_never_land_on_another_centroid(rotation):
    degrees = np.rad2deg(data_service.centroid_angles(3, 2))
    moved = (degrees[:, None] + rotation - degrees[None, :]) % 360.0
    assert np.min(np.minimum(moved, 360.0 - moved)) >= 15.0 - 1e-9


def test_half_turn_rotation():
    config = ShiftConfig(rotation_deg=180.0, noise_sigma=0.1, n_source=30, n_target=500, seed=9)
    _, target = data_service.generate(config)
    assert np.allclose(data_service.centroids(config)[0], [CENTROID_RADIUS, 0.0])
    mean = target.x[target.y == 1].mean(axis=0)
    assert np.allclose(mean, [-CENTROID_RADIUS, 0.0], atol=0.1)


def test_translation_is_applied():
    config = ShiftConfig(rotation_deg=0.0, translation=(2.0, -1.0), noise_sigma=0.0, n_source=10, n_target=10)
    source, target = data_service.generate(config)
    centers = data_service.centroids(config)
    known = target.y <= 3
    assert np.allclose(target.x[known], centers[target.y[known] - 1] + [2.0, -1.0])
    assert np.allclose(source.x, centers[source.y - 1])


def test_higher_dimensions_only_rotate_the_plane():
    config = ShiftConfig(d=4, rotation_deg=90.0, noise_sigma=0.0, n_source=6, n_target=10)
    _, target = data_service.generate(config)
    assert target.x.shape == (10, 4)
    assert np.allclose(target.x[:, 2:], 0.0)


def test_too_few_samples():
    with pytest.raises(DataError):
        data_service.generate(ShiftConfig(num_known=3, num_unknown=2, n_source=10, n_target=4))


def test_invalid_shift_config():
    with pytest.raises(ContractError):
        ShiftConfig(translation=(1.0,))


def test_full_size_batch_is_a_permutation(tiny_data):
    source, target = tiny_data
    s, t = data_service.sample_minibatch(source, target, len(source), np.random.default_rng(0))
    assert sorted(s.indices.tolist()) == list(range(len(source)))
    assert sorted(t.indices.tolist()) == list(range(len(target)))


def test_minibatch_is_deterministic(tiny_data):
    source, target = tiny_data
    first = data_service.sample_minibatch(source, target, 5, np.random.default_rng(4))
    second = data_service.sample_minibatch(source, target, 5, np.random.default_rng(4))
    assert np.array_equal(first[0].x, second[0].x)
    assert np.array_equal(first[1].indices, second[1].indices)


def test_target_batch_withholds_labels(tiny_data):
    source, target = tiny_data
    _, t = data_service.sample_minibatch(source, target, 5, np.random.default_rng(4))
    assert not hasattr(t, 'y')


def test_epoch_covers_every_sample_once(tiny_data):
    source, target = tiny_data
    batches = list(data_service.epoch_batches(source, target, 5, np.random.default_rng(1)))
    assert len(batches) == 5
    seen_source = np.concatenate([s.indices for s, _ in batches])
    seen_target = np.concatenate([t.indices for _, t in batches])
    assert sorted(seen_source.tolist()) == list(range(len(source)))
    assert sorted(seen_target.tolist()) == list(range(len(target)))
    assert all(len(s) >= 2 and len(t) >= 2 for s, t in batches)


def test_batches_hold_exactly_batch_size():
    source, target = data_service.generate(ShiftConfig(n_source=300, n_target=300, seed=2))
    batches = list(data_service.epoch_batches(source, target, 32, np.random.default_rng(0)))
    assert [len(s) for s, _ in batches] == [32] * 9 + [12]
    assert [len(t) for _, t in batches] == [32] * 9 + [12]


@pytest.mark.parametrize('n_source,n_target', [(300, 40), (40, 300)])
def test_unbalanced_domains_cycle_the_smaller_one(n_source, n_target):
    source, target = data_service.generate(ShiftConfig(n_source=n_source, n_target=n_target, seed=2))
    batches = list(data_service.epoch_batches(source, target, 8, np.random.default_rng(3)))
    assert len(batches) == 38
    assert [len(s) for s, _ in batches] == [8] * 37 + [4]
    assert [len(t) for _, t in batches] == [8] * 37 + [4]
    seen_source = np.concatenate([s.indices for s, _ in batches])
    seen_target = np.concatenate([t.indices for _, t in batches])
    larger, smaller = (seen_source, seen_target) if n_source > n_target else (seen_target, seen_source)
    assert sorted(larger.tolist()) == list(range(300))
    assert set(smaller.tolist()) == set(range(40))


def test_single_leftover_sample_is_topped_up_to_two(tiny_data):
    source, target = tiny_data
    sizes = data_service.batch_sizes(len(source), len(target), 23)
    assert sizes == [23, 2]
    batches = list(data_service.epoch_batches(source, target, 23, np.random.default_rng(5)))
    assert [len(t) for _, t in batches] == [23, 2]
    assert set(np.concatenate([t.indices for _, t in batches]).tolist()) == set(range(len(target)))


def test_batch_larger_than_dataset(tiny_data):
    source, target = tiny_data
    with pytest.raises(DataError):
        data_service.sample_minibatch(source, target, 100, np.random.default_rng(0))


def test_batch_size_below_two(tiny_data):
    source, target = tiny_data
    with pytest.raises(ContractError):
        data_service.sample_minibatch(source, target, 1, np.random.default_rng(0))


def test_dataset_rejects_unknown_source_label():
    with pytest.raises(DataError):
        Dataset([[0.0, 0.0]], [3], [SOURCE], 2)


def test_dataset_is_read_only(tiny_data):
    source, _ = tiny_data
    with pytest.raises(ValueError):
        source.x[0, 0] = 1.0


def test_known_only_drops_unknown(tiny_data):
    _, target = tiny_data
    known = target.known_only()
    assert target.unknown_label not in known.y.tolist()
    assert len(known) == np.count_nonzero(target.y != target.unknown_label)
