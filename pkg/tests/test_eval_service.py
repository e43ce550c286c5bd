"""
Tests for open-set metrics and inference rules
"""

import numpy as np
import pytest

from conftest import zero_bundle
from mts.errors import ContractError, DataError, DimensionError
from mts.models.trained_model import SOURCE_ONLY, TrainedModel
from mts.services.eval_service import argmax_rule, eval_service, similarity_rule


@pytest.mark.parametrize('probs, label', [
    ([0.1, 0.2, 0.7], 3),
    ([0.6, 0.3, 0.1], 1),
    ([0.5, 0.5, 0.0], 1),
])
def test_argmax_rule(probs, label):
    assert argmax_rule([probs]).tolist() == [label]


def test_similarity_rule():
    class_probs = np.array([[0.2, 0.7, 0.1], [0.6, 0.3, 0.1]])
    head_probs = np.array([[0.9, 0.2], [0.3, 0.1]])
    assert similarity_rule(class_probs, head_probs, 2, 0.5).tolist() == [2, 3]


def test_zero_model_predicts_first_class():
    model = TrainedModel(zero_bundle())
    assert eval_service.predict(model, np.array([1.0, 2.0])) == 1


def test_predict_checks_dimension():
    model = TrainedModel(zero_bundle())
    with pytest.raises(DimensionError):
        eval_service.predict(model, np.array([1.0, 2.0, 3.0]))


def test_source_only_model_uses_threshold():
    bundle = zero_bundle()
    # top known probability 1/3 is below 0.5
    assert eval_service.predict(TrainedModel(bundle, kind=SOURCE_ONLY, threshold=0.5), [0.0, 0.0]) == 3
    assert eval_service.predict(TrainedModel(bundle, kind=SOURCE_ONLY, threshold=0.0), [0.0, 0.0]) == 1


def test_similarity_inference_on_zero_model():
    bundle = zero_bundle()
    model = TrainedModel(bundle, inference='similarity', similarity_threshold=0.6)
    assert eval_service.predict(model, [0.0, 0.0]) == 3
    model.similarity_threshold = 0.5
    assert eval_service.predict(model, [0.0, 0.0]) == 1


def test_all_correct_predictions():
    labels = [1, 2, 3, 3, 1]
    report = eval_service.metrics(labels, labels, 2)
    assert report.os == report.os_star == report.unk == 1.0
    assert report.n_evaluated == 5


def test_hand_computed_metrics():
    true = [1, 1, 2, 2, 3, 3]
    pred = [1, 1, 2, 3, 1, 2]
    report = eval_service.metrics(pred, true, 2)
    assert report.per_class_acc == (1.0, 0.5, 0.0)
    assert report.os == pytest.approx(0.5)
    assert report.os_star == pytest.approx(0.75)
    assert report.unk == 0.0
    assert report.confusion.tolist() == [[2, 0, 0], [0, 1, 1], [1, 1, 0]]


def test_metrics_are_permutation_invariant():
    rng = np.random.default_rng(0)
    true = np.concatenate([np.arange(1, 5), rng.integers(1, 5, size=40)])
    pred = rng.integers(1, 5, size=true.size)
    order = rng.permutation(true.size)
    assert eval_service.metrics(pred, true, 3) == eval_service.metrics(pred[order], true[order], 3)


def test_open_set_identity_on_random_sets():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        n = int(rng.integers(k + 1, 60))
        true = np.concatenate([np.arange(1, k + 2), rng.integers(1, k + 2, size=n)])
        pred = rng.integers(1, k + 2, size=true.size)
        report = eval_service.metrics(pred, true, k)
        assert abs(report.os - (k * report.os_star + report.unk) / (k + 1)) <= 1e-12


def test_missing_class_is_named():
    with pytest.raises(DataError) as info:
        eval_service.metrics([1, 3], [1, 3], 2)
    assert 'class 2' in str(info.value)


def test_labels_out_of_range():
    with pytest.raises(ContractError):
        eval_service.metrics([1, 2, 4], [1, 2, 3], 2)


def test_evaluate_dataset(tiny_data):
    _, target = tiny_data
    report = eval_service.evaluate(TrainedModel(zero_bundle()), target)
    assert report.per_class_acc == (1.0, 0.0, 0.0)
    assert report.n_evaluated == len(target)


def test_confusion_of_untrained_discriminator():
    model = TrainedModel(zero_bundle())
    accuracy = eval_service.discriminator_confusion(model, np.ones((3, 2)), np.ones((5, 2)))
    assert accuracy == pytest.approx(5 / 8)


def test_confusion_of_separating_discriminator():
    bundle = zero_bundle()
    # identity features on the first input column, d fires on positive values
    f2 = bundle.group('f2')
    f2.layers[0][0].values = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    f2.layers[1][0].values = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    d = bundle.group('d')
    d.layers[0][0].values = np.array([[1.0, 0.0], [0.0, 0.0]])
    d.layers[1][0].values = np.array([[10.0], [0.0]])
    d.layers[1][1].values = np.array([[-5.0]])
    source = np.array([[2.0, 0.0], [3.0, 1.0]])
    target = np.array([[-2.0, 0.0], [-1.0, 4.0], [0.0, 0.0]])
    assert eval_service.discriminator_confusion(TrainedModel(bundle), source, target) == 1.0


def test_confusion_needs_samples():
    with pytest.raises(ContractError):
        eval_service.discriminator_confusion(TrainedModel(zero_bundle()), np.zeros((0, 2)), np.zeros((0, 2)))
