"""
Tests for the alternating SSN and DMN training steps
"""

import logging
from dataclasses import replace

import numpy as np
import pytest

from mts.engine import autograd as ag
from mts.engine import losses
from mts.engine.nn import NetworkBundle, sgd_momentum_step
from mts.errors import ContractError, NumericalAbort
from mts.models.dataset import ShiftConfig, UnlabeledBatch
from mts.models.trained_model import SOURCE_ONLY
from mts.models.training import BatchWeights
from mts.services.data_service import data_service
from mts.services.eval_service import eval_service, threshold_rule
from mts.services.trainer_service import (DMN_UPDATE_A, DMN_UPDATE_B, SSN_UPDATE, TrainerService,
                                          trainer_service)
from mts.utils.random_streams import spawn_generators

DMN_ONLY = ('f2', 'y2', 'd', 'ds')


def weights_of(w):
    w = np.asarray(w, dtype=np.float64)
    return BatchWeights(p=np.tile(w[:, None], (1, 2)), w=w)


def test_triplet_picks_extremes(batches):
    source, target = batches
    target = UnlabeledBatch(x=target.x[:3], indices=np.arange(3))
    triplet = trainer_service.select_triplet(source, target, weights_of([0.9, 0.1, 0.5]), np.random.default_rng(0))
    assert triplet.known_index == 0
    assert triplet.unknown_index == 1
    assert np.array_equal(triplet.pi2, target.x[0])
    assert np.array_equal(triplet.pi3, target.x[1])
    assert np.array_equal(triplet.pi1, source.x[triplet.source_index])
    assert not triplet.degenerate


def test_equal_weights_give_degenerate_triplet(batches, caplog):
    source, target = batches
    with caplog.at_level(logging.WARNING):
        triplet = trainer_service.select_triplet(source, target, weights_of([0.5] * 5), np.random.default_rng(0))
    assert triplet.known_index == 0 and triplet.unknown_index == 0
    assert triplet.degenerate
    assert 'degenerate' in caplog.text


def test_triplet_source_draw_is_deterministic(batches):
    source, target = batches
    w = weights_of([0.2, 0.4, 0.6, 0.8, 0.1])
    first = trainer_service.select_triplet(source, target, w, np.random.default_rng(13))
    second = trainer_service.select_triplet(source, target, w, np.random.default_rng(13))
    assert first.source_index == second.source_index


def test_triplet_needs_two_target_samples(batches):
    source, target = batches
    single = UnlabeledBatch(x=target.x[:1], indices=np.arange(1))
    with pytest.raises(ContractError):
        trainer_service.select_triplet(source, single, weights_of([0.5]), np.random.default_rng(0))


def test_ssn_step_leaves_dmn_groups(bundle, batches, small_hp):
    source, target = batches
    before = bundle.digest(DMN_ONLY)
    ssn_before = bundle.digest(SSN_UPDATE)
    trainer_service.ssn_step(bundle, source, target, small_hp)
    assert bundle.digest(DMN_ONLY) == before
    assert bundle.digest(SSN_UPDATE) != ssn_before


def test_dmn_step_leaves_ssn_groups(bundle, batches, small_hp):
    source, target = batches
    before = bundle.digest(SSN_UPDATE)
    dmn_before = bundle.digest(DMN_ONLY)
    trainer_service.dmn_step(bundle, source, target, small_hp, np.random.default_rng(0))
    assert bundle.digest(SSN_UPDATE) == before
    assert bundle.digest(DMN_ONLY) != dmn_before


def test_shared_group_changes_only_in_ssn_step(bundle, batches, small_hp):
    source, target = batches
    c_before = bundle.digest(['c'])
    trainer_service.dmn_step(bundle, source, target, small_hp, np.random.default_rng(0))
    assert bundle.digest(['c']) == c_before
    trainer_service.ssn_step(bundle, source, target, small_hp)
    assert bundle.digest(['c']) != c_before


def test_zero_learning_rate_changes_nothing(bundle, batches, small_hp):
    source, target = batches
    hp = replace(small_hp, lr=0.0)
    before = bundle.digest()
    trainer_service.ssn_step(bundle, source, target, hp)
    trainer_service.dmn_step(bundle, source, target, hp, np.random.default_rng(0))
    assert bundle.digest() == before


def test_ssn_step_without_mutual_term_is_a_plain_step(bundle, batches, small_hp):
    source, target = batches
    hp = replace(small_hp, beta=0.0)
    reference = bundle.snapshot()
    trainer_service.ssn_step(bundle, source, target, hp)

    with ag.Graph() as graph:
        root = losses.loss_theta1(reference, source.x, source.y)
    grads = ag.backward(graph, root, reference.parameters(SSN_UPDATE))
    sgd_momentum_step(reference.unique_groups(SSN_UPDATE), grads, hp)

    for gid in SSN_UPDATE:
        for mine, theirs in zip(bundle.group(gid).parameters(), reference.group(gid).parameters()):
            assert np.max(np.abs(mine.values - theirs.values)) <= 1e-12


@pytest.mark.parametrize('scale', [1.0, 0.3])
def test_sub_step_b_gradient_is_the_sum_of_its_terms(bundle, batches, small_hp, scale):
    source, target = batches
    alpha, beta = small_hp.alpha, small_hp.beta
    weights = losses.similarity_weights(bundle, target.x)
    triplet = trainer_service.select_triplet(source, target, weights, np.random.default_rng(2))
    params = bundle.parameters(['f2'])

    def grad_of(build):
        with ag.Graph() as graph:
            root = build()
        return ag.backward(graph, root, params)

    total = grad_of(lambda: ag.add(
        losses.loss_theta2b(bundle, source.x, source.y, target.x, weights, triplet, alpha,
                            adversarial_scale=scale),
        ag.scalar_mul(losses.loss_mse_mutual(bundle, source.x, target.x, detach='ssn'), beta)))
    c2 = grad_of(lambda: losses.loss_c2(bundle, source.x, source.y, target.x, weights))
    d = grad_of(lambda: losses.loss_d(bundle, source.x, target.x, weights))
    ds = grad_of(lambda: losses.loss_ds(bundle, triplet, losses.Indicator(losses.REVISED)))
    mse = grad_of(lambda: losses.loss_mse_mutual(bundle, source.x, target.x, detach='ssn'))
    for name in total:
        expected = c2[name] - scale * d[name] + alpha * ds[name] + beta * mse[name]
        assert np.max(np.abs(total[name] - expected)) <= 1e-10


def test_step_results_report_pre_step_values(bundle, batches, small_hp):
    source, target = batches
    expected = losses.loss_theta1(bundle.snapshot(), source.x, source.y).item()
    result = trainer_service.ssn_step(bundle, source, target, small_hp)
    assert result.components['loss_theta1'] == pytest.approx(expected, abs=1e-12)


def test_uniform_weights_variant_only_changes_the_adversarial_term(bundle, batches, small_hp):
    source, target = batches
    weights = losses.similarity_weights(bundle, target.x)
    triplet = trainer_service.select_triplet(source, target, weights, np.random.default_rng(3))
    uniform = BatchWeights.uniform(len(weights), 2)
    plain = losses.loss_theta2a(bundle, source.x, source.y, target.x, weights, triplet, 0.8).item()
    ablated = losses.loss_theta2a(bundle, source.x, source.y, target.x, weights, triplet, 0.8,
                                  adversarial_weights=uniform).item()
    d_plain = losses.loss_d(bundle, source.x, target.x, weights).item()
    d_uniform = losses.loss_d(bundle, source.x, target.x, uniform).item()
    assert ablated - plain == pytest.approx(d_uniform - d_plain, abs=1e-12)


def test_ablation_switches(small_hp):
    assert replace(small_hp, ablation='no_mutual').effective().beta == 0.0
    assert replace(small_hp, ablation='no_ds').effective().alpha == 0.0
    assert replace(small_hp, ablation='no_s').shared_extractor
    assert replace(small_hp, ablation='no_w').uniform_weights
    assert replace(small_hp, ablation='no_mse').kl_mutual
    assert replace(small_hp, ablation='full').effective() == replace(small_hp, ablation='full')


def test_learning_rate_decay(small_hp):
    hp = replace(small_hp, lr=1.0, lr_decay_epochs=(2, 4), lr_decay_factor=0.1)
    assert [hp.lr_at(e) for e in range(5)] == pytest.approx([1.0, 1.0, 0.1, 0.1, 0.01])


def test_adversarial_schedule_values(small_hp):
    assert small_hp.adversarial_scale(0.0) == 0.0
    assert small_hp.adversarial_scale(0.1) == pytest.approx(0.4621171573)
    assert small_hp.adversarial_scale(1.0) == pytest.approx(0.9999092043)
    constant = replace(small_hp, adversarial_schedule='constant')
    assert [constant.adversarial_scale(p) for p in (0.0, 0.5, 1.0)] == [1.0, 1.0, 1.0]
    with pytest.raises(ContractError):
        replace(small_hp, adversarial_schedule='linear')


def test_zero_epochs_returns_initial_networks(tiny_data, small_hp):
    source, target = tiny_data
    hp = replace(small_hp, epochs=0)
    model, history = trainer_service.train(source, target, hp)
    assert len(history) == 0
    fresh = NetworkBundle.initialize(source.dim, source.num_known, hp, rng=spawn_generators(hp.seed, ['init'])['init'])
    assert model.bundle.digest() == fresh.digest()


def test_training_is_deterministic(tiny_data, small_hp):
    source, target = tiny_data
    first_model, first = trainer_service.train(source, target, small_hp)
    second_model, second = trainer_service.train(source, target, small_hp)
    assert first == second
    assert first_model.bundle.digest() == second_model.bundle.digest()
    assert [r.epoch for r in first] == [1, 2]


@pytest.mark.parametrize('ablation', ['no_w', 'no_mutual', 'no_ds', 'no_mse', 'no_s', 'source_only'])
def test_every_variant_trains(tiny_data, small_hp, ablation):
    source, target = tiny_data
    model, history = trainer_service.train(source, target, replace(small_hp, ablation=ablation))
    assert len(history) == small_hp.epochs
    assert all(np.isfinite(r.loss_theta1) for r in history)
    if ablation == 'no_s':
        assert model.bundle.group('f2') is model.bundle.group('f1')


def test_unbalanced_domains_train_one_batch_per_larger_chunk(small_hp):
    source, target = data_service.generate(ShiftConfig(num_known=2, num_unknown=1, n_source=300, n_target=40, seed=4))
    steps = []

    class Counting(TrainerService):
        def dmn_step(self, bundle, source_batch, target_batch, hp, rng, **kwargs):
            steps.append((len(source_batch), len(target_batch)))
            return super().dmn_step(bundle, source_batch, target_batch, hp, rng, **kwargs)

    _, history = Counting().train(source, target, replace(small_hp, epochs=1))
    assert len(history) == 1
    assert steps == [(8, 8)] * 37 + [(4, 4)]


def test_adversarial_weight_ramps_over_training(tiny_data, small_hp):
    source, target = tiny_data
    scales = []

    class Recording(TrainerService):
        def dmn_step(self, bundle, source_batch, target_batch, hp, rng, **kwargs):
            scales.append(kwargs['adversarial_scale'])
            return super().dmn_step(bundle, source_batch, target_batch, hp, rng, **kwargs)

    Recording().train(source, target, small_hp)
    # 24 samples in batches of 8, two epochs
    assert len(scales) == 6
    assert scales[0] == 0.0
    assert all(a < b for a, b in zip(scales, scales[1:]))
    assert scales[-1] == pytest.approx(small_hp.adversarial_scale(5 / 6))

    scales.clear()
    Recording().train(source, target, replace(small_hp, adversarial_schedule='constant'))
    assert scales == [1.0] * 6


def test_history_matches_reevaluation(tiny_data, small_hp):
    source, target = tiny_data
    hp = replace(small_hp, epochs=1)
    model, history = trainer_service.train(source, target, hp)
    report = eval_service.evaluate(model, target)
    record = history.last()
    assert record.os == report.os and record.unk == report.unk


def test_history_losses_are_batch_means_of_pre_step_values(tiny_data, small_hp):
    source, target = tiny_data
    hp = replace(small_hp, epochs=1)
    observed = []

    class Recording(TrainerService):
        def ssn_step(self, bundle, source_batch, target_batch, hp, lr=None):
            expected = losses.loss_theta1(bundle.snapshot(), source_batch.x, source_batch.y).item()
            result = super().ssn_step(bundle, source_batch, target_batch, hp, lr=lr)
            observed.append((expected, result.components['loss_theta1']))
            return result

    _, history = Recording().train(source, target, hp)
    assert all(abs(a - b) <= 1e-12 for a, b in observed)
    assert history.last().loss_theta1 == pytest.approx(np.mean([b for _, b in observed]), abs=1e-12)


def test_non_finite_loss_aborts_with_history(tiny_data, small_hp):
    source, target = tiny_data
    hp = replace(small_hp, epochs=3)

    class Exploding(TrainerService):
        def __init__(self):
            super().__init__()
            self.calls = 0

        def ssn_step(self, bundle, source_batch, target_batch, hp, lr=None):
            self.calls += 1
            if self.calls > 2:
                for param in bundle.group('y1').parameters():
                    param.values = np.full(param.shape, np.nan)
            return super().ssn_step(bundle, source_batch, target_batch, hp, lr=lr)

    with pytest.raises(NumericalAbort) as info:
        Exploding().train(source, target, hp)
    assert info.value.record['step'] == 'ssn_step'
    assert info.value.record['epoch'] == 1
    assert info.value.history is not None
    assert info.value.exit_code == 3


def test_source_only_thresholds():
    probs = np.array([[0.6, 0.3, 0.1], [0.3, 0.3, 0.4]])
    assert threshold_rule(probs, 2, 0.0).tolist() == [1, 1]
    assert threshold_rule(probs, 2, 1.0).tolist() == [3, 3]
    assert threshold_rule(probs, 2, 0.5).tolist() == [1, 3]


def test_source_only_trains_only_its_groups(tiny_data, small_hp):
    source, target = tiny_data
    hp = replace(small_hp, ablation='source_only', epochs=1)
    model, history = trainer_service.train(source, target, hp)
    assert model.kind == SOURCE_ONLY
    assert model.threshold == hp.source_only_threshold
    fresh = NetworkBundle.initialize(source.dim, source.num_known, hp,
                                     rng=spawn_generators(hp.seed, ['init'])['init'], shared_extractor=False)
    untouched = ('f1', 'y1', 'c', 'd', 'ds')
    assert model.bundle.digest(untouched) == fresh.digest(untouched)
    assert history.last().loss_theta2a == 0.0


def test_update_sets():
    assert set(DMN_UPDATE_A) == {'y2', 'd', 'ds'}
    assert set(DMN_UPDATE_B) == {'f2', 'ds'}
    assert 'c' not in DMN_UPDATE_A + DMN_UPDATE_B
