"""
Trainer Service for the MTS Domain Adaptation toolkit
Alternating optimization of the Sample Separation Network (SSN) and the
Distribution Matching Network (DMN), plus the source-only baseline
"""

import logging

import numpy as np

from mts.engine import autograd as ag
from mts.engine import losses
from mts.engine.nn import NetworkBundle, forward_features, head_logits, sgd_momentum_step
from mts.errors import ContractError, NumericalAbort
from mts.models.trained_model import MTS, SOURCE_ONLY, TrainedModel
from mts.models.training import BatchWeights, EpochRecord, StepResult, TrainHistory, Triplet
from mts.services.data_service import DataService
from mts.services.eval_service import EvalService
from mts.utils.random_streams import spawn_generators

logger = logging.getLogger(__name__)

SSN_UPDATE = ('f1', 'y1', 'c')
DMN_UPDATE_A = ('y2', 'd', 'ds')
DMN_UPDATE_B = ('f2', 'ds')
SOURCE_ONLY_UPDATE = ('f2', 'y2')
STREAMS = ['init', 'batches', 'triplets']


class TrainerService:
    """
    Service running the two-step alternating optimization

    Step 1 updates (f1, y1, c) on L_theta1 + beta L_mse with the DMN branch held
    constant. Step 2 updates (y2, d, ds) on L_theta2a + beta L_mse, then
    (f2, ds) on L_theta2b + beta L_mse, with the SSN branch held constant.
    """

    def __init__(self, data_service=None, eval_service=None):
        """
        Initialize trainer service with its collaborators

        Args:
            data_service: Mini-batch provider
            eval_service: Per-epoch evaluator
        """
        self.data_service = data_service or DataService()
        self.eval_service = eval_service or EvalService()

    def _mutual_loss(self, hp):
        return losses.loss_kl_mutual if hp.kl_mutual else losses.loss_mse_mutual

    def _check_finite(self, step, values):
        bad = {name: value for name, value in values.items() if not np.isfinite(value)}
        if bad:
            record = {'step': step, **values}
            logger.error(f"Non-finite loss in {step}: {bad}")
            raise NumericalAbort(f"Non-finite loss in {step}: {sorted(bad)}", record=record)

    def _minimize(self, bundle, graph, objective, group_ids, hp, lr):
        params = bundle.parameters(group_ids)
        grads = ag.backward(graph, objective, params)
        sgd_momentum_step(bundle.unique_groups(group_ids), grads, hp, lr=lr)

    def select_triplet(self, source_batch, target_batch, weights, rng):
        """
        Pick the domain-separation exemplars of a mini-batch

        Args:
            source_batch (LabeledBatch): Source batch
            target_batch (UnlabeledBatch): Target batch, at least 2 samples
            weights (BatchWeights): Similarities of the target batch
            rng (np.random.Generator): Draws pi1

        Returns:
            Triplet: pi1 random source sample, pi2 argmax w, pi3 argmin w (ties to lowest index)
        """
        if len(target_batch) < 2:
            raise ContractError(f"Triplet selection needs >= 2 target samples, got {len(target_batch)}")
        if len(weights) != len(target_batch):
            raise ContractError(f"{len(weights)} weights for {len(target_batch)} target samples")
        source_index = int(rng.integers(len(source_batch)))
        known_index = int(np.argmax(weights.w))
        unknown_index = int(np.argmin(weights.w))
        degenerate = bool(np.all(weights.w == weights.w[0]))
        if degenerate:
            logger.warning("All similarity weights in the batch are equal; triplet is degenerate")
        return Triplet(
            pi1=source_batch.x[source_index].copy(),
            pi2=target_batch.x[known_index].copy(),
            pi3=target_batch.x[unknown_index].copy(),
            source_index=source_index,
            known_index=known_index,
            unknown_index=unknown_index,
            degenerate=degenerate,
        )

    def ssn_step(self, bundle, source_batch, target_batch, hp, lr=None):
        """
        Step 1: one update of (f1, y1, c)

        Args:
            bundle (NetworkBundle): Networks, updated in place
            source_batch (LabeledBatch): Source batch
            target_batch (UnlabeledBatch): Target batch
            hp (Hyperparams): Settings
            lr (float): Scheduled learning rate, hp.lr when omitted

        Returns:
            StepResult: Objective and components before the update
        """
        effective = hp.effective()
        with ag.Graph() as graph:
            theta1 = losses.loss_theta1(bundle, source_batch.x, source_batch.y)
            mutual = self._mutual_loss(hp)(bundle, source_batch.x, target_batch.x, detach='dmn')
            objective = ag.add(theta1, ag.scalar_mul(mutual, effective.beta))
        values = {'loss_theta1': theta1.item(), 'loss_mse': mutual.item(), 'objective': objective.item()}
        self._check_finite('ssn_step', values)
        self._minimize(bundle, graph, objective, SSN_UPDATE, hp, lr)
        return StepResult(objective=values['objective'], components=values)

    def dmn_step(self, bundle, source_batch, target_batch, hp, rng, lr=None, adversarial_scale=1.0):
        """
        Step 2: update (y2, d, ds), then (f2, ds)

        Similarity weights are computed once from the current networks and
        one triplet serves both sub-steps. adversarial_scale weights the
        reversed discriminator loss of sub-step b.

        Returns:
            tuple: (StepResult of sub-step a, StepResult of sub-step b)
        """
        effective = hp.effective()
        weights = losses.similarity_weights(bundle, target_batch.x)
        adversarial = BatchWeights.uniform(len(weights), bundle.num_known) if hp.uniform_weights else None
        triplet = self.select_triplet(source_batch, target_batch, weights, rng)
        mutual_loss = self._mutual_loss(hp)
        args = (bundle, source_batch.x, source_batch.y, target_batch.x, weights, triplet, effective.alpha)
        kwargs = {'mode': hp.unknown_weight_mode, 'adversarial_weights': adversarial}

        with ag.Graph() as graph:
            theta2a = losses.loss_theta2a(*args, **kwargs)
            mutual = mutual_loss(bundle, source_batch.x, target_batch.x, detach='ssn')
            objective = ag.add(theta2a, ag.scalar_mul(mutual, effective.beta))
        values_a = {'loss_theta2a': theta2a.item(), 'loss_mse': mutual.item(), 'objective': objective.item()}
        self._check_finite('dmn_step(a)', values_a)
        self._minimize(bundle, graph, objective, DMN_UPDATE_A, hp, lr)

        with ag.Graph() as graph:
            theta2b = losses.loss_theta2b(*args, **kwargs, adversarial_scale=adversarial_scale)
            mutual = mutual_loss(bundle, source_batch.x, target_batch.x, detach='ssn')
            objective = ag.add(theta2b, ag.scalar_mul(mutual, effective.beta))
        values_b = {'loss_theta2b': theta2b.item(), 'loss_mse': mutual.item(), 'objective': objective.item()}
        self._check_finite('dmn_step(b)', values_b)
        self._minimize(bundle, graph, objective, DMN_UPDATE_B, hp, lr)

        return (StepResult(objective=values_a['objective'], components=values_a),
                StepResult(objective=values_b['objective'], components=values_b))

    def _record(self, model, target, epoch, sums, count):
        report = self.eval_service.evaluate(model.snapshot(), target)
        mean = {name: (sums.get(name, 0.0) / count if count else 0.0)
                for name in ('loss_theta1', 'loss_theta2a', 'loss_theta2b', 'loss_mse')}
        return EpochRecord(epoch=epoch, os=report.os, os_star=report.os_star, unk=report.unk, **mean)

    def train(self, source, target, hp, on_epoch=None):
        """
        Train both networks for a fixed number of epochs

        Args:
            source (Dataset): Labeled source data
            target (Dataset): Target data; labels are used for per-epoch evaluation only
            hp (Hyperparams): Settings, including the seed
            on_epoch: Optional callback receiving each EpochRecord

        Returns:
            tuple: (TrainedModel, TrainHistory)
        """
        if hp.ablation == 'source_only':
            return self.train_source_only(source, target, hp, on_epoch=on_epoch)
        streams = spawn_generators(hp.seed, STREAMS)
        bundle = NetworkBundle.initialize(source.dim, source.num_known, hp, rng=streams['init'])
        model = TrainedModel(bundle, kind=MTS)
        history = TrainHistory()
        logger.info(f"Training MTS ({hp.ablation}) for {hp.epochs} epochs, seed {hp.seed}")
        total_steps = hp.epochs * len(self.data_service.batch_sizes(len(source), len(target), hp.batch_size))
        done = 0

        for epoch in range(hp.epochs):
            lr = hp.lr_at(epoch)
            sums, count = {}, 0
            try:
                for source_batch, target_batch in self.data_service.epoch_batches(
                        source, target, hp.batch_size, streams['batches']):
                    scale = hp.adversarial_scale(done / total_steps)
                    ssn = self.ssn_step(bundle, source_batch, target_batch, hp, lr=lr)
                    step_a, step_b = self.dmn_step(bundle, source_batch, target_batch, hp,
                                                   streams['triplets'], lr=lr, adversarial_scale=scale)
                    done += 1
                    for name, value in (('loss_theta1', ssn.components['loss_theta1']),
                                        ('loss_mse', ssn.components['loss_mse']),
                                        ('loss_theta2a', step_a.components['loss_theta2a']),
                                        ('loss_theta2b', step_b.components['loss_theta2b'])):
                        sums[name] = sums.get(name, 0.0) + value
                    count += 1
                    logger.debug(f"epoch {epoch + 1} batch {count}: {ssn.components} {step_a.components} {step_b.components}")
            except NumericalAbort as e:
                e.record.setdefault('epoch', epoch + 1)
                e.history = history
                raise
            record = self._record(model, target, epoch + 1, sums, count)
            history.append(record)
            logger.info(f"Epoch {record.epoch}/{hp.epochs}: L_theta1={record.loss_theta1:.4f} "
                        f"L_theta2a={record.loss_theta2a:.4f} L_theta2b={record.loss_theta2b:.4f} "
                        f"L_mse={record.loss_mse:.4f} OS={record.os:.4f}")
            if on_epoch:
                on_epoch(record)
        return model, history

    def source_only_step(self, bundle, source_batch, hp, lr=None):
        """One update of (f2, y2) on extended-head cross-entropy of source labels"""
        with ag.Graph() as graph:
            logits = head_logits(bundle, 'y2', forward_features(bundle, 'f2', source_batch.x))
            loss = losses.cross_entropy_logits(logits, source_batch.y)
        values = {'loss_c1': loss.item()}
        self._check_finite('source_only_step', values)
        self._minimize(bundle, graph, loss, SOURCE_ONLY_UPDATE, hp, lr)
        return StepResult(objective=values['loss_c1'], components=values)

    def train_source_only(self, source, target, hp, on_epoch=None):
        """
        Baseline: classification loss only, unknown by thresholding the top known probability

        History records the classification loss as loss_theta1; the other loss
        columns are 0.

        Returns:
            tuple: (TrainedModel, TrainHistory)
        """
        streams = spawn_generators(hp.seed, STREAMS)
        bundle = NetworkBundle.initialize(source.dim, source.num_known, hp, rng=streams['init'],
                                          shared_extractor=False)
        model = TrainedModel(bundle, kind=SOURCE_ONLY, threshold=hp.source_only_threshold)
        history = TrainHistory()
        logger.info(f"Training source-only baseline for {hp.epochs} epochs, seed {hp.seed}")

        for epoch in range(hp.epochs):
            lr = hp.lr_at(epoch)
            sums, count = {}, 0
            try:
                for source_batch, _ in self.data_service.epoch_batches(
                        source, target, hp.batch_size, streams['batches']):
                    step = self.source_only_step(bundle, source_batch, hp, lr=lr)
                    sums['loss_theta1'] = sums.get('loss_theta1', 0.0) + step.objective
                    count += 1
            except NumericalAbort as e:
                e.record.setdefault('epoch', epoch + 1)
                e.history = history
                raise
            record = self._record(model, target, epoch + 1, sums, count)
            history.append(record)
            logger.info(f"Epoch {record.epoch}/{hp.epochs}: L_c={record.loss_theta1:.4f} OS={record.os:.4f}")
            if on_epoch:
                on_epoch(record)
        return model, history


# Singleton instance
trainer_service = TrainerService()
