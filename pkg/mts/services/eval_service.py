"""
Evaluation Service for the MTS Domain Adaptation toolkit
Known/unknown inference, OS / OS* / Unk metrics and domain-confusion diagnostics
"""

import logging

import numpy as np

from mts.engine import autograd as ag
from mts.engine.nn import forward_features, head_logits
from mts.errors import ContractError, DataError
from mts.models.report import EvalReport
from mts.models.trained_model import SOURCE_ONLY

logger = logging.getLogger(__name__)


def argmax_rule(probs):
    """1-based argmax of each row; ties go to the lowest index"""
    return np.argmax(np.asarray(probs), axis=1).astype(np.int64) + 1


def threshold_rule(probs, num_known, threshold):
    """
    Known-class argmax, or unknown (K+1) when the top known probability is at most threshold

    threshold 0 never rejects; threshold 1 always rejects.
    """
    known = np.asarray(probs)[:, :num_known]
    labels = np.argmax(known, axis=1).astype(np.int64) + 1
    labels[known.max(axis=1) <= threshold] = num_known + 1
    return labels


def similarity_rule(class_probs, head_probs, num_known, threshold):
    """Known-class argmax of the extended head, or unknown when w_j < threshold"""
    labels = np.argmax(np.asarray(class_probs)[:, :num_known], axis=1).astype(np.int64) + 1
    labels[np.asarray(head_probs).max(axis=1) < threshold] = num_known + 1
    return labels


class EvalService:
    """
    Service to label samples and score predictions
    """

    def predict_batch(self, model, x):
        """
        Label every row of x

        Args:
            model (TrainedModel): Networks and inference settings
            x: n x d features

        Returns:
            np.ndarray: Labels in 1..K+1
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        bundle = model.bundle
        with ag.no_grad():
            features = forward_features(bundle, 'f2', x)
            class_probs = ag.softmax_rows(head_logits(bundle, 'y2', features)).values
            if model.kind == SOURCE_ONLY:
                return threshold_rule(class_probs, bundle.num_known, model.threshold)
            if model.inference == 'similarity':
                head_probs = ag.sigmoid(head_logits(bundle, 'c', features)).values
                return similarity_rule(class_probs, head_probs, bundle.num_known, model.similarity_threshold)
        return argmax_rule(class_probs)

    def predict(self, model, sample):
        """Label of one sample (a Sample or a feature vector)"""
        x = sample.x if hasattr(sample, 'x') else sample
        return int(self.predict_batch(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def metrics(self, predictions, true_labels, num_known):
        """
        Per-class recall and open-set aggregates

        Args:
            predictions: Predicted labels in 1..K+1
            true_labels: True labels in 1..K+1; every class must occur
            num_known (int): K

        Returns:
            EvalReport: alpha_k, OS, OS*, Unk and the confusion matrix
        """
        predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
        true_labels = np.asarray(true_labels, dtype=np.int64).reshape(-1)
        classes = num_known + 1
        if predictions.size != true_labels.size:
            raise ContractError(f"{predictions.size} predictions for {true_labels.size} labels")
        for name, labels in (('predictions', predictions), ('true labels', true_labels)):
            if labels.size and (labels.min() < 1 or labels.max() > classes):
                raise ContractError(f"{name} must lie in 1..{classes}")
        confusion = np.zeros((classes, classes), dtype=np.int64)
        np.add.at(confusion, (true_labels - 1, predictions - 1), 1)
        support = confusion.sum(axis=1)
        for k in range(classes):
            if support[k] == 0:
                name = 'unknown class' if k == num_known else f'class {k + 1}'
                raise DataError(f"No samples of {name} ({k + 1}) among the true labels")
        per_class = np.diag(confusion) / support
        return EvalReport(
            per_class_acc=tuple(float(a) for a in per_class),
            os=float(per_class.mean()),
            os_star=float(per_class[:num_known].mean()),
            unk=float(per_class[num_known]),
            confusion=confusion,
            n_evaluated=int(true_labels.size),
        )

    def evaluate(self, model, dataset):
        """Predict a labeled dataset and score it"""
        predictions = self.predict_batch(model, dataset.x)
        return self.metrics(predictions, dataset.y, dataset.num_known)

    def discriminator_confusion(self, model, source_known_x, target_known_x):
        """
        Accuracy of G_d at 0.5 telling source from target

        A probability above 0.5 means source; exactly 0.5 counts as target.
        Values near 0.5 mean the domains are confused.
        """
        source_known_x = np.asarray(source_known_x, dtype=np.float64)
        target_known_x = np.asarray(target_known_x, dtype=np.float64)
        total = source_known_x.shape[0] + target_known_x.shape[0]
        if total == 0:
            raise ContractError("discriminator_confusion needs at least one sample")
        bundle = model.bundle
        correct = 0
        with ag.no_grad():
            if source_known_x.shape[0]:
                p = ag.sigmoid(head_logits(bundle, 'd', forward_features(bundle, 'f2', source_known_x))).values
                correct += int(np.count_nonzero(p > 0.5))
            if target_known_x.shape[0]:
                p = ag.sigmoid(head_logits(bundle, 'd', forward_features(bundle, 'f2', target_known_x))).values
                correct += int(np.count_nonzero(p <= 0.5))
        return correct / total


# Singleton instance
eval_service = EvalService()
