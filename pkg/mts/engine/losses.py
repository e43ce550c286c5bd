"""
Loss Functions for the MTS Domain Adaptation toolkit
Every objective of both networks as a differentiable 1x1 Tensor

Term functions work on head logits and are usable on hand-built inputs;
the bundle-level losses run the networks and delegate to them.
"""

import logging

import numpy as np

from mts.engine import autograd as ag
from mts.engine.nn import forward_features, head_logits
from mts.errors import ContractError
from mts.models.training import BatchWeights

logger = logging.getLogger(__name__)

STANDARD = 'standard'
REVISED = 'revised'


class Indicator:
    """
    Target labels of the domain-separating heads

    standard: I(i, ds) = 1 iff i == ds
    revised:  I(i, ds) = 1 iff (i != 3 and ds != 3) or (i == 3 and ds == 3)
    """

    def __init__(self, mode=STANDARD):
        if mode not in (STANDARD, REVISED):
            raise ContractError(f"Unknown indicator mode '{mode}'")
        self.mode = mode

    def value(self, i, ds):
        if self.mode == STANDARD:
            return int(i == ds)
        return int((i != 3 and ds != 3) or (i == 3 and ds == 3))

    def matrix(self):
        """3 x 3 matrix; row i is exemplar pi_i, column ds is head T_ds"""
        return np.array([[self.value(i, ds) for ds in (1, 2, 3)] for i in (1, 2, 3)], dtype=np.float64)


def _check_labels(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise ContractError("Empty batch")
    if labels.min() < 1 or labels.max() > num_classes:
        raise ContractError(f"Labels must lie in 1..{num_classes}, got {labels.min()}..{labels.max()}")
    return labels


def _one_hot(labels, num_classes):
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels - 1] = 1.0
    return out


# Term functions

def cross_entropy_logits(logits, labels):
    """Mean cross-entropy of row-softmax(logits) against 1-based labels"""
    n, num_classes = logits.shape
    labels = _check_labels(labels, num_classes)
    if labels.size != n:
        raise ContractError(f"{labels.size} labels for {n} rows")
    picked = ag.mul(ag.log_softmax_rows(logits), ag.Tensor(_one_hot(labels, num_classes)))
    return ag.scalar_mul(ag.sum_all(picked), -1.0 / n)


def cross_entropy_probs(probs, labels):
    """Mean cross-entropy from probabilities clamped to [1e-12, 1 - 1e-12]"""
    n, num_classes = probs.shape
    labels = _check_labels(labels, num_classes)
    logp = ag.log(ag.clamp(probs, ag.PROB_EPS, 1.0 - ag.PROB_EPS))
    picked = ag.mul(logp, ag.Tensor(_one_hot(labels, num_classes)))
    return ag.scalar_mul(ag.sum_all(picked), -1.0 / n)


def bce_logits(logits, targets):
    """Elementwise binary cross-entropy of sigmoid(logits) against 0/1 targets"""
    t = np.broadcast_to(np.asarray(targets, dtype=np.float64), logits.shape)
    pos = ag.mul(ag.log_sigmoid(logits), ag.Tensor(t))
    neg = ag.mul(ag.log_sigmoid(ag.scalar_mul(logits, -1.0)), ag.Tensor(1.0 - t))
    return ag.scalar_mul(ag.add(pos, neg), -1.0)


def bce_probs(probs, targets):
    """Elementwise binary cross-entropy from clamped probabilities"""
    t = np.broadcast_to(np.asarray(targets, dtype=np.float64), probs.shape)
    p = ag.clamp(probs, ag.PROB_EPS, 1.0 - ag.PROB_EPS)
    q = ag.clamp(ag.sub(ag.Tensor(np.ones(probs.shape)), probs), ag.PROB_EPS, 1.0 - ag.PROB_EPS)
    pos = ag.mul(ag.log(p), ag.Tensor(t))
    neg = ag.mul(ag.log(q), ag.Tensor(1.0 - t))
    return ag.scalar_mul(ag.add(pos, neg), -1.0)


def one_vs_rest_term(logits, labels):
    """(1/K) sum over heads of the batch-mean BCE against 1{y = c}"""
    num_known = logits.shape[1]
    labels = _check_labels(labels, num_known)
    return ag.mean_all(bce_logits(logits, _one_hot(labels, num_known)))


def unknown_term(logits, u):
    """u times the cross-entropy of one extended-head row against the unknown label"""
    num_classes = logits.shape[1]
    return ag.scalar_mul(cross_entropy_logits(logits, [num_classes]), u)


def adversarial_term(source_logits, target_logits, w):
    """
    Weighted domain-discrimination loss

    mean_s BCE(G_d(x_s), 1) + sum_j w_j BCE(G_d(x_j), 0) / sum_j w_j
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1, 1)
    if w.shape[0] != target_logits.shape[0]:
        raise ContractError(f"{w.shape[0]} weights for {target_logits.shape[0]} target rows")
    total = float(w.sum())
    if not total > 0.0:
        raise ContractError("Similarity weights sum to zero")
    source_part = ag.mean_all(bce_logits(source_logits, 1.0))
    target_part = ag.sum_all(ag.mul(bce_logits(target_logits, 0.0), ag.Tensor(w)))
    return ag.add(source_part, ag.scalar_mul(target_part, 1.0 / total))


def domain_separation_term(logits, indicator):
    """(1/9) sum of BCE of head T_ds on exemplar pi_i against I(i, ds)"""
    if logits.shape != (3, 3):
        raise ContractError(f"Domain separation needs 3 x 3 logits, got {logits.shape}")
    return ag.mean_all(bce_logits(logits, indicator.matrix()))


def mutual_term(ssn_source, dmn_source, ssn_target, dmn_target):
    """1/2 (batch-mean squared head difference on source + same on target)"""
    source = ag.sum_all(ag.square(ag.sub(ssn_source, dmn_source)))
    target = ag.sum_all(ag.square(ag.sub(ssn_target, dmn_target)))
    return ag.scalar_mul(ag.add(ag.scalar_mul(source, 1.0 / ssn_source.shape[0]),
                                ag.scalar_mul(target, 1.0 / ssn_target.shape[0])), 0.5)


def symmetric_kl_term(ssn_source_logits, dmn_source_logits, ssn_target_logits, dmn_target_logits):
    """
    1/2 (batch-mean symmetric KL between the two sets of head Bernoullis on
    source + same on target)

    For Bernoullis with logits a and b the symmetric KL is (sigma(a) - sigma(b)) (a - b).
    """
    def part(a, b):
        diff = ag.mul(ag.sub(ag.sigmoid(a), ag.sigmoid(b)), ag.sub(a, b))
        return ag.scalar_mul(ag.sum_all(diff), 1.0 / a.shape[0])

    return ag.scalar_mul(ag.add(part(ssn_source_logits, dmn_source_logits),
                                part(ssn_target_logits, dmn_target_logits)), 0.5)


# Bundle-level losses

def loss_c1(bundle, source_x, labels):
    """Cross-entropy of C_y1(G_f1(x)) on source labels"""
    _check_labels(labels, bundle.num_known)
    return cross_entropy_logits(head_logits(bundle, 'y1', forward_features(bundle, 'f1', source_x)), labels)


def loss_s(bundle, source_x, labels):
    """One-vs-rest loss of G_c on G_f1 features"""
    _check_labels(labels, bundle.num_known)
    return one_vs_rest_term(head_logits(bundle, 'c', forward_features(bundle, 'f1', source_x)), labels)


def loss_theta1(bundle, source_x, labels):
    return ag.add(loss_c1(bundle, source_x, labels), loss_s(bundle, source_x, labels))


def similarity_weights(bundle, target_x):
    """
    Similarity of each target sample to the source classes, w_j = max_c p_c

    Computed from G_c(G_f2(x)) without recording anything.
    """
    if np.asarray(target_x).shape[0] == 0:
        raise ContractError("Empty target batch")
    with ag.no_grad():
        p = ag.sigmoid(head_logits(bundle, 'c', forward_features(bundle, 'f2', target_x)))
    return BatchWeights.from_probabilities(p.values)


def unknown_weight(w_value, mode):
    if mode == 'literal_w':
        return w_value
    if mode == 'one_minus_w':
        return 1.0 - w_value
    raise ContractError(f"Unknown unknown_weight_mode '{mode}'")


def loss_c2(bundle, source_x, labels, target_x, weights, mode='one_minus_w'):
    """
    Extended classifier loss

    Cross-entropy of C_y2 over K+1 outputs on source labels plus u times the
    cross-entropy of the lowest-similarity target sample against K+1.
    """
    if len(weights) == 0 or np.asarray(target_x).shape[0] == 0:
        raise ContractError("Empty target batch")
    _check_labels(labels, bundle.num_known)
    source_part = cross_entropy_logits(
        head_logits(bundle, 'y2', forward_features(bundle, 'f2', source_x)), labels)
    selected = int(np.argmin(weights.w))
    u = unknown_weight(float(weights.w[selected]), mode)
    target_row = ag.select_rows(ag.Tensor(target_x), [selected])
    target_part = unknown_term(head_logits(bundle, 'y2', forward_features(bundle, 'f2', target_row)), u)
    return ag.add(source_part, target_part)


def loss_d(bundle, source_x, target_x, weights):
    """Weighted adversarial loss of G_d on G_f2 features"""
    source_logits = head_logits(bundle, 'd', forward_features(bundle, 'f2', source_x))
    target_logits = head_logits(bundle, 'd', forward_features(bundle, 'f2', target_x))
    return adversarial_term(source_logits, target_logits, weights.w)


def loss_ds(bundle, triplet, indicator):
    """Domain-separating loss of T_ds on the G_f2 features of the triplet"""
    logits = head_logits(bundle, 'ds', forward_features(bundle, 'f2', triplet.stacked()))
    return domain_separation_term(logits, indicator)


def loss_theta2a(bundle, source_x, labels, target_x, weights, triplet, alpha,
                 mode='one_minus_w', adversarial_weights=None):
    """
    L_C2 + L_d + alpha L_ds with standard labels

    adversarial_weights replaces the weights inside L_d only (uniform weights
    for the unweighted variant).
    """
    adv = weights if adversarial_weights is None else adversarial_weights
    total = ag.add(loss_c2(bundle, source_x, labels, target_x, weights, mode),
                   loss_d(bundle, source_x, target_x, adv))
    return ag.add(total, ag.scalar_mul(loss_ds(bundle, triplet, Indicator(STANDARD)), alpha))


def loss_theta2b(bundle, source_x, labels, target_x, weights, triplet, alpha,
                 mode='one_minus_w', adversarial_weights=None, adversarial_scale=1.0):
    """
    L_C2 - lambda L_d + alpha L_ds with revised labels

    adversarial_scale is lambda, the scheduled weight of the reversed
    discriminator loss.
    """
    adv = weights if adversarial_weights is None else adversarial_weights
    total = ag.sub(loss_c2(bundle, source_x, labels, target_x, weights, mode),
                   ag.scalar_mul(loss_d(bundle, source_x, target_x, adv), adversarial_scale))
    return ag.add(total, ag.scalar_mul(loss_ds(bundle, triplet, Indicator(REVISED)), alpha))


def _mutual_outputs(bundle, source_x, target_x, detach, activation):
    if detach not in (None, 'ssn', 'dmn'):
        raise ContractError(f"detach must be None, 'ssn' or 'dmn', got {detach!r}")
    if np.asarray(source_x).shape[0] == 0 or np.asarray(target_x).shape[0] == 0:
        raise ContractError("Mutual loss needs nonempty source and target batches")
    outputs = []
    for x in (source_x, target_x):
        ssn = activation(head_logits(bundle, 'c', forward_features(bundle, 'f1', x)))
        dmn = activation(head_logits(bundle, 'c', forward_features(bundle, 'f2', x)))
        if detach == 'ssn':
            ssn = ag.detach(ssn)
        elif detach == 'dmn':
            dmn = ag.detach(dmn)
        outputs.append((ssn, dmn))
    return outputs


def loss_mse_mutual(bundle, source_x, target_x, detach=None):
    """
    Mutual loss between G_c(G_f1(x)) and G_c(G_f2(x))

    detach names the network whose branch is held constant: 'dmn' while the
    SSN is updated, 'ssn' while the DMN is updated.
    """
    (ssn_s, dmn_s), (ssn_t, dmn_t) = _mutual_outputs(bundle, source_x, target_x, detach, ag.sigmoid)
    return mutual_term(ssn_s, dmn_s, ssn_t, dmn_t)


def loss_kl_mutual(bundle, source_x, target_x, detach=None):
    """Symmetric-KL replacement for the mutual loss"""
    (ssn_s, dmn_s), (ssn_t, dmn_t) = _mutual_outputs(bundle, source_x, target_x, detach, lambda z: z)
    return symmetric_kl_term(ssn_s, dmn_s, ssn_t, dmn_t)
