"""
Network Components for the MTS Domain Adaptation toolkit
Parameter groups, the two-network bundle and the momentum-SGD optimizer
"""

import copy
import hashlib
import logging

import numpy as np

from mts.engine import autograd as ag
from mts.errors import ContractError, DimensionError

logger = logging.getLogger(__name__)

GROUP_IDS = ('f1', 'y1', 'c', 'f2', 'y2', 'd', 'ds')
SSN_GROUPS = ('f1', 'y1', 'c')
DMN_GROUPS = ('f2', 'y2', 'c', 'd', 'ds')
EXTRACTORS = ('f1', 'f2')
SOFTMAX_HEADS = ('y1', 'y2')
SIGMOID_HEADS = ('c', 'd', 'ds')
NUM_SEPARATION_HEADS = 3


class ParamGroup:
    """
    Trainable layers of one network component plus their velocity buffers

    Each layer is a (weight, bias) pair with weight fan_in x fan_out and
    bias 1 x fan_out.
    """

    def __init__(self, group_id, layers):
        """
        Initialize a parameter group

        Args:
            group_id (str): One of GROUP_IDS
            layers (list): (weight, bias) arrays per layer
        """
        if group_id not in GROUP_IDS:
            raise ContractError(f"Unknown parameter group '{group_id}'")
        self.id = group_id
        self.layers = []
        for index, (weight, bias) in enumerate(layers):
            weight = ag.Tensor(weight, requires_grad=True, name=f"{group_id}.{index}.weight")
            bias = ag.Tensor(bias, requires_grad=True, name=f"{group_id}.{index}.bias")
            if bias.shape != (1, weight.shape[1]):
                raise DimensionError(f"{group_id} layer {index}: bias {bias.shape} vs weight {weight.shape}")
            self.layers.append((weight, bias))
        self.velocity = {p.name: np.zeros_like(p.values) for p in self.parameters()}

    @classmethod
    def initialize(cls, group_id, dims, rng):
        """
        Fan-balanced uniform weights, zero biases

        Args:
            group_id (str): Group id
            dims (list): Layer widths, e.g. [d, h, m]
            rng (np.random.Generator): Seeded generator
        """
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros((1, fan_out))))
        return cls(group_id, layers)

    @property
    def in_dim(self):
        return self.layers[0][0].shape[0]

    @property
    def out_dim(self):
        return self.layers[-1][0].shape[1]

    def parameters(self):
        return [tensor for layer in self.layers for tensor in layer]

    def forward(self, x, relu_last):
        """Affine layers with relu between them, and after the last one if relu_last"""
        if x.shape[1] != self.in_dim:
            raise DimensionError(f"{self.id}: expected {self.in_dim} input columns, got {x.shape[1]}")
        out = x
        for index, (weight, bias) in enumerate(self.layers):
            out = ag.add_row_broadcast(ag.matmul(out, weight), bias)
            if relu_last or index < len(self.layers) - 1:
                out = ag.relu(out)
        return out

    def digest(self):
        """SHA-256 over shapes and raw values of every parameter"""
        sha = hashlib.sha256()
        for param in self.parameters():
            sha.update(param.name.encode())
            sha.update(str(param.shape).encode())
            sha.update(np.ascontiguousarray(param.values).tobytes())
        return sha.hexdigest()


class NetworkBundle:
    """
    Both networks of the method

    The SSN is (f1, y1, c) and the DMN is (f2, y2, c, d, ds); group c is one
    physical object in both views. With a shared extractor, f2 is f1.
    """

    def __init__(self, groups, input_dim, num_known, shared_extractor=False):
        """
        Initialize the bundle

        Args:
            groups (dict): Group id to ParamGroup
            input_dim (int): Raw feature dimension d
            num_known (int): Number of known classes K
            shared_extractor (bool): Whether f2 aliases f1
        """
        self.groups = dict(groups)
        if shared_extractor:
            self.groups['f2'] = self.groups['f1']
        missing = [gid for gid in GROUP_IDS if gid not in self.groups]
        if missing:
            raise ContractError(f"NetworkBundle is missing groups {missing}")
        self.input_dim = int(input_dim)
        self.num_known = int(num_known)
        self.shared_extractor = bool(shared_extractor)
        self._check_arities()

    def _check_arities(self):
        k = self.num_known
        expected = {'y1': k, 'c': k, 'y2': k + 1, 'd': 1, 'ds': NUM_SEPARATION_HEADS}
        for gid, arity in expected.items():
            if self.groups[gid].out_dim != arity:
                raise DimensionError(f"Head {gid} has {self.groups[gid].out_dim} outputs, expected {arity}")
        for gid in EXTRACTORS:
            if self.groups[gid].in_dim != self.input_dim:
                raise DimensionError(f"Extractor {gid} expects {self.groups[gid].in_dim} inputs, bundle has {self.input_dim}")

    @classmethod
    def initialize(cls, input_dim, num_known, hp, rng=None, shared_extractor=None):
        """
        Build a freshly initialized bundle

        Args:
            input_dim (int): Raw feature dimension d
            num_known (int): Number of known classes K
            hp (Hyperparams): Supplies widths, seed and the shared-extractor switch
            rng (np.random.Generator): Optional generator, seeded from hp.seed otherwise
            shared_extractor (bool): Overrides hp.shared_extractor when given

        Returns:
            NetworkBundle: New bundle
        """
        rng = rng if rng is not None else np.random.default_rng(hp.seed)
        if shared_extractor is None:
            shared_extractor = hp.shared_extractor
        h, m = hp.hidden_dim, hp.feature_dim
        groups = {
            'f1': ParamGroup.initialize('f1', [input_dim, h, m], rng),
            'y1': ParamGroup.initialize('y1', [m, num_known], rng),
            'c': ParamGroup.initialize('c', [m, num_known], rng),
            'f2': ParamGroup.initialize('f2', [input_dim, h, m], rng),
            'y2': ParamGroup.initialize('y2', [m, num_known + 1], rng),
            'd': ParamGroup.initialize('d', [m, hp.disc_hidden_dim, 1], rng),
            'ds': ParamGroup.initialize('ds', [m, NUM_SEPARATION_HEADS], rng),
        }
        return cls(groups, input_dim, num_known, shared_extractor=shared_extractor)

    def group(self, group_id):
        if group_id not in self.groups:
            raise ContractError(f"Unknown parameter group '{group_id}'")
        return self.groups[group_id]

    def view(self, network):
        """Group mapping seen by one network: 'ssn' or 'dmn'"""
        if network == 'ssn':
            return {gid: self.groups[gid] for gid in SSN_GROUPS}
        if network == 'dmn':
            return {gid: self.groups[gid] for gid in DMN_GROUPS}
        raise ContractError(f"Unknown network view '{network}'")

    def unique_groups(self, group_ids):
        """Distinct ParamGroup objects for the ids, in order of first appearance"""
        seen, result = set(), []
        for gid in group_ids:
            group = self.group(gid)
            if id(group) not in seen:
                seen.add(id(group))
                result.append(group)
        return result

    def parameters(self, group_ids=GROUP_IDS):
        return [p for group in self.unique_groups(group_ids) for p in group.parameters()]

    def digest(self, group_ids=GROUP_IDS):
        """Combined hash of the given groups"""
        sha = hashlib.sha256()
        for group in self.unique_groups(group_ids):
            sha.update(group.digest().encode())
        return sha.hexdigest()

    def snapshot(self):
        """Deep copy that keeps group aliasing intact"""
        return copy.deepcopy(self)


def _as_input(batch):
    return batch if isinstance(batch, ag.Tensor) else ag.Tensor(batch)


def forward_features(bundle, extractor, batch):
    """
    Run a feature extractor

    Args:
        bundle (NetworkBundle): Networks
        extractor (str): 'f1' or 'f2'
        batch: n x d matrix or Tensor

    Returns:
        Tensor: n x m features
    """
    if extractor not in EXTRACTORS:
        raise ContractError(f"Unknown extractor '{extractor}'")
    x = _as_input(batch)
    if x.shape[1] != bundle.input_dim:
        raise DimensionError(f"Batch has {x.shape[1]} columns, networks expect {bundle.input_dim}")
    return bundle.group(extractor).forward(x, relu_last=True)


def head_logits(bundle, head, features):
    """Pre-activation outputs of a head"""
    if head not in SOFTMAX_HEADS + SIGMOID_HEADS:
        raise ContractError(f"Unknown head '{head}'")
    return bundle.group(head).forward(_as_input(features), relu_last=False)


def head_forward(bundle, head, features):
    """
    Probabilities of a head

    y1 and y2 are row-softmax; c, d and ds are independent sigmoids.
    """
    logits = head_logits(bundle, head, features)
    if head in SOFTMAX_HEADS:
        return ag.softmax_rows(logits)
    return ag.sigmoid(logits)


def sgd_momentum_step(groups, grads, hp, lr=None):
    """
    One momentum-SGD update with coupled weight decay

    v <- momentum * v + grad + weight_decay * param
    param <- param - lr * v

    Args:
        groups: ParamGroups to update (duplicates are updated once)
        grads (dict): Parameter name to gradient, exactly covering the groups
        hp (Hyperparams): momentum, weight_decay and default lr
        lr (float): Learning rate override (scheduled rate)

    Returns:
        list: The updated groups
    """
    lr = hp.lr if lr is None else lr
    unique, seen = [], set()
    for group in groups:
        if id(group) not in seen:
            seen.add(id(group))
            unique.append(group)
    expected = {p.name for group in unique for p in group.parameters()}
    if set(grads) != expected:
        raise ContractError(
            f"Gradients for {sorted(set(grads) ^ expected)} do not match the groups being updated")
    for group in unique:
        for param in group.parameters():
            grad = grads[param.name]
            if grad.shape != param.shape:
                raise DimensionError(f"{param.name}: gradient {grad.shape} vs parameter {param.shape}")
            velocity = hp.momentum * group.velocity[param.name] + grad + hp.weight_decay * param.values
            group.velocity[param.name] = velocity
            param.values = param.values - lr * velocity
    return unique
