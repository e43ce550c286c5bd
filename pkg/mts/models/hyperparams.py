"""
Hyperparameter Model for the MTS Domain Adaptation toolkit
Optimizer settings, loss trade-offs, architecture sizes and ablation switches
"""

import math
from dataclasses import dataclass, field, replace

from mts.errors import ContractError

UNKNOWN_WEIGHT_MODES = ('literal_w', 'one_minus_w')
VARIANTS = ('full', 'no_w', 'no_mutual', 'no_ds', 'no_mse', 'no_s')
ABLATIONS = VARIANTS + ('source_only',)
INFERENCE_RULES = ('classifier', 'similarity')
ADVERSARIAL_SCHEDULES = ('constant', 'dann')


@dataclass(frozen=True)
class Hyperparams:
    """Everything the trainer needs besides the data"""

    alpha: float = 0.8
    beta: float = 0.5
    lr: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 32
    epochs: int = 300
    hidden_dim: int = 32
    feature_dim: int = 16
    disc_hidden_dim: int = 16
    seed: int = 47
    unknown_weight_mode: str = 'one_minus_w'
    ablation: str = 'full'
    lr_decay_epochs: tuple = field(default_factory=tuple)
    lr_decay_factor: float = 0.1
    source_only_threshold: float = 0.5
    adversarial_schedule: str = 'dann'

    def __post_init__(self):
        for name in ('alpha', 'beta', 'lr', 'momentum', 'weight_decay'):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.batch_size < 2:
            raise ContractError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        for name in ('hidden_dim', 'feature_dim', 'disc_hidden_dim'):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.unknown_weight_mode not in UNKNOWN_WEIGHT_MODES:
            raise ContractError(f"unknown_weight_mode must be one of {UNKNOWN_WEIGHT_MODES}")
        if self.ablation not in ABLATIONS:
            raise ContractError(f"ablation must be one of {ABLATIONS}")
        if not 0.0 <= self.source_only_threshold <= 1.0:
            raise ContractError("source_only_threshold must lie in [0, 1]")
        if self.adversarial_schedule not in ADVERSARIAL_SCHEDULES:
            raise ContractError(f"adversarial_schedule must be one of {ADVERSARIAL_SCHEDULES}")
        object.__setattr__(self, 'lr_decay_epochs', tuple(sorted(int(e) for e in self.lr_decay_epochs)))

    @property
    def shared_extractor(self):
        return self.ablation == 'no_s'

    @property
    def uniform_weights(self):
        return self.ablation == 'no_w'

    @property
    def kl_mutual(self):
        return self.ablation == 'no_mse'

    def effective(self):
        """Return a copy with the loss trade-offs the ablation switches off set to 0"""
        if self.ablation == 'no_mutual':
            return replace(self, beta=0.0)
        if self.ablation == 'no_ds':
            return replace(self, alpha=0.0)
        return self

    def lr_at(self, epoch):
        """Learning rate for a 0-based epoch under the step decay schedule"""
        drops = sum(1 for boundary in self.lr_decay_epochs if epoch >= boundary)
        return self.lr * (self.lr_decay_factor ** drops)

    def adversarial_scale(self, progress):
        """
        Weight of the reversed discriminator loss in sub-step b

        'dann' ramps 2 / (1 + exp(-10 p)) - 1 from 0 at the first step towards
        1 at the end of training; 'constant' is always 1.

        Args:
            progress (float): Fraction of training steps done, in [0, 1]
        """
        if self.adversarial_schedule == 'constant':
            return 1.0
        return 2.0 / (1.0 + math.exp(-10.0 * progress)) - 1.0
