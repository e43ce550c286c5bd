"""
Trained Model for the MTS Domain Adaptation toolkit
A network bundle together with the rule used to label new samples
"""

from dataclasses import dataclass

from mts.errors import ContractError
from mts.models.hyperparams import INFERENCE_RULES

MTS = 'mts'
SOURCE_ONLY = 'source_only'
KINDS = (MTS, SOURCE_ONLY)


@dataclass
class TrainedModel:
    """
    Networks plus inference settings

    kind 'mts' labels by C_y2 argmax (or by similarity when inference is
    'similarity'); kind 'source_only' labels by known-class argmax and calls a
    sample unknown when its top probability does not exceed threshold.
    """

    bundle: object
    kind: str = MTS
    threshold: float = 0.5
    inference: str = 'classifier'
    similarity_threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"Unknown model kind '{self.kind}'")
        if self.inference not in INFERENCE_RULES:
            raise ContractError(f"Unknown inference rule '{self.inference}'")

    @property
    def num_known(self):
        return self.bundle.num_known

    def snapshot(self):
        return TrainedModel(self.bundle.snapshot(), self.kind, self.threshold,
                            self.inference, self.similarity_threshold)
