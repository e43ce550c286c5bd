"""
Configuration for the MTS Domain Adaptation toolkit
Environment settings and the key = value run configuration file
"""

import logging
import os
from dataclasses import dataclass, field, fields, replace

from dotenv import load_dotenv

from mts.errors import ConfigError, ContractError, DataError
from mts.models.dataset import ShiftConfig
from mts.models.hyperparams import (ABLATIONS, ADVERSARIAL_SCHEDULES, INFERENCE_RULES, UNKNOWN_WEIGHT_MODES,
                                    Hyperparams)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Process-wide settings read from the environment"""

    log_level: str = 'INFO'
    output_root: str = 'runs'
    workers: int = 1


def load_settings(overrides=None):
    """
    Load settings from the environment (and a .env file when present)

    Args:
        overrides (dict): Optional values taking precedence over the environment

    Returns:
        Settings: Resolved settings
    """
    load_dotenv()
    values = {
        'log_level': os.environ.get('MTS_LOG_LEVEL', 'INFO').upper(),
        'output_root': os.environ.get('MTS_OUTPUT_ROOT', 'runs'),
        'workers': int(os.environ.get('MTS_WORKERS', 1)),
    }
    if overrides:
        values.update(overrides)
    return Settings(**values)


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return parse


def _floats(text):
    return tuple(float(v) for v in text.split(',') if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(',') if v.strip())


def _option(default, parse, doc):
    return field(default=default, metadata={'parse': parse, 'doc': doc})


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a run needs; one field per accepted key
    """

    # synthetic data
    d: int = _option(2, int, "feature dimension")
    num_known: int = _option(3, int, "known classes K")
    num_unknown: int = _option(2, int, "unknown classes U (target only)")
    rotation_deg: float = _option(15.0, float, "target rotation in degrees (domain gap)")
    translation: tuple = _option((), _floats, "target translation, comma separated; empty = zeros")
    noise_sigma: float = _option(0.5, float, "per-class Gaussian noise")
    n_source: int = _option(300, int, "source samples")
    n_target: int = _option(300, int, "target samples")
    # optimization
    alpha: float = _option(0.8, float, "weight of the domain-separating loss")
    beta: float = _option(0.5, float, "weight of the mutual loss")
    lr: float = _option(1e-4, float, "learning rate")
    momentum: float = _option(0.9, float, "SGD momentum")
    weight_decay: float = _option(5e-4, float, "coupled weight decay")
    batch_size: int = _option(32, int, "samples per domain per mini-batch")
    epochs: int = _option(300, int, "fixed epoch budget")
    lr_decay_epochs: tuple = _option((), _ints, "epochs where lr is multiplied by lr_decay_factor")
    lr_decay_factor: float = _option(0.1, float, "step decay factor")
    hidden_dim: int = _option(32, int, "extractor hidden width")
    feature_dim: int = _option(16, int, "feature width m")
    disc_hidden_dim: int = _option(16, int, "discriminator hidden width")
    unknown_weight_mode: str = _option('one_minus_w', _choice(UNKNOWN_WEIGHT_MODES), "weight of the unknown-class term")
    adversarial_schedule: str = _option('dann', _choice(ADVERSARIAL_SCHEDULES),
                                        "weight of the reversed discriminator loss over training")
    # evaluation
    inference: str = _option('classifier', _choice(INFERENCE_RULES), "test-time labeling rule")
    similarity_threshold: float = _option(0.5, float, "w_j below this is unknown (inference = similarity)")
    source_only_threshold: float = _option(0.5, float, "baseline rejects when top probability <= this")
    # run
    seed: int = _option(47, int, "seed for data, initialization and sampling")
    ablation: str = _option('full', _choice(ABLATIONS), "method variant")
    seeds: int = _option(1, int, "number of consecutive seeds for ablate/benchmark")
    rotations: tuple = _option((15.0, 45.0, 75.0), _floats, "rotations swept by benchmark")
    workers: int = _option(1, int, "parallel processes for ablate/benchmark")
    out_dir: str = _option('runs/default', str, "output directory")

    def validate(self):
        """Build the derived objects once so bad values surface as ConfigError"""
        for key in ('similarity_threshold', 'source_only_threshold'):
            if not 0.0 <= getattr(self, key) <= 1.0:
                raise ConfigError(f"{key} must lie in [0, 1]", key=key)
        try:
            self.shift_config()
            self.hyperparams()
        except ContractError as e:
            raise ConfigError(str(e))
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1", key='seeds')
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", key='workers')
        return self

    def shift_config(self, rotation_deg=None):
        return ShiftConfig(
            d=self.d, num_known=self.num_known, num_unknown=self.num_unknown,
            rotation_deg=self.rotation_deg if rotation_deg is None else rotation_deg,
            translation=self.translation, noise_sigma=self.noise_sigma,
            n_source=self.n_source, n_target=self.n_target, seed=self.seed)

    def hyperparams(self, ablation=None):
        return Hyperparams(
            alpha=self.alpha, beta=self.beta, lr=self.lr, momentum=self.momentum,
            weight_decay=self.weight_decay, batch_size=self.batch_size, epochs=self.epochs,
            hidden_dim=self.hidden_dim, feature_dim=self.feature_dim,
            disc_hidden_dim=self.disc_hidden_dim, seed=self.seed,
            unknown_weight_mode=self.unknown_weight_mode,
            ablation=self.ablation if ablation is None else ablation,
            lr_decay_epochs=self.lr_decay_epochs, lr_decay_factor=self.lr_decay_factor,
            source_only_threshold=self.source_only_threshold,
            adversarial_schedule=self.adversarial_schedule)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def with_overrides(self, **values):
        return replace(self, **values)


KEYS = tuple(f.name for f in fields(RunConfig))


def parse_run_config(text, source_name='<config>'):
    """
    Parse key = value lines

    Args:
        text (str): File contents; '#' starts a comment
        source_name (str): Name used in log messages

    Returns:
        RunConfig: Validated configuration
    """
    specs = {f.name: f for f in fields(RunConfig)}
    values = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError("expected 'key = value'", line=line_number)
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in specs:
            raise ConfigError("unknown key", key=key, line=line_number)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=line_number)
        try:
            values[key] = specs[key].metadata['parse'](value)
        except ValueError as e:
            raise ConfigError(f"bad value '{value}': {e}", key=key, line=line_number)
    logger.debug(f"Parsed {len(values)} keys from {source_name}")
    return RunConfig(**values).validate()


def load_run_config(path):
    """Read and parse a config file"""
    if not os.path.exists(path):
        raise DataError(f"Config file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return parse_run_config(f.read(), source_name=path)


def _format(value):
    if isinstance(value, tuple):
        return ','.join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_run_config(config):
    """Every key, sorted, one per line"""
    return ''.join(f"{name} = {_format(getattr(config, name))}\n" for name in sorted(KEYS))


def describe_keys():
    """(key, default, doc) for every accepted key"""
    return [(f.name, _format(f.default), f.metadata['doc']) for f in fields(RunConfig)]
