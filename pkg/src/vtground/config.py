"""Run configuration, JSON-serializable."""

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError

ABLATIONS = ("full", "no_vc", "no_tc", "no_cc", "backbone")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    N_c: int = 16
    d_v: int = 64
    d_q: int = 64
    d_c: int = 64
    d_emb: int = 0          # 0 = take the embedding table's dimension
    n_heads: int = 4
    d_f: int = 0            # 0 = 2 * d_v
    t_min: float = 0.5
    t_max: float = 1.0
    nms_threshold: float = 0.49
    min_freq: int = 3
    ablation: str = "full"
    max_query_len: int = 30
    dense_proposals: bool = True
    pooling: str = "max"
    # Literal sequence-length attention scaling sqrt((N+M)/n_heads) instead
    # of the per-head feature dimension; off by default.
    literal_attention_scaling: bool = False
    # Multiplier on the uniform +-1/sqrt(fan_in) initialization bounds.
    init_gain: float = 1.0
    # Decoupled weight decay: after each optimizer step every weight matrix
    # is multiplied by (1 - weight_decay * learning_rate); layer-norm gains
    # and biases are exempt.  0 disables it.
    weight_decay: float = 0.0
    # "uniform" draws every tensor from +-init_gain/sqrt(fan_in);
    # "orthogonal" additionally replaces each weight matrix by a
    # Frobenius-norm-preserving orthogonal factor.
    init_scheme: str = "uniform"
    # Stepwise learning-rate schedule: when the completed-step fraction
    # reaches lr_milestones[i], the learning rate becomes
    # learning_rate * lr_factors[i].  Empty = constant learning rate.
    lr_milestones: tuple = ()
    lr_factors: tuple = ()

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")
        if not (0.0 < self.nms_threshold < 1.0):
            raise ConfigurationError("nms_threshold must lie in (0, 1)")
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"ablation must be one of {ABLATIONS}")
        if self.d_v % self.n_heads != 0:
            raise ConfigurationError("n_heads must divide d_v")
        if self.d_q % 2 != 0:
            raise ConfigurationError("d_q must be even (two directions)")
        if not (0.0 <= self.t_min < self.t_max <= 1.0):
            raise ConfigurationError("need 0 <= t_min < t_max <= 1")
        if self.d_f == 0:
            self.d_f = 2 * self.d_v
        if self.pooling not in ("max", "mean"):
            raise ConfigurationError("pooling must be 'max' or 'mean'")
        if self.init_gain <= 0:
            raise ConfigurationError("init_gain must be positive")
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be non-negative")
        if self.weight_decay * self.learning_rate >= 1.0:
            raise ConfigurationError(
                "weight_decay * learning_rate must stay below 1")
        if self.init_scheme not in ("uniform", "orthogonal"):
            raise ConfigurationError(
                "init_scheme must be 'uniform' or 'orthogonal'")
        self.lr_milestones = tuple(self.lr_milestones)
        self.lr_factors = tuple(self.lr_factors)
        if len(self.lr_milestones) != len(self.lr_factors):
            raise ConfigurationError(
                "lr_milestones and lr_factors must have equal length")
        if any(f <= 0 for f in self.lr_factors):
            raise ConfigurationError("lr_factors must be positive")
        if list(self.lr_milestones) != sorted(set(self.lr_milestones)) or \
                any(not 0.0 < m <= 1.0 for m in self.lr_milestones):
            raise ConfigurationError(
                "lr_milestones must be strictly increasing fractions in (0, 1]")

    @property
    def d_h(self):
        return self.d_v // self.n_heads

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = {k for k in d if k not in known}
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))
