"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

PROTOCOLS = ("paper-eval", "ablation-eval")


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.95
    lam: float = 0.95
    clip_eps: float = 0.2
    batch_size: int = 4096
    minibatch_size: int = 256
    policy_lr: float = 5e-5
    value_lr: float = 1e-2
    momentum: float = 0.9
    epochs: int = 1
    horizon: float = 20.0           # seconds
    rsi: bool = True
    early_termination: bool = True
    seed: int = 0
    policy_hidden: tuple = (1024, 512)
    value_hidden: tuple = (1024, 512)
    action_sigma: float = 0.1
    policy_output_scale: float = 1e-2
    value_output_scale: float = 1.0
    advantage_norm: bool = False
    normalize_inputs: bool = False
    sample_budget: int = 4096
    eval_episodes: int = 32
    eval_interval: int = 1
    eval_protocol: str = "paper-eval"
    deterministic_eval: bool = True
    workers: int = 1
    log_wall_time: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be positive")
        if self.batch_size <= 0 or self.minibatch_size <= 0:
            raise ValueError("batch sizes must be positive")
        if self.minibatch_size > self.batch_size:
            raise ValueError(f"minibatch_size ({self.minibatch_size}) exceeds batch_size ({self.batch_size})")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.action_sigma <= 0.0:
            raise ValueError("action_sigma must be positive")
        if self.eval_protocol not in PROTOCOLS:
            raise ValueError(f"eval_protocol must be one of {PROTOCOLS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.eval_interval < 1 or self.eval_episodes < 1:
            raise ValueError("eval_interval and eval_episodes must be at least 1")
        if self.sample_budget < 0:
            raise ValueError("sample_budget must be non-negative")
        object.__setattr__(self, "policy_hidden", tuple(int(h) for h in self.policy_hidden))
        object.__setattr__(self, "value_hidden", tuple(int(h) for h in self.value_hidden))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy_hidden"] = list(self.policy_hidden)
        d["value_hidden"] = list(self.value_hidden)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(doc) - set(known)
        if unknown:
            raise ValueError(f"unknown training keys {sorted(unknown)}")
        kw = {}
        for k, v in doc.items():
            default = known[k].default
            if isinstance(default, bool):
                if not isinstance(v, bool):
                    raise ValueError(f"'{k}' must be a boolean")
                kw[k] = v
            elif isinstance(default, int):
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ValueError(f"'{k}' must be an integer")
                kw[k] = v
            elif isinstance(default, float):
                kw[k] = float(v)
            elif isinstance(default, tuple):
                kw[k] = tuple(v)
            else:
                kw[k] = v
        return cls(**kw)
