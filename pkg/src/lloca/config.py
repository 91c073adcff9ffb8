"""Plain-text run configuration: ``section.key = value`` lines.

Unknown keys are rejected so typos fail loudly. The environment variable
``LLOCA_SEED`` overrides the configured seed. A trained run writes its
effective configuration (plus target standardization) back out in the same
format, so evaluation can rebuild the model from the checkpoint directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .frames_net import AugmentConfig, FramePolicy
from .lloca_model import ModelConfig
from .tensor_rep import RepSpec
from .toy_task import Standardization, TrainConfig

ENV_SEED = "LLOCA_SEED"


def parse_config_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in {"true", "1", "yes"}:
        return True
    if lowered in {"false", "0", "no"}:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


@dataclass
class RunConfig:
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    policy_name: str = "learned-pd"
    modified_vectors: bool = True
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    stats: Standardization | None = None

    def policy(self) -> FramePolicy:
        return FramePolicy.parse(self.policy_name, modified=self.modified_vectors,
                                 augment=self.augment)


_SETTERS = {
    "seed": lambda c, v: setattr(c, "seed", int(v)),
    "frames.policy": lambda c, v: setattr(c, "policy_name", v),
    "frames.modified": lambda c, v: setattr(c, "modified_vectors", _parse_bool(v, "frames.modified")),
    "model.hidden_dim": lambda c, v: setattr(c.model, "hidden_dim", int(v)),
    "model.num_heads": lambda c, v: setattr(c.model, "num_heads", int(v)),
    "model.num_blocks": lambda c, v: setattr(c.model, "num_blocks", int(v)),
    "model.head_spec": lambda c, v: setattr(c.model, "head_spec", RepSpec.parse(v)),
    "model.attention_metric": lambda c, v: setattr(c.model, "attention_metric", v),
    "model.readout": lambda c, v: setattr(c.model, "readout", v),
    "model.mlp_ratio": lambda c, v: setattr(c.model, "mlp_ratio", int(v)),
    "model.n_scalars": lambda c, v: setattr(c.model, "n_scalars", int(v)),
    "model.frames_hidden": lambda c, v: setattr(c.model, "frames_hidden", int(v)),
    "model.reference_particles": lambda c, v: setattr(
        c.model, "reference_particles", _parse_bool(v, "model.reference_particles")),
    "augment.boost_sigma": lambda c, v: setattr(c, "augment", AugmentConfig(
        float(v), c.augment.boost_clip, c.augment.rotations)),
    "augment.boost_clip": lambda c, v: setattr(c, "augment", AugmentConfig(
        c.augment.boost_sigma, float(v), c.augment.rotations)),
    "augment.rotations": lambda c, v: setattr(c, "augment", AugmentConfig(
        c.augment.boost_sigma, c.augment.boost_clip, _parse_bool(v, "augment.rotations"))),
    "optim.lr": lambda c, v: setattr(c.train, "lr", float(v)),
    "optim.beta1": lambda c, v: setattr(c.train, "beta1", float(v)),
    "optim.beta2": lambda c, v: setattr(c.train, "beta2", float(v)),
    "optim.eps": lambda c, v: setattr(c.train, "eps", float(v)),
    "optim.batch_size": lambda c, v: setattr(c.train, "batch_size", int(v)),
    "optim.iterations": lambda c, v: setattr(c.train, "iterations", int(v)),
    "optim.val_interval": lambda c, v: setattr(c.train, "val_interval", int(v)),
    "optim.plateau_patience": lambda c, v: setattr(c.train, "plateau_patience", int(v)),
    "optim.plateau_factor": lambda c, v: setattr(c.train, "plateau_factor", float(v)),
    "data.n_train": lambda c, v: setattr(c.train, "n_train", int(v)),
    "data.n_val": lambda c, v: setattr(c.train, "n_val", int(v)),
    "data.n_test": lambda c, v: setattr(c.train, "n_test", int(v)),
    "stats.mean": lambda c, v: setattr(c, "stats", Standardization(
        float(v), c.stats.std if c.stats else 1.0)),
    "stats.std": lambda c, v: setattr(c, "stats", Standardization(
        c.stats.mean if c.stats else 0.0, float(v))),
}


def load_run_config(path=None, text: str | None = None) -> RunConfig:
    if text is None:
        if path is None:
            raise ConfigError("need a config path or literal text")
        with open(path) as fh:
            text = fh.read()
    entries = parse_config_text(text)
    cfg = RunConfig()
    for key, value in entries.items():
        setter = _SETTERS.get(key)
        if setter is None:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setter(cfg, value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    if ENV_SEED in os.environ:
        cfg.seed = int(os.environ[ENV_SEED])
        cfg.train.seed = cfg.seed
    else:
        cfg.train.seed = cfg.seed
    cfg.model.validate()
    cfg.policy()  # validate the policy name early
    return cfg


def dump_run_config(cfg: RunConfig) -> str:
    lines = [
        f"seed = {cfg.seed}",
        f"frames.policy = {cfg.policy_name}",
        f"frames.modified = {str(cfg.modified_vectors).lower()}",
        f"model.hidden_dim = {cfg.model.hidden_dim}",
        f"model.num_heads = {cfg.model.num_heads}",
        f"model.num_blocks = {cfg.model.num_blocks}",
        f"model.head_spec = {cfg.model.head_spec}",
        f"model.attention_metric = {cfg.model.attention_metric}",
        f"model.readout = {cfg.model.readout}",
        f"model.mlp_ratio = {cfg.model.mlp_ratio}",
        f"model.n_scalars = {cfg.model.n_scalars}",
        f"model.frames_hidden = {cfg.model.frames_hidden}",
        f"model.reference_particles = {str(cfg.model.reference_particles).lower()}",
        f"augment.boost_sigma = {cfg.augment.boost_sigma!r}",
        f"augment.boost_clip = {cfg.augment.boost_clip!r}",
        f"augment.rotations = {str(cfg.augment.rotations).lower()}",
        f"optim.lr = {cfg.train.lr!r}",
        f"optim.beta1 = {cfg.train.beta1!r}",
        f"optim.beta2 = {cfg.train.beta2!r}",
        f"optim.eps = {cfg.train.eps!r}",
        f"optim.batch_size = {cfg.train.batch_size}",
        f"optim.iterations = {cfg.train.iterations}",
        f"optim.val_interval = {cfg.train.val_interval}",
        f"optim.plateau_patience = {cfg.train.plateau_patience}",
        f"optim.plateau_factor = {cfg.train.plateau_factor!r}",
        f"data.n_train = {cfg.train.n_train}",
        f"data.n_val = {cfg.train.n_val}",
        f"data.n_test = {cfg.train.n_test}",
    ]
    if cfg.stats is not None:
        lines.append(f"stats.mean = {cfg.stats.mean!r}")
        lines.append(f"stats.std = {cfg.stats.std!r}")
    return "\n".join(lines) + "\n"
