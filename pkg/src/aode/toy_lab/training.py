"""Adam fine-tuning with slanted triangular LR, layer-wise decay, freezing and LwF."""

from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..schedules import StlrConfig, effective_lr, indexed_layer_rules, llrd_multipliers
from .domains import SyntheticDomain
from .model import ToyModel, log_softmax
from .rng import stream

__all__ = ["TrainConfig", "TrainingDiverged", "train"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 300
    batch_size: int = 32
    lr_max: float = 1e-2
    cut_frac: float = 0.15
    ratio: float = 32.0
    llrd_decay: float = 0.9
    freeze: tuple[str, ...] = ()  # parameter names or globs
    lwf_weight: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")
        if not 0 < self.llrd_decay <= 1:
            raise ValueError(f"llrd_decay must be in (0, 1], got {self.llrd_decay}")
        if self.lwf_weight < 0:
            raise ValueError("lwf_weight must be non-negative")
        if self.steps:
            self.stlr  # validates the schedule parameters

    @property
    def stlr(self) -> StlrConfig:
        return StlrConfig(self.lr_max, self.steps, self.cut_frac, self.ratio)

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)

    def is_frozen(self, name: str) -> bool:
        return any(fnmatch.fnmatchcase(name, pat) for pat in self.freeze)


@dataclass
class _AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def train(
    model: ToyModel,
    domain: SyntheticDomain,
    cfg: TrainConfig,
    reference: ToyModel | None = None,
    *,
    stream_name: str = "",
    losses: list[float] | None = None,
    max_steps: int | None = None,
) -> ToyModel:
    """Return a copy of ``model`` after ``cfg.steps`` Adam steps on ``domain``.

    Step ``t`` (0-based) moves parameter ``name`` with learning rate
    ``effective_lr(t, name)``. Minibatches are drawn from the stream
    ``(cfg.seed, "batches", domain.name, stream_name)``; ``losses`` collects
    the per-step training loss when given. ``max_steps`` stops early while
    keeping the schedule laid out over ``cfg.steps``.
    """
    if model.input_dim != domain.input_dim or model.num_classes != domain.num_classes:
        raise ValueError(
            f"model ({model.input_dim} -> {model.num_classes}) does not fit domain "
            f"{domain.name!r} ({domain.input_dim} -> {domain.num_classes})"
        )
    out = model.copy()
    if cfg.steps == 0:
        return out
    names = out.parameter_names()
    trainable = [n for n in names if not cfg.is_frozen(n)]
    if not trainable:
        return out
    schedule = cfg.stlr
    rates = llrd_multipliers(names, indexed_layer_rules(out.num_encoder_layers),
                             cfg.llrd_decay, max(out.num_encoder_layers, 1))
    x_all, y_all = domain.sample("train")
    rng = stream(cfg.seed, "batches", domain.name, stream_name)
    use_lwf = reference is not None and cfg.lwf_weight > 0
    state = _AdamState(
        {n: np.zeros_like(out.get(n)) for n in trainable},
        {n: np.zeros_like(out.get(n)) for n in trainable},
    )
    n_steps = cfg.steps if max_steps is None else min(cfg.steps, max_steps)
    for t in range(n_steps):
        idx = rng.integers(0, len(y_all), cfg.batch_size)
        x, y = x_all[idx], y_all[idx]
        ref_logp = log_softmax(reference.logits(x)) if use_lwf else None
        value, grads = out.loss_and_grads(x, y, reference_logp=ref_logp, lwf_weight=cfg.lwf_weight)
        if not math.isfinite(value):
            raise TrainingDiverged(
                f"non-finite loss {value} at step {t} on domain {domain.name!r} "
                f"(lr_max={cfg.lr_max})"
            )
        if losses is not None:
            losses.append(value)
        bc1 = 1.0 - ADAM_BETA1 ** (t + 1)
        bc2 = 1.0 - ADAM_BETA2 ** (t + 1)
        for name in trainable:
            g = grads[name]
            m, v = state.m[name], state.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            lr = effective_lr(t, name, schedule, rates)
            out.get(name)[...] -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return out
