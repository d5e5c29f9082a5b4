"""Fine-tuning schedules: slanted triangular LR and layer-wise LR decay."""

from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

__all__ = [
    "ScheduleError",
    "UnclassifiedParameter",
    "StlrConfig",
    "LayerRateMap",
    "NON_ENCODER",
    "stlr_lr",
    "stlr_curve",
    "indexed_layer_rules",
    "llrd_multipliers",
    "effective_lr",
]


class ScheduleError(ValueError):
    pass


class UnclassifiedParameter(ScheduleError):
    def __init__(self, names: Sequence[str]) -> None:
        self.names = list(names)
        super().__init__("no layer rule matches parameter(s): " + ", ".join(self.names))


@dataclass(frozen=True)
class StlrConfig:
    lr_max: float
    total_steps: int
    cut_frac: float = 0.15
    ratio: float = 32.0

    def __post_init__(self) -> None:
        if not (self.lr_max > 0 and math.isfinite(self.lr_max)):
            raise ScheduleError(f"lr_max must be positive, got {self.lr_max}")
        if not 0 < self.cut_frac < 1:
            raise ScheduleError(f"cut_frac must be in (0, 1), got {self.cut_frac}")
        if not self.ratio > 1:
            raise ScheduleError(f"ratio must be > 1, got {self.ratio}")
        if int(self.total_steps) != self.total_steps or self.total_steps < 2:
            raise ScheduleError(f"total_steps must be an integer >= 2, got {self.total_steps}")
        if self.cut < 1:
            raise ScheduleError(
                f"cut_frac * total_steps must be >= 1 (cut_frac={self.cut_frac}, "
                f"total_steps={self.total_steps})"
            )

    @property
    def cut(self) -> int:
        return math.floor(self.cut_frac * self.total_steps)


def _stlr_factor(step: int, cfg: StlrConfig) -> float:
    cut, total = cfg.cut, cfg.total_steps
    if step < cut:
        p = step / cut
    else:
        # T - cut == cut * (1/cut_frac - 1) whenever cut_frac * T is integral;
        # using T - cut keeps the end of the schedule on the floor otherwise.
        p = 1.0 - (step - cut) / (total - cut)
    return (1.0 + p * (cfg.ratio - 1.0)) / cfg.ratio


def stlr_lr(step: int, cfg: StlrConfig) -> float:
    """Slanted triangular learning rate at ``step`` (0..total_steps).

    Climbs linearly from ``lr_max / ratio`` to ``lr_max`` at step ``cut``
    then falls linearly back to ``lr_max / ratio`` at ``total_steps``.
    """
    if not 0 <= step <= cfg.total_steps:
        raise ScheduleError(f"step {step} outside [0, {cfg.total_steps}]")
    return cfg.lr_max * _stlr_factor(step, cfg)


def stlr_curve(cfg: StlrConfig) -> list[float]:
    return [stlr_lr(s, cfg) for s in range(cfg.total_steps + 1)]


NON_ENCODER = None
LayerRule = tuple[str, Union[int, None]]
LayerOf = Union[Sequence[LayerRule], Callable[[str], Union[int, None]]]


def indexed_layer_rules(
    num_encoder_layers: int,
    pattern: str = "enc.{i}.*",
    non_encoder: str = "*",
) -> list[LayerRule]:
    """Rules mapping ``pattern.format(i=i)`` to encoder layer ``i`` and
    everything matching ``non_encoder`` to the non-encoder group."""
    rules: list[LayerRule] = [(pattern.format(i=i), i) for i in range(num_encoder_layers)]
    if non_encoder:
        rules.append((non_encoder, NON_ENCODER))
    return rules


_UNMATCHED = object()


def _classify(name: str, layer_of: LayerOf) -> object:
    if callable(layer_of):
        try:
            return layer_of(name)
        except LookupError:
            return _UNMATCHED
    for pattern, target in layer_of:
        if fnmatch.fnmatchcase(name, pattern):
            return target
    return _UNMATCHED


@dataclass(frozen=True)
class LayerRateMap:
    multipliers: Mapping[str, float]
    decay: float
    num_encoder_layers: int
    layer_index: Mapping[str, int | None] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        try:
            return self.multipliers[name]
        except KeyError:
            raise ScheduleError(f"unknown parameter {name!r}") from None


def _layer_multipliers(decay: float, num_layers: int) -> list[float]:
    # Built top-down so adjacent layers differ by exactly one multiplication.
    mults = [1.0] * num_layers
    for i in range(num_layers - 2, -1, -1):
        mults[i] = mults[i + 1] * decay
    return mults


def llrd_multipliers(
    param_names: Sequence[str],
    layer_of: LayerOf,
    decay: float,
    num_encoder_layers: int,
) -> LayerRateMap:
    """Layer-wise LR decay multipliers.

    The top encoder layer gets 1.0, each layer below it is scaled by a further
    ``decay``, and parameters outside the encoder share the lowest encoder
    layer's multiplier. ``layer_of`` is either a list of ``(glob, layer)``
    rules (first match wins, ``None`` meaning non-encoder) or a callable that
    raises ``LookupError`` for names it cannot place.
    """
    if not 0 < decay <= 1:
        raise ScheduleError(f"decay must be in (0, 1], got {decay}")
    if num_encoder_layers < 1:
        raise ScheduleError("num_encoder_layers must be positive")
    per_layer = _layer_multipliers(decay, num_encoder_layers)
    multipliers: dict[str, float] = {}
    layer_index: dict[str, int | None] = {}
    unmatched = []
    for name in param_names:
        layer = _classify(name, layer_of)
        if layer is _UNMATCHED:
            unmatched.append(name)
            continue
        if layer is not None and not 0 <= layer < num_encoder_layers:  # type: ignore[operator]
            raise ScheduleError(f"{name!r} classified to layer {layer}, outside 0..{num_encoder_layers - 1}")
        layer_index[name] = layer  # type: ignore[assignment]
        multipliers[name] = per_layer[0] if layer is None else per_layer[layer]  # type: ignore[index]
    if unmatched:
        raise UnclassifiedParameter(unmatched)
    return LayerRateMap(multipliers, decay, num_encoder_layers, layer_index)


def effective_lr(step: int, param_name: str, cfg: StlrConfig, rates: LayerRateMap) -> float:
    return stlr_lr(step, cfg) * rates[param_name]
