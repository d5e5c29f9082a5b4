"""Synthetic Gaussian-mixture domains standing in for speech corpora."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import stream

__all__ = ["DomainConfig", "SyntheticDomain", "make_domains"]


@dataclass(frozen=True)
class DomainConfig:
    input_dim: int = 8
    num_classes: int = 4
    count: int = 3
    separation: float = 1.2
    shift: float = 2.5
    mean_jitter: float = 0.8
    scale_change: float = 0.5
    train_per_class: int = 200
    test_per_class: int = 100
    label_permutation: bool = False

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError("input_dim must be >= 1 and num_classes >= 2")
        if self.count < 0:
            raise ValueError("domain count must be non-negative")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ValueError("per-class sample counts must be positive")
        if min(self.separation, self.shift, self.mean_jitter, self.scale_change) < 0:
            raise ValueError("separation, shift, mean_jitter and scale_change must be >= 0")


@dataclass
class SyntheticDomain:
    name: str
    class_means: np.ndarray  # (num_classes, input_dim)
    class_scales: np.ndarray  # (num_classes,)
    seed: int
    train_per_class: int
    test_per_class: int
    label_permutation: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def input_dim(self) -> int:
        return self.class_means.shape[1]

    @property
    def num_classes(self) -> int:
        return self.class_means.shape[0]

    def sample(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        """Class-balanced ``(x, y)`` for ``split`` in {"train", "test"}.

        Splits come from distinct random streams, so they never share draws.
        """
        if split not in ("train", "test"):
            raise ValueError(f"unknown split {split!r}")
        if split not in self._cache:
            per_class = self.train_per_class if split == "train" else self.test_per_class
            rng = stream(self.seed, "samples", self.name, split)
            c, d = self.class_means.shape
            y = np.repeat(np.arange(c), per_class)
            x = self.class_means[y] + self.class_scales[y, None] * rng.standard_normal((len(y), d))
            if self.label_permutation is not None:
                y = self.label_permutation[y]
            for arr in (x, y):
                arr.setflags(write=False)
            self._cache[split] = (x, y)
        return self._cache[split]


def make_domains(seed: int, cfg: DomainConfig | None = None) -> list[SyntheticDomain]:
    """One base domain followed by ``cfg.count`` shifted domains.

    A shifted domain translates every class mean by a common random vector of
    length ``shift``, jitters each mean by ``mean_jitter`` and rescales each
    class spread by a factor in ``[1, 1 + scale_change]``.
    """
    cfg = cfg or DomainConfig()
    rng = stream(seed, "domains", "base")
    means = cfg.separation * rng.standard_normal((cfg.num_classes, cfg.input_dim))
    scales = np.ones(cfg.num_classes)
    domains = [SyntheticDomain("base", means, scales, seed, cfg.train_per_class, cfg.test_per_class)]
    for k in range(cfg.count):
        r = stream(seed, "domains", f"shift{k}")
        direction = r.standard_normal(cfg.input_dim)
        direction /= np.linalg.norm(direction)
        jitter = r.standard_normal(means.shape)
        factors = 1.0 + cfg.scale_change * r.uniform(0.0, 1.0, cfg.num_classes)
        perm = r.permutation(cfg.num_classes) if cfg.label_permutation else None
        domains.append(SyntheticDomain(
            f"shift{k}",
            means + cfg.shift * direction + cfg.mean_jitter * jitter,
            scales * factors,
            seed,
            cfg.train_per_class,
            cfg.test_per_class,
            perm,
        ))
    return domains
