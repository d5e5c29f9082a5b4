"""Average of domain experts: weighted linear combination of checkpoints."""

from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .tensor_store import Checkpoint, validate_compat

__all__ = [
    "MergeError",
    "MergeSpec",
    "DiffNorm",
    "average_experts",
    "interpolate_pair",
    "diff_norm",
]

WEIGHT_SUM_TOL = 1e-9


class MergeError(ValueError):
    pass


@dataclass(frozen=True)
class MergeSpec:
    """How to combine N checkpoints.

    ``weights=None`` means equal weighting. Tensors whose name does not match
    ``include`` (a glob) are copied verbatim from ``ckpts[base]``.
    """

    weights: tuple[float, ...] | None = None
    include: str | None = None
    base: int = 0

    def resolve(self, n: int) -> tuple[float, ...]:
        if n < 1:
            raise MergeError("no checkpoints to merge")
        if not 0 <= self.base < n:
            raise MergeError(f"base index {self.base} out of range for {n} checkpoints")
        if self.weights is None:
            return (1.0 / n,) * n
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != n:
            raise MergeError(f"got {len(weights)} weights for {n} checkpoints")
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise MergeError(f"weights must be finite and non-negative: {list(weights)}")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MergeError(f"weights must sum to 1 (got {total!r})")
        return weights

    def includes(self, name: str) -> bool:
        return self.include is None or fnmatch.fnmatchcase(name, self.include)


def _combine(arrays: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    # Zero-weight inputs are dropped so one-hot weights reproduce the input exactly.
    terms = [(w, a) for w, a in zip(weights, arrays) if w != 0.0]
    dtype = arrays[0].dtype
    if len(terms) == 1:
        return np.array(terms[0][1], dtype=dtype, copy=True)
    products = np.stack([w * a.astype(np.float64) for w, a in terms])
    # Per-element sorted summation makes the result independent of input order.
    products.sort(axis=0)
    acc = products[0].copy()
    for row in products[1:]:
        acc += row
    out = acc.astype(dtype)
    # The exact convex combination lies inside the input hull; clamp away rounding.
    stack = np.stack([a for _, a in terms])
    return np.clip(out, stack.min(axis=0), stack.max(axis=0))


def average_experts(
    ckpts: Sequence[Checkpoint],
    spec: MergeSpec | None = None,
    *,
    sources: Sequence[str] | None = None,
) -> Checkpoint:
    """Merge expert checkpoints into one by weighted parameter averaging.

    Every included tensor becomes ``sum_k weights[k] * ckpts[k][name]``,
    accumulated in float64 and cast back to the tensor's dtype. The output
    keeps the tensor order of the base checkpoint and records the inputs and
    weights under ``merge.sources`` / ``merge.weights``.
    """
    spec = spec or MergeSpec()
    ckpts = list(ckpts)
    weights = spec.resolve(len(ckpts))
    if len(ckpts) > 1:
        report = validate_compat(ckpts)
        if not report.compatible:
            raise MergeError(f"incompatible checkpoints: {report}")
    base = ckpts[spec.base]
    merged = {}
    for name, arr in base.tensors.items():
        if spec.includes(name):
            merged[name] = _combine([ck[name] for ck in ckpts], weights)
        else:
            merged[name] = arr
    if sources is None:
        sources = [ck.metadata.get("source", f"input{k}") for k, ck in enumerate(ckpts)]
    meta = {
        "merge.sources": ",".join(sources),
        "merge.weights": ",".join(repr(w) for w in weights),
    }
    if spec.include is not None:
        meta["merge.include"] = spec.include
    return Checkpoint(merged, meta)


def interpolate_pair(a: Checkpoint, b: Checkpoint, alpha: float) -> Checkpoint:
    """``(1 - alpha) * a + alpha * b``."""
    if not 0.0 <= alpha <= 1.0:
        raise MergeError(f"alpha must be in [0, 1], got {alpha}")
    return average_experts([a, b], MergeSpec(weights=(1.0 - alpha, alpha)))


class DiffNorm(NamedTuple):
    per_tensor: dict[str, float]
    total: float


def diff_norm(a: Checkpoint, b: Checkpoint) -> DiffNorm:
    """Per-tensor and global Euclidean distance between two checkpoints."""
    report = validate_compat([a, b])
    if not report.compatible:
        raise MergeError(f"incompatible checkpoints: {report}")
    per_tensor = {}
    sq_total = 0.0
    for name in a:
        d = a[name].astype(np.float64) - b[name].astype(np.float64)
        sq = float(np.dot(d.ravel(), d.ravel()))
        per_tensor[name] = math.sqrt(sq)
        sq_total += sq
    return DiffNorm(per_tensor, math.sqrt(sq_total))
