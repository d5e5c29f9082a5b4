"""Small tanh MLP with hand-written backpropagation, stored in float64."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..tensor_store import Checkpoint
from .rng import stream

__all__ = ["ToyModel", "log_softmax", "grad_check"]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass
class ToyModel:
    """Encoder layers ``enc.0 .. enc.L-1`` (dense + tanh) and a linear ``out`` head.

    Weights are ``(fan_in, fan_out)`` so a layer computes ``x @ W + b``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, non-empty weight and bias lists")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k and w.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k} input {w.shape[0]} != previous output")

    @classmethod
    def init(cls, input_dim: int, hidden: Sequence[int], num_classes: int, seed: int,
             head_scale: float = 0.0) -> "ToyModel":
        """Glorot-uniform encoder. The head is drawn with ``head_scale`` times the
        Glorot bound; the default zero head makes an untrained model predict a
        single class."""
        dims = [input_dim, *hidden, num_classes]
        rng = stream(seed, "init")
        weights, biases = [], []
        for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            if k == len(dims) - 2:
                bound *= head_scale
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def num_encoder_layers(self) -> int:
        return len(self.weights) - 1

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    def layer_names(self) -> list[str]:
        return [f"enc.{i}" for i in range(self.num_encoder_layers)] + ["out"]

    def named_parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        for prefix, w, b in zip(self.layer_names(), self.weights, self.biases):
            yield f"{prefix}.weight", w
            yield f"{prefix}.bias", b

    def parameter_names(self) -> list[str]:
        return [n for n, _ in self.named_parameters()]

    def copy(self) -> "ToyModel":
        return ToyModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_checkpoint(self, **metadata: str) -> Checkpoint:
        return Checkpoint(list(self.named_parameters()), metadata)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "ToyModel":
        names = ckpt.names
        if len(names) % 2 or len(names) < 2:
            raise ValueError("checkpoint does not hold a toy model")
        n_enc = len(names) // 2 - 1
        prefixes = [f"enc.{i}" for i in range(n_enc)] + ["out"]
        expected = [f"{p}.{kind}" for p in prefixes for kind in ("weight", "bias")]
        if names != expected:
            raise ValueError(f"unexpected tensor layout {names}")
        return cls(
            [np.array(ckpt[f"{p}.weight"], dtype=np.float64) for p in prefixes],
            [np.array(ckpt[f"{p}.bias"], dtype=np.float64) for p in prefixes],
        )

    # -- forward / backward ---------------------------------------------

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Logits and the list of layer inputs (needed for backprop)."""
        acts = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w + b)
            acts.append(h)
        return h @ self.weights[-1] + self.biases[-1], acts

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def backward(self, acts: list[np.ndarray], dlogits: np.ndarray) -> dict[str, np.ndarray]:
        grads = {}
        names = self.layer_names()
        delta = dlogits
        for k in range(len(self.weights) - 1, -1, -1):
            grads[f"{names[k]}.weight"] = acts[k].T @ delta
            grads[f"{names[k]}.bias"] = delta.sum(axis=0)
            if k:
                # acts[k] = tanh(z_{k-1}); d tanh = 1 - tanh^2
                delta = (delta @ self.weights[k].T) * (1.0 - acts[k] ** 2)
        return {n: grads[n] for n in self.parameter_names()}

    def loss_and_grads(
        self,
        x: np.ndarray,
        y: np.ndarray,
        *,
        loss: str = "xent",
        reference_logp: np.ndarray | None = None,
        lwf_weight: float = 0.0,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Batch-mean loss and its gradient.

        ``loss="xent"`` takes integer labels; ``loss="mse"`` takes real targets of
        the logits' shape and uses ``0.5 * mean_i ||logits_i - y_i||^2``. With
        ``reference_logp`` and ``lwf_weight > 0`` the cross-entropy loss gains
        ``lwf_weight * mean_i KL(p_ref,i || p_i)``.
        """
        logits, acts = self.forward(x)
        n = x.shape[0]
        if loss == "mse":
            resid = logits - y
            value = 0.5 * float(np.sum(resid * resid)) / n
            return value, self.backward(acts, resid / n)
        if loss != "xent":
            raise ValueError(f"unknown loss {loss!r}")
        logp = log_softmax(logits)
        value = -float(logp[np.arange(n), y].sum()) / n
        p = np.exp(logp)
        dlogits = p.copy()
        dlogits[np.arange(n), y] -= 1.0
        if reference_logp is not None and lwf_weight > 0:
            p_ref = np.exp(reference_logp)
            value += lwf_weight * float(np.sum(p_ref * (reference_logp - logp))) / n
            dlogits += lwf_weight * (p - p_ref)
        return value, self.backward(acts, dlogits / n)

    def get(self, name: str) -> np.ndarray:
        prefix, kind = name.rsplit(".", 1)
        k = self.layer_names().index(prefix)
        return (self.weights if kind == "weight" else self.biases)[k]


def grad_check(
    model: ToyModel,
    batch: tuple[np.ndarray, np.ndarray],
    *,
    loss: str = "xent",
    coords: int = 100,
    h: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error is ``|a - n| / max(|a|, |n|)`` (zero when both vanish) over
    ``coords`` coordinates drawn uniformly from all parameters.
    """
    x, y = batch
    if len(x) == 0:
        raise ValueError("grad_check needs a non-empty batch")
    probe = model.copy()
    _, grads = probe.loss_and_grads(x, y, loss=loss)
    names = probe.parameter_names()
    sizes = np.array([probe.get(n).size for n in names])
    total = int(sizes.sum())
    rng = stream(seed, "grad_check")
    picks = rng.choice(total, size=min(coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, idx = names[k], int(flat - offsets[k])
        param = probe.get(name).reshape(-1)
        orig = param[idx]
        param[idx] = orig + h
        up, _ = probe.loss_and_grads(x, y, loss=loss)
        param[idx] = orig - h
        down, _ = probe.loss_and_grads(x, y, loss=loss)
        param[idx] = orig
        numeric = (up - down) / (2 * h)
        analytic = float(grads[name].reshape(-1)[idx])
        scale = max(abs(analytic), abs(numeric))
        if scale > 0:
            worst = max(worst, abs(analytic - numeric) / scale)
    return worst
