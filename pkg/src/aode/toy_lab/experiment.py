"""Pretrain, fine-tune experts, chain sequential fine-tunes and average."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..eval.aggregate import geometric_mean
from ..merge import MergeSpec, average_experts
from .domains import DomainConfig, SyntheticDomain, make_domains
from .model import ToyModel
from .training import TrainConfig, train

__all__ = [
    "ERROR_FLOOR",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "ExperimentRun",
    "evaluate_model",
    "sequential_finetune",
    "aode_pipeline",
    "run_experiment",
    "default_config_path",
    "load_experiment_config",
]

ERROR_FLOOR = 0.1  # percent; applied before the geometric mean


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str) -> None:
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def evaluate_model(model: ToyModel, domains: Sequence[SyntheticDomain]) -> tuple[dict[str, float], float]:
    """Per-domain test error in percent and their geometric mean.

    Errors below ``ERROR_FLOOR`` are raised to it for the mean only.
    """
    errors = {}
    for dom in domains:
        x, y = dom.sample("test")
        errors[dom.name] = 100.0 * float(np.mean(model.predict(x) != y))
    return errors, geometric_mean(max(e, ERROR_FLOOR) for e in errors.values())


def sequential_finetune(
    model: ToyModel,
    domains: Sequence[SyntheticDomain],
    cfg: TrainConfig,
    reference: ToyModel | None = None,
    *,
    intermediates: list[ToyModel] | None = None,
) -> ToyModel:
    """Fine-tune through ``domains`` in order; each stage starts from the last."""
    current = model
    for dom in domains:
        current = train(current, dom, cfg, reference)
        if intermediates is not None:
            intermediates.append(current)
    return current if domains else model.copy()


def aode_pipeline(
    pretrained: ToyModel,
    domains: Sequence[SyntheticDomain],
    cfg: TrainConfig,
    *,
    experts: dict[str, ToyModel] | None = None,
) -> ToyModel:
    """Fine-tune one expert per domain from ``pretrained`` and average them equally.

    Experts already present in ``experts`` (keyed by domain name) are reused;
    newly trained ones are added to it.
    """
    if not domains:
        raise ValueError("aode_pipeline needs at least one domain")
    pool = {} if experts is None else experts
    ckpts = []
    for dom in domains:
        if dom.name not in pool:
            pool[dom.name] = train(pretrained, dom, cfg, pretrained)
        ckpts.append(pool[dom.name].to_checkpoint(source=f"expert:{dom.name}"))
    return ToyModel.from_checkpoint(average_experts(ckpts, MergeSpec()))


# -- configuration ------------------------------------------------------------

def _section(raw: Mapping[str, Any], key: str, cls: type) -> Any:
    if key not in raw:
        raise ConfigError(key, "required field is missing")
    value = raw[key]
    if not isinstance(value, Mapping):
        raise ConfigError(key, "must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(value) - known)
    if unknown:
        raise ConfigError(f"{key}.{unknown[0]}", "unknown field")
    kwargs = dict(value)
    if "freeze" in kwargs:
        kwargs["freeze"] = tuple(kwargs["freeze"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    domains: DomainConfig
    pretrain: TrainConfig
    finetune: TrainConfig
    hidden: tuple[int, ...] = (32, 32, 32)
    sequential_orders: tuple[tuple[str, ...], ...] = ()
    pairwise: tuple[str, str] | None = None
    seeds: tuple[int, ...] = (0,)

    @property
    def shifted_names(self) -> list[str]:
        return [f"shift{k}" for k in range(self.domains.count)]

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("<root>", "config must be a JSON object")
        allowed = {"domains", "pretrain", "finetune", "model", "sequential_orders", "pairwise", "seeds"}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        domains = _section(raw, "domains", DomainConfig)
        pretrain = _section(raw, "pretrain", TrainConfig)
        finetune = _section(raw, "finetune", TrainConfig)
        model = raw.get("model", {})
        hidden = model.get("hidden", [32, 32, 32]) if isinstance(model, Mapping) else None
        if not isinstance(hidden, list) or not hidden or not all(isinstance(h, int) and h > 0 for h in hidden):
            raise ConfigError("model.hidden", "must be a non-empty list of positive integers")
        names = [f"shift{k}" for k in range(domains.count)]
        orders = raw.get("sequential_orders")
        if orders is None:
            orders = [names, [names[0], *reversed(names[1:])]] if len(names) > 1 else [names]
        for order in orders:
            if not isinstance(order, list) or not order or any(n not in names for n in order):
                raise ConfigError("sequential_orders", f"each order must list domains from {names}")
        pairwise = raw.get("pairwise", names[:2] if len(names) >= 2 else None)
        if pairwise is not None and (len(pairwise) != 2 or any(n not in names for n in pairwise)):
            raise ConfigError("pairwise", f"must name two domains from {names}")
        seeds = raw.get("seeds", [0])
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds", "must be a list of integers")
        to_tuple = lambda seq: tuple(seq)  # noqa: E731
        return cls(domains, pretrain, finetune, tuple(hidden),
                   tuple(to_tuple(o) for o in orders),
                   None if pairwise is None else (pairwise[0], pairwise[1]),
                   tuple(seeds))

    def to_dict(self) -> dict:
        return {
            "domains": asdict(self.domains),
            "pretrain": {**asdict(self.pretrain), "freeze": list(self.pretrain.freeze)},
            "finetune": {**asdict(self.finetune), "freeze": list(self.finetune.freeze)},
            "model": {"hidden": list(self.hidden)},
            "sequential_orders": [list(o) for o in self.sequential_orders],
            "pairwise": None if self.pairwise is None else list(self.pairwise),
            "seeds": list(self.seeds),
        }


def default_config_path() -> Path:
    return Path(__file__).with_name("data") / "default_config.json"


def load_experiment_config(path: str | Path | None = None) -> ExperimentConfig:
    path = default_config_path() if path is None else Path(path)
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)


# -- running --------------------------------------------------------------------

PRETRAINED = "pretrained"
AODE = "aode"


def expert_row(name: str) -> str:
    return f"finetuned:{name}"


def chain_row(order: Sequence[str]) -> str:
    return "sequential:" + ">".join(order)


def pair_row(pair: Sequence[str]) -> str:
    return "average:" + "+".join(pair)


_LABELS = {PRETRAINED: "Pretrained model", AODE: "Average of Domain Experts"}


def row_label(key: str) -> str:
    if key in _LABELS:
        return _LABELS[key]
    kind, _, rest = key.partition(":")
    if kind == "finetuned":
        return f"Fine-tuned on {rest}"
    if kind == "sequential":
        return " -> ".join(rest.split(">"))
    if kind == "average":
        return "Average of " + " and ".join(rest.split("+"))
    return key


@dataclass
class ExperimentReport:
    seed: int
    domains: list[str]
    rows: dict[str, dict[str, Any]] = field(default_factory=dict)

    def add(self, key: str, errors: Mapping[str, float], gm: float) -> None:
        self.rows[key] = {"errors": dict(errors), "geometric_mean": gm}

    def geomean(self, key: str) -> float:
        return self.rows[key]["geometric_mean"]

    def error(self, key: str, domain: str) -> float:
        return self.rows[key]["errors"][domain]

    def chain_keys(self) -> list[str]:
        return [k for k in self.rows if k.startswith("sequential:")]

    def to_dict(self) -> dict:
        return {
            "kind": "experiment",
            "seed": self.seed,
            "error_floor": ERROR_FLOOR,
            "domains": list(self.domains),
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def render(self) -> str:
        from ..reports import render_table, table_from_dict

        return render_table(table_from_dict(self.to_dict()), row_label)


@dataclass
class ExperimentRun:
    report: ExperimentReport
    pretrained: ToyModel
    experts: dict[str, ToyModel]
    models: dict[str, ToyModel]


def run_experiment(cfg: ExperimentConfig, seed: int, *, keep_models: bool = False) -> ExperimentReport | ExperimentRun:
    """Run every procedure for one seed and evaluate it on all domains.

    The seed drives the domains, the initialisation and every minibatch
    stream; the same ``(cfg, seed)`` always yields an identical report.
    With ``keep_models`` the trained models come back alongside the report.
    """
    domains = make_domains(seed, cfg.domains)
    by_name = {d.name: d for d in domains}
    base, shifted = domains[0], domains[1:]
    pre_cfg = cfg.pretrain.with_seed(seed)
    ft_cfg = cfg.finetune.with_seed(seed)

    init = ToyModel.init(cfg.domains.input_dim, cfg.hidden, cfg.domains.num_classes, seed)
    pretrained = train(init, base, pre_cfg, stream_name="pretrain")
    report = ExperimentReport(seed, [d.name for d in domains])
    models: dict[str, ToyModel] = {PRETRAINED: pretrained}

    experts: dict[str, ToyModel] = {}
    for dom in shifted:
        experts[dom.name] = train(pretrained, dom, ft_cfg, pretrained)
        models[expert_row(dom.name)] = experts[dom.name]
    for order in cfg.sequential_orders:
        models[chain_row(order)] = sequential_finetune(
            pretrained, [by_name[n] for n in order], ft_cfg, pretrained)
    if cfg.pairwise is not None:
        models[pair_row(cfg.pairwise)] = aode_pipeline(
            pretrained, [by_name[n] for n in cfg.pairwise], ft_cfg, experts=experts)
    if shifted:
        models[AODE] = aode_pipeline(pretrained, shifted, ft_cfg, experts=experts)

    for key, model in models.items():
        report.add(key, *evaluate_model(model, domains))
    if keep_models:
        return ExperimentRun(report, pretrained, experts, models)
    return report
