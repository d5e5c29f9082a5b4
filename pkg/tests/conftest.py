from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from aode.tensor_store import Checkpoint

FIXTURES = Path(__file__).parent / "fixtures"


def random_checkpoint(rng: np.random.Generator, *, n_tensors: int | None = None,
                      max_rank: int = 4, dtype=None, names=None) -> Checkpoint:
    n = n_tensors if n_tensors is not None else int(rng.integers(1, 6))
    names = names or [f"t{i}.{rng.integers(0, 1000)}" for i in range(n)]
    tensors = []
    for name in names:
        rank = int(rng.integers(0, max_rank + 1))
        shape = tuple(int(d) for d in rng.integers(1, 4, rank))
        dt = dtype or (np.float32 if rng.random() < 0.5 else np.float64)
        tensors.append((name, (rng.standard_normal(shape) * 10).astype(dt)))
    meta = {f"k{i}": f"v{rng.integers(0, 99)}" for i in range(int(rng.integers(0, 3)))}
    return Checkpoint(tensors, meta)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def default_setup():
    """Shipped default config, seed 0: (config, domains, pretrained model)."""
    from aode.toy_lab import ToyModel, load_experiment_config, make_domains, train

    cfg = load_experiment_config()
    domains = make_domains(0, cfg.domains)
    init = ToyModel.init(cfg.domains.input_dim, cfg.hidden, cfg.domains.num_classes, 0)
    pretrained = train(init, domains[0], cfg.pretrain.with_seed(0), stream_name="pretrain")
    return cfg, domains, pretrained
