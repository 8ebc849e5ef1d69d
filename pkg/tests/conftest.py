import numpy as np
import pytest

from leakmatch.core import DiscretizationConfig, MobilityTrace
from leakmatch.dataset import Dataset
from leakmatch.ingest import SyntheticPopulationConfig, generate_synthetic

CFG = DiscretizationConfig(delta_xy=100.0, delta_t=3600, grid_origin=(0.0, 0.0))


def make_dataset(traces: dict, cfg=CFG, **kw) -> Dataset:
    return Dataset([MobilityTrace(u, t, cfg) for u, t in traces.items()], cfg, **kw)


def random_corpus(seed, n_users=50, n_cells=6, n_bins=8, max_len=12, cfg=CFG):
    """Small random corpus over a tight grid so that tuples are widely shared."""
    rng = np.random.default_rng(seed)
    traces = {}
    for i in range(n_users):
        size = int(rng.integers(1, max_len + 1))
        tuples = {
            (int(rng.integers(0, n_cells)), int(rng.integers(0, n_cells)), int(rng.integers(0, n_bins)))
            for _ in range(size)
        }
        traces[f"u{i:03d}"] = tuples
    return make_dataset(traces, cfg)


@pytest.fixture(scope="session")
def small_synthetic():
    pop = SyntheticPopulationConfig(num_users=600, num_sites=400, events_mean=120.0, events_std=200.0, seed=42)
    return generate_synthetic(pop, DiscretizationConfig(200.0, 300))
