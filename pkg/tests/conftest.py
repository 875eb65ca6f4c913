import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wavelet_ph.graphs import Graph, load_tudataset
from wavelet_ph.spectral import graph_spectrum

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(os.environ.get("WPH_DATA_DIR", ROOT / "data"))
ALL_DATASETS = ("MUTAG", "COX2", "DHFR", "NCI1", "PROTEINS", "IMDB-BINARY")

# lines collected by the acceptance module, echoed at the end of the session
ACCEPTANCE_LINES: list = []


def available_datasets() -> list[str]:
    return [n for n in ALL_DATASETS if (DATA_DIR / n / f"{n}_A.txt").exists()]


def random_graph(rng: np.random.Generator, n_max: int = 10, n_min: int = 1) -> Graph:
    n = int(rng.integers(n_min, n_max + 1))
    p = rng.uniform(0.1, 0.8)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def random_function(rng: np.random.Generator, n: int) -> np.ndarray:
    """Mix of generic and tied vertex functions."""
    if rng.random() < 0.3:
        return rng.integers(0, 4, size=n).astype(float)
    return rng.normal(size=n)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def mutag():
    return load_tudataset(DATA_DIR, "MUTAG")


@pytest.fixture(scope="session")
def mutag_spectra(mutag):
    return [graph_spectrum(g) for g in mutag.graphs]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
