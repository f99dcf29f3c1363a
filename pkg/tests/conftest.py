"""Shared fixtures: small graphs, synthetic panels, and a tiny fitted run."""

from __future__ import annotations

import numpy as np
import pytest

from arealbeta.config import ModelConfig, SamplerSettings
from arealbeta.ingest import Panel, italy_graph
from arealbeta.mcmc import run_sampler
from arealbeta.simulate import GenerativeParams, lattice_graph, simulate_panel
from arealbeta.spatial import graph_from_edges


@pytest.fixture(scope="session")
def italy():
    return italy_graph()


@pytest.fixture(scope="session")
def path3():
    """Three regions in a path: A - B - C."""
    return graph_from_edges([("A", "B"), ("B", "C")], ["A", "B", "C"])


@pytest.fixture(scope="session")
def small_panel():
    """3x3 lattice, 5 times, 2 groups, 2 covariates (one real signal)."""
    graph = lattice_graph(3, 3)
    params = GenerativeParams(beta=np.array([0.8, 0.0]))
    panel, truth = simulate_panel(graph, n_times=5, params=params, seed=1)
    return graph, panel, truth


@pytest.fixture(scope="session")
def toy_panel(path3):
    """3-region path graph, 3 times, 2 groups, 1 covariate."""
    params = GenerativeParams(beta=np.array([0.5]), tau_psi=2.0, tau_alpha=10.0)
    panel, truth = simulate_panel(path3, n_times=3, params=params, seed=3)
    return path3, panel, truth


@pytest.fixture(scope="session")
def tiny_settings():
    return SamplerSettings(iterations=600, burn_in=300, thinning=3, chains=2, seed=17)


@pytest.fixture(scope="session")
def small_fit(small_panel, tiny_settings):
    graph, panel, _ = small_panel
    config = ModelConfig(sampler=tiny_settings)
    return config, run_sampler(config, panel, graph)


def make_panel(R=2, T=2, G=2, p=1, seed=0) -> Panel:
    """Complete panel with uniform-ish rates, handy for validation tests."""
    rng = np.random.default_rng(seed)
    region_idx = np.repeat(np.arange(R), T * G)
    time_idx = np.tile(np.repeat(np.arange(T), G), R)
    group_idx = np.tile(np.arange(G), R * T)
    n = R * T * G
    return Panel(
        region_idx=region_idx,
        time_idx=time_idx,
        group_idx=group_idx,
        rate=rng.uniform(0.1, 0.9, size=n),
        X=rng.normal(size=(n, p)),
        region_names=tuple(f"r{i}" for i in range(R)),
        year_labels=tuple(str(2000 + t) for t in range(T)),
        group_labels=("female", "male")[:G],
        covariate_names=tuple(f"x{k + 1}" for k in range(p)),
    )
