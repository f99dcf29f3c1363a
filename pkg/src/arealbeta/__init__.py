"""Bayesian hierarchical Beta regression for areal panel rates.

Spatially structured region effects (ICAR), an AR(1) temporal trend,
stochastic search variable selection over the covariates, and a
Metropolis-within-Gibbs sampler with a compiled hot loop.
"""

from .config import ModelConfig, SamplerSettings, SsvsConstants, config_from_dict
from .errors import (
    ArealBetaError,
    ConfigError,
    DiagnosticsAlarm,
    GraphError,
    IngestError,
    SamplingError,
)
from .ingest import Panel, PanelSchema, italy_graph, load_adjacency, load_panel
from .mcmc import PosteriorDraws, diagnostics, run_sampler
from .spatial import RegionGraph, graph_from_edges

__version__ = "0.1.0"

__all__ = [
    "ArealBetaError",
    "ConfigError",
    "DiagnosticsAlarm",
    "GraphError",
    "IngestError",
    "ModelConfig",
    "Panel",
    "PanelSchema",
    "PosteriorDraws",
    "RegionGraph",
    "SamplerSettings",
    "SamplingError",
    "SsvsConstants",
    "config_from_dict",
    "diagnostics",
    "graph_from_edges",
    "italy_graph",
    "load_adjacency",
    "load_panel",
    "run_sampler",
    "__version__",
]
