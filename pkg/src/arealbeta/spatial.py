"""Intrinsic CAR machinery for region effects on an adjacency graph.

The improper ICAR density is handled with the usual conventions: the
precision matrix is tau_psi * (D - W) with rank R minus the number of
connected components, identification comes from a sum-to-zero constraint,
and a degree-zero region falls back to an independent N(0, 1/tau_psi)
term so the prior stays proper in that coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError


@dataclass(frozen=True)
class RegionGraph:
    """Binary symmetric adjacency with degree and component bookkeeping."""

    W: np.ndarray
    region_names: tuple[str, ...]
    degrees: np.ndarray = field(init=False)
    components: tuple[tuple[int, ...], ...] = field(init=False)
    isolated: frozenset[int] = field(init=False)
    neighbors: tuple[np.ndarray, ...] = field(init=False)

    def __post_init__(self) -> None:
        W = np.asarray(self.W)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise GraphError("adjacency matrix must be square")
        if W.shape[0] != len(self.region_names):
            raise GraphError("region_names length must match adjacency size")
        if not np.array_equal(W, W.T):
            raise GraphError("adjacency matrix must be symmetric")
        if np.any(np.diag(W) != 0):
            raise GraphError("adjacency matrix must have a zero diagonal")
        if not np.isin(W, (0, 1)).all():
            raise GraphError("adjacency entries must be 0 or 1")
        W = W.astype(np.int64)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "degrees", W.sum(axis=1))
        object.__setattr__(
            self, "neighbors", tuple(np.flatnonzero(W[i]) for i in range(W.shape[0]))
        )
        object.__setattr__(self, "components", _connected_components(W))
        object.__setattr__(
            self, "isolated", frozenset(np.flatnonzero(self.degrees == 0).tolist())
        )

    @property
    def n_regions(self) -> int:
        return self.W.shape[0]

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees) - self.W

    def index_of(self, name: str) -> int:
        try:
            return self.region_names.index(name)
        except ValueError:
            raise GraphError(f"unknown region {name!r}") from None


def _connected_components(W: np.ndarray) -> tuple[tuple[int, ...], ...]:
    n = W.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, members = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            members.append(i)
            for j in np.flatnonzero(W[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(tuple(sorted(members)))
    return tuple(comps)


def graph_from_edges(edges: list[tuple[str, str]], region_names: list[str]) -> RegionGraph:
    """Assemble a RegionGraph from named edges over a fixed region list."""
    names = tuple(region_names)
    index = {name: i for i, name in enumerate(names)}
    W = np.zeros((len(names), len(names)), dtype=np.int64)
    for a, b in edges:
        if a not in index:
            raise GraphError(f"edge references unknown region {a!r}")
        if b not in index:
            raise GraphError(f"edge references unknown region {b!r}")
        if a == b:
            raise GraphError(f"self-loop on region {a!r} is not allowed")
        W[index[a], index[b]] = 1
        W[index[b], index[a]] = 1
    return RegionGraph(W=W, region_names=names)


@dataclass
class SpatialEffect:
    """Region effect vector with its precision, kept sum-to-zero."""

    psi: np.ndarray
    tau_psi: float

    def __post_init__(self) -> None:
        self.psi = np.asarray(self.psi, dtype=float)
        if self.tau_psi <= 0:
            raise GraphError("tau_psi must be positive")


def icar_conditional(
    i: int, psi: np.ndarray, tau_psi: float, graph: RegionGraph
) -> tuple[float, float]:
    """Full-conditional Normal (mean, variance) of one region effect.

    Only defined for regions with at least one neighbour: the mean is the
    neighbour average and the variance 1 / (degree * tau_psi).
    """
    deg = int(graph.degrees[i])
    if deg == 0:
        raise GraphError(
            f"region {graph.region_names[i]!r} is isolated; "
            "use isolated_conditional for degree-zero regions"
        )
    if tau_psi <= 0:
        raise GraphError("tau_psi must be positive")
    mean = float(np.sum(psi[graph.neighbors[i]]) / deg)
    return mean, 1.0 / (deg * tau_psi)


def isolated_conditional(tau_psi: float) -> tuple[float, float]:
    """Conditional (mean, variance) for a degree-zero region: N(0, 1/tau)."""
    if tau_psi <= 0:
        raise GraphError("tau_psi must be positive")
    return 0.0, 1.0 / tau_psi


def icar_quadform(psi: np.ndarray, graph: RegionGraph) -> float:
    """Pairwise-difference quadratic form: sum over edges of (psi_i - psi_j)^2.

    Equals psi' (D - W) psi; isolated regions contribute nothing here.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape[0] != graph.n_regions:
        raise GraphError("psi length must match the number of regions")
    total = 0.0
    for i in range(graph.n_regions):
        for j in graph.neighbors[i]:
            if j > i:
                total += (psi[i] - psi[j]) ** 2
    return total


def center_sum_to_zero(psi: np.ndarray) -> np.ndarray:
    """Project onto the sum-to-zero subspace by removing the mean."""
    psi = np.asarray(psi, dtype=float)
    return psi - psi.mean()


def icar_log_prior(psi: np.ndarray, tau_psi: float, graph: RegionGraph) -> float:
    """Log ICAR prior density up to an additive constant.

    Connected regions contribute the improper Gaussian with exponent
    (R - G)/2 on tau_psi (G = number of connected components, isolated
    regions counted as their own components); each isolated region adds a
    proper N(0, 1/tau_psi) term, i.e. an extra 1/2 * log(tau_psi).
    The 2*pi constants are dropped.
    """
    if tau_psi <= 0:
        raise GraphError("tau_psi must be positive")
    psi = np.asarray(psi, dtype=float)
    rank = graph.n_regions - graph.n_components
    quad = icar_quadform(psi, graph)
    out = 0.5 * rank * math.log(tau_psi) - 0.5 * tau_psi * quad
    for i in graph.isolated:
        out += 0.5 * math.log(tau_psi) - 0.5 * tau_psi * psi[i] ** 2
    return out
