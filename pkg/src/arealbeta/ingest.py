"""Panel loading, validation, scaling, and PCA reduction.

The panel CSV has one row per (region, year, gender) with the rate column
strictly inside (0, 1); every remaining column is treated as a covariate.
The adjacency file lists one named edge per line ("RegionA,RegionB");
lines starting with '#' are comments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import GraphError, IngestError
from .spatial import RegionGraph, graph_from_edges

#: Canonical ordering of the 20 Italian regions (ISTAT ordering).
ITALY_REGIONS = (
    "Piemonte",
    "Valle d'Aosta",
    "Lombardia",
    "Liguria",
    "Emilia-Romagna",
    "Trentino-Alto Adige",
    "Veneto",
    "Friuli-Venezia Giulia",
    "Toscana",
    "Umbria",
    "Marche",
    "Lazio",
    "Abruzzo",
    "Molise",
    "Campania",
    "Puglia",
    "Basilicata",
    "Calabria",
    "Sicilia",
    "Sardegna",
)

#: Mortality covariates reduced via PCA in the production pipeline.
MORTALITY_BLOCK = (
    "mort_cancer_digestive",
    "mort_cancer_stomach",
    "mort_diabetes",
    "mort_mental",
    "mort_blood",
    "mort_heart",
    "mort_digestive",
    "mort_liver",
    "mort_suicide",
)


class PanelRow(NamedTuple):
    region: int
    time: int
    group: int
    rate: float
    covariates: np.ndarray


@dataclass(frozen=True)
class PanelSchema:
    """Column mapping for the panel CSV."""

    region: str = "region"
    year: str = "year"
    gender: str = "gender"
    rate: str = "rate"
    #: explicit group level ordering; None means females-first if the values
    #: look like gender labels, otherwise sorted order.
    group_levels: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Panel:
    """Complete long-format panel, stored region-major, then time, then group."""

    region_idx: np.ndarray
    time_idx: np.ndarray
    group_idx: np.ndarray
    rate: np.ndarray
    X: np.ndarray
    region_names: tuple[str, ...]
    year_labels: tuple[str, ...]
    group_labels: tuple[str, ...]
    covariate_names: tuple[str, ...]

    def __post_init__(self) -> None:
        region_idx = np.asarray(self.region_idx, dtype=np.int64)
        time_idx = np.asarray(self.time_idx, dtype=np.int64)
        group_idx = np.asarray(self.group_idx, dtype=np.int64)
        rate = np.asarray(self.rate, dtype=float)
        X = np.asarray(self.X, dtype=float)
        n = rate.shape[0]
        if not (region_idx.shape[0] == time_idx.shape[0] == group_idx.shape[0] == n):
            raise IngestError("panel index arrays must have equal length")
        if X.ndim != 2 or X.shape[0] != n:
            raise IngestError("covariate matrix must have one row per observation")
        if X.shape[1] != len(self.covariate_names):
            raise IngestError("covariate_names length must match the covariate matrix")
        if np.any(rate <= 0.0) or np.any(rate >= 1.0):
            bad = int(np.flatnonzero((rate <= 0.0) | (rate >= 1.0))[0])
            raise IngestError(
                f"rate not interior: row {bad} has rate {rate[bad]!r} outside (0, 1)"
            )
        R, T, G = len(self.region_names), len(self.year_labels), len(self.group_labels)
        cells = set(zip(region_idx.tolist(), time_idx.tolist(), group_idx.tolist()))
        if len(cells) != n:
            seen: set[tuple[int, int, int]] = set()
            for key in zip(region_idx.tolist(), time_idx.tolist(), group_idx.tolist()):
                if key in seen:
                    raise IngestError(
                        "duplicate cell for "
                        f"({self.region_names[key[0]]}, {self.year_labels[key[1]]}, "
                        f"{self.group_labels[key[2]]})"
                    )
                seen.add(key)
        if n != R * T * G:
            raise IngestError(f"expected {R * T * G} rows ({R}x{T}x{G}), found {n}")
        order = np.lexsort((group_idx, time_idx, region_idx))
        object.__setattr__(self, "region_idx", region_idx[order])
        object.__setattr__(self, "time_idx", time_idx[order])
        object.__setattr__(self, "group_idx", group_idx[order])
        object.__setattr__(self, "rate", rate[order])
        object.__setattr__(self, "X", X[order])

    @property
    def n_rows(self) -> int:
        return self.rate.shape[0]

    @property
    def n_regions(self) -> int:
        return len(self.region_names)

    @property
    def n_times(self) -> int:
        return len(self.year_labels)

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]

    def row(self, i: int) -> PanelRow:
        return PanelRow(
            region=int(self.region_idx[i]),
            time=int(self.time_idx[i]),
            group=int(self.group_idx[i]),
            rate=float(self.rate[i]),
            covariates=self.X[i],
        )

    def with_covariates(self, X: np.ndarray, names: tuple[str, ...]) -> "Panel":
        return replace(self, X=np.asarray(X, dtype=float), covariate_names=tuple(names))


def _group_levels(values: list[str], schema: PanelSchema) -> tuple[str, ...]:
    if schema.group_levels is not None:
        missing = set(values) - set(schema.group_levels)
        if missing:
            raise IngestError(f"gender values {sorted(missing)} not in schema group_levels")
        return tuple(schema.group_levels)
    lowered = {v.lower() for v in values}
    if lowered <= {"female", "male", "f", "m"}:
        # females are group 0, matching the model's dummy coding
        order = sorted(values, key=lambda v: v.lower() not in ("female", "f"))
        return tuple(order)
    return tuple(sorted(values))


def load_panel(
    path: str | Path,
    schema: PanelSchema | None = None,
    region_names: tuple[str, ...] | None = None,
) -> Panel:
    """Load and validate a panel CSV into model-ready arrays.

    When ``region_names`` is given (normally the adjacency file's region
    list) any region outside it is rejected; otherwise regions are indexed
    in sorted order so loading is independent of the input row order.
    """
    schema = schema or PanelSchema()
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"cannot read panel CSV {path}: {exc}") from exc
    for col in (schema.region, schema.year, schema.gender, schema.rate):
        if col not in frame.columns:
            raise IngestError(f"panel CSV is missing required column {col!r}")

    regions_seen = frame[schema.region].astype(str)
    if region_names is None:
        region_names = tuple(sorted(regions_seen.unique()))
    else:
        unknown = sorted(set(regions_seen.unique()) - set(region_names))
        if unknown:
            raise IngestError(f"unknown region names not in adjacency file: {unknown}")
        region_names = tuple(region_names)
    year_labels = tuple(str(y) for y in sorted(frame[schema.year].unique()))
    group_labels = _group_levels(sorted(frame[schema.gender].astype(str).unique()), schema)

    region_index = {name: i for i, name in enumerate(region_names)}
    year_index = {label: i for i, label in enumerate(year_labels)}
    group_index = {label: i for i, label in enumerate(group_labels)}

    covariate_names = tuple(
        c for c in frame.columns if c not in (schema.region, schema.year, schema.gender, schema.rate)
    )
    rate = pd.to_numeric(frame[schema.rate], errors="coerce")
    if rate.isna().any():
        bad = int(rate.index[rate.isna()][0])
        raise IngestError(f"rate column does not parse as a number at input row {bad}")
    X = frame[list(covariate_names)].apply(pd.to_numeric, errors="coerce")
    if X.isna().to_numpy().any():
        col = X.columns[X.isna().any()][0]
        raise IngestError(f"covariate column {col!r} contains missing or non-numeric values")

    region_idx = regions_seen.map(region_index).to_numpy()
    time_idx = frame[schema.year].astype(str).map(year_index).to_numpy()
    group_idx = frame[schema.gender].astype(str).map(group_index).to_numpy()

    cells = set(zip(region_idx.tolist(), time_idx.tolist(), group_idx.tolist()))
    if len(frame) < len(region_names) * len(year_labels) * len(group_labels) or len(cells) < len(
        region_names
    ) * len(year_labels) * len(group_labels):
        for i, r in enumerate(region_names):
            for t, y in enumerate(year_labels):
                for g, s in enumerate(group_labels):
                    if (i, t, g) not in cells:
                        raise IngestError(f"missing panel cell ({r}, {y}, {s})")

    return Panel(
        region_idx=region_idx,
        time_idx=time_idx,
        group_idx=group_idx,
        rate=rate.to_numpy(),
        X=X.to_numpy(dtype=float),
        region_names=region_names,
        year_labels=year_labels,
        group_labels=group_labels,
        covariate_names=covariate_names,
    )


def load_adjacency(path: str | Path, region_names: list[str] | tuple[str, ...]) -> RegionGraph:
    """Parse a named edge list into a RegionGraph over ``region_names``."""
    edges: list[tuple[str, str]] = []
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = next(csv.reader([line]))
                if len(parts) != 2:
                    raise GraphError(f"{path}:{lineno}: expected 'RegionA,RegionB'")
                edges.append((parts[0].strip(), parts[1].strip()))
    except OSError as exc:
        raise GraphError(f"cannot read adjacency file {path}: {exc}") from exc
    return graph_from_edges(edges, list(region_names))


def italy_graph() -> RegionGraph:
    """The bundled 20-region Italian adjacency graph."""
    path = resources.files("arealbeta.data") / "italy_adjacency.csv"
    with resources.as_file(path) as real_path:
        return load_adjacency(real_path, ITALY_REGIONS)


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalingRecipe:
    """Fitted per-covariate transforms: standardize, min-max, or passthrough."""

    covariate_names: tuple[str, ...]
    tags: tuple[str, ...]
    center: np.ndarray  # mean (standardize), min (minmax), 0 (passthrough)
    scale: np.ndarray  # sd (standardize), range (minmax), 1 (passthrough)

    def to_dict(self) -> dict:
        return {
            "covariates": list(self.covariate_names),
            "tags": list(self.tags),
            "center": [float(c) for c in self.center],
            "scale": [float(s) for s in self.scale],
        }


VALID_TAGS = ("standardize", "minmax", "passthrough")


def fit_scaling(panel: Panel, policy: dict[str, str] | None = None, default: str = "standardize") -> ScalingRecipe:
    """Fit scaling constants for every covariate column.

    ``policy`` maps covariate names to transform tags; unlisted columns get
    ``default``. A column with zero spread under a non-passthrough tag is
    rejected.
    """
    policy = policy or {}
    unknown = sorted(set(policy) - set(panel.covariate_names))
    if unknown:
        raise IngestError(f"scaling policy names unknown covariates: {unknown}")
    tags, centers, scales = [], [], []
    for j, name in enumerate(panel.covariate_names):
        tag = policy.get(name, default)
        if tag not in VALID_TAGS:
            raise IngestError(f"unknown scaling tag {tag!r} for covariate {name!r}")
        col = panel.X[:, j]
        if tag == "standardize":
            center, scale = col.mean(), col.std(ddof=1)
        elif tag == "minmax":
            center, scale = col.min(), col.max() - col.min()
        else:
            center, scale = 0.0, 1.0
        if tag != "passthrough" and scale == 0.0:
            raise IngestError(f"covariate {name!r} has zero spread under {tag!r} scaling")
        tags.append(tag)
        centers.append(float(center))
        scales.append(float(scale))
    return ScalingRecipe(
        covariate_names=panel.covariate_names,
        tags=tuple(tags),
        center=np.array(centers),
        scale=np.array(scales),
    )


def apply_scaling(panel: Panel, recipe: ScalingRecipe) -> Panel:
    if recipe.covariate_names != panel.covariate_names:
        raise IngestError("scaling recipe covariates do not match the panel")
    X = (panel.X - recipe.center) / recipe.scale
    return panel.with_covariates(X, panel.covariate_names)


def invert_scaling(panel: Panel, recipe: ScalingRecipe) -> Panel:
    if recipe.covariate_names != panel.covariate_names:
        raise IngestError("scaling recipe covariates do not match the panel")
    X = panel.X * recipe.scale + recipe.center
    return panel.with_covariates(X, panel.covariate_names)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaReduction:
    """Retained loadings and the full explained-variance profile."""

    loadings: np.ndarray  # (k, n_retained), orthonormal columns
    explained_variance_ratio: np.ndarray  # full length-k, non-increasing
    n_retained: int

    @property
    def cumulative_explained(self) -> float:
        return float(self.explained_variance_ratio[: self.n_retained].sum())


def pca_reduce(
    block: np.ndarray,
    variance_threshold: float = 0.7,
    force_count: int | None = None,
) -> tuple[PcaReduction, np.ndarray]:
    """Principal components of a covariate block.

    The block is column-centered internally; the smallest leading set of
    components whose cumulative explained variance exceeds the threshold
    is retained unless ``force_count`` pins the number. Each loading
    column's sign is fixed so its largest-magnitude entry is positive.
    Returns the reduction together with the score matrix.
    """
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or block.shape[1] < 2:
        raise IngestError("PCA block must be a matrix with at least 2 columns")
    if block.shape[0] < block.shape[1]:
        raise IngestError("PCA block needs at least as many rows as columns")
    if force_count is None and not 0.0 < variance_threshold <= 1.0:
        raise IngestError("variance_threshold must lie in (0, 1]")
    if force_count is not None and not 1 <= force_count <= block.shape[1]:
        raise IngestError("force_count out of range")

    centered = block - block.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    var = singular**2
    total = var.sum()
    ratios = var / total if total > 0 else np.zeros_like(var)
    if force_count is not None:
        m = force_count
    else:
        m = int(np.searchsorted(np.cumsum(ratios), variance_threshold) + 1)
        m = min(m, block.shape[1])
    loadings = vt[:m].T.copy()
    # deterministic sign convention: dominant entry of each column positive
    for j in range(m):
        pivot = np.argmax(np.abs(loadings[:, j]))
        if loadings[pivot, j] < 0:
            loadings[:, j] = -loadings[:, j]
    scores = centered @ loadings
    return PcaReduction(loadings=loadings, explained_variance_ratio=ratios, n_retained=m), scores


def reduce_covariate_block(
    panel: Panel,
    block_names: tuple[str, ...],
    variance_threshold: float = 0.7,
    force_count: int | None = 2,
    score_prefix: str = "pc",
    standardize_scores: bool = True,
) -> tuple[Panel, PcaReduction]:
    """Replace a named covariate block with its leading PCA scores.

    Fitting pools all panel rows (both genders, all years). Scores are
    re-standardized by default so they live on the same scale as the other
    standardized covariates.
    """
    missing = sorted(set(block_names) - set(panel.covariate_names))
    if missing:
        raise IngestError(f"PCA block names not in the panel: {missing}")
    block_pos = [panel.covariate_names.index(name) for name in block_names]
    keep_pos = [j for j in range(panel.n_covariates) if j not in block_pos]

    reduction, scores = pca_reduce(
        panel.X[:, block_pos], variance_threshold=variance_threshold, force_count=force_count
    )
    if standardize_scores:
        scores = (scores - scores.mean(axis=0)) / scores.std(axis=0, ddof=1)
    score_names = tuple(f"{score_prefix}{j + 1}" for j in range(reduction.n_retained))
    X = np.hstack([panel.X[:, keep_pos], scores])
    names = tuple(panel.covariate_names[j] for j in keep_pos) + score_names
    return panel.with_covariates(X, names), reduction
