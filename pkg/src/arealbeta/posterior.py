"""Posterior summarization: moments, PP0, inclusion probabilities, reports.

Conventions: SD uses the n-1 denominator; skewness and kurtosis use
population-style central moments (divide by n), with kurtosis raw (a
Normal sample sits near 3). Chains are pooled after burn-in for every
reported table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import gaussian_kde

from .errors import ConfigError
from .mcmc import PosteriorDraws


@dataclass(frozen=True)
class SummaryRow:
    parameter: str
    mean: float
    sd: float
    cv: float
    skewness: float
    kurtosis: float

    def as_list(self) -> list:
        return [
            self.parameter,
            self.mean,
            self.sd,
            self.cv,
            self.skewness,
            self.kurtosis,
        ]


def summarize(draws: np.ndarray, name: str = "") -> SummaryRow:
    """Moment summary of a pooled draw vector.

    Zero-variance input yields sd 0 and NaN markers for the shape
    statistics; a zero mean yields a NaN coefficient of variation.
    """
    x = np.asarray(draws, dtype=float).reshape(-1)
    if x.shape[0] < 2:
        raise ValueError("need at least two draws to summarize")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    # spread at rounding-noise level is indistinguishable from constant
    if sd <= 1e-12 * max(1.0, abs(mean)):
        return SummaryRow(name, mean, sd, math.nan, math.nan, math.nan)
    centered = x - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    cv = sd / mean if mean != 0.0 else math.nan
    return SummaryRow(name, mean, sd, cv, m3 / m2**1.5, m4 / m2**2)


def gender_intercept_draws(draws: PosteriorDraws) -> dict[str, np.ndarray]:
    """Per-draw gender intercepts: baseline plus the gender shift.

    Fixed variant: group 0 keeps the global intercept, group 1 adds gamma.
    Random variant: every group adds its own deviation.
    """
    if "beta0" not in draws:
        raise ConfigError("draws do not contain beta0")
    beta0 = draws.pooled("beta0")
    labels = draws.metadata.get("group_labels", ["group0", "group1"])
    out: dict[str, np.ndarray] = {}
    if "gamma" in draws:
        gamma = draws.pooled("gamma")
        out[labels[0]] = beta0
        out[labels[1]] = beta0 + gamma
    elif draws.group("gamma"):
        for s, col in enumerate(draws.group("gamma")):
            out[labels[s]] = beta0 + draws.pooled(col)
    else:
        raise ConfigError("draws contain neither gamma nor gamma[s] columns")
    return out


def derived_intercepts(draws: PosteriorDraws) -> list[SummaryRow]:
    return [
        summarize(values, name=f"xi ({label})")
        for label, values in gender_intercept_draws(draws).items()
    ]


def pp0(draws: np.ndarray) -> float:
    """Fraction of draws strictly above zero."""
    x = np.asarray(draws, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("pp0 needs at least one draw")
    return float(np.mean(x > 0.0))


def inclusion_probabilities(
    omega: np.ndarray, covariate_names: list[str] | tuple[str, ...]
) -> dict[str, float]:
    """Pooled frequency of inclusion per covariate from the indicator draws."""
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[1] != len(covariate_names):
        raise ValueError("omega draws must be (n_draws, n_covariates)")
    if not np.isin(omega, (0.0, 1.0)).all():
        raise ValueError("omega draws must be binary")
    freqs = omega.mean(axis=0)
    return {name: float(f) for name, f in zip(covariate_names, freqs)}


def selected_covariates(probs: dict[str, float], threshold: float = 0.5) -> list[str]:
    return [name for name, prob in probs.items() if prob > threshold]


def omega_matrix(draws: PosteriorDraws) -> np.ndarray:
    cols = draws.group("omega")
    if not cols:
        raise ConfigError("draws do not contain omega columns")
    return np.column_stack([draws.pooled(c) for c in cols])


_HEADER = ["parameter", "mean", "sd", "cv", "skewness", "kurtosis"]


def _write_summary_csv(path: Path, rows: list[SummaryRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_HEADER)
        for row in rows:
            writer.writerow(row.as_list())


def density_grid(values: np.ndarray, label: str, n_points: int = 256) -> list[tuple[str, float, float]]:
    """Rule-of-thumb (Scott bandwidth) kernel density on an even grid."""
    values = np.asarray(values, dtype=float).reshape(-1)
    lo, hi = values.min(), values.max()
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    grid = np.linspace(lo - pad, hi + pad, n_points)
    density = gaussian_kde(values)(grid)
    return [(label, float(x), float(d)) for x, d in zip(grid, density)]


def summary_report(
    draws: PosteriorDraws, out_dir: str | Path, inclusion_threshold: float = 0.5
) -> dict[str, Path]:
    """Emit the full set of summary tables as CSV files.

    Files: gender intercepts, region effects, time effects (with PP0
    row), the scalar parameters, inclusion probabilities, and kernel
    density grids for plotting.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = draws.metadata
    region_names = meta.get("region_names") or [
        f"region {i + 1}" for i in range(len(draws.group("psi")))
    ]
    year_labels = meta.get("year_labels") or [
        f"t={t + 1}" for t in range(len(draws.group("alpha")))
    ]
    covariate_names = meta.get("covariate_names") or [
        f"x{k + 1}" for k in range(len(draws.group("beta")))
    ]
    written: dict[str, Path] = {}

    intercept_rows = derived_intercepts(draws)
    _write_summary_csv(out_dir / "gender_intercepts.csv", intercept_rows)
    written["gender_intercepts"] = out_dir / "gender_intercepts.csv"

    psi_rows = [
        summarize(draws.pooled(col), name=f"psi ({region_names[i]})")
        for i, col in enumerate(draws.group("psi"))
    ]
    _write_summary_csv(out_dir / "spatial_effects.csv", psi_rows)
    written["spatial_effects"] = out_dir / "spatial_effects.csv"

    alpha_cols = draws.group("alpha")
    alpha_rows = [
        summarize(draws.pooled(col), name=f"alpha ({year_labels[t]})")
        for t, col in enumerate(alpha_cols)
    ]
    _write_summary_csv(out_dir / "temporal_effects.csv", alpha_rows)
    written["temporal_effects"] = out_dir / "temporal_effects.csv"

    with open(out_dir / "temporal_pp0.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["year", "pp0"])
        for t, col in enumerate(alpha_cols):
            writer.writerow([year_labels[t], pp0(draws.pooled(col))])
    written["temporal_pp0"] = out_dir / "temporal_pp0.csv"

    scalar_rows = [
        summarize(draws.pooled(name), name=name)
        for name in ("rho", "phi", "tau_psi", "tau_alpha")
        if name in draws
    ]
    _write_summary_csv(out_dir / "scalar_parameters.csv", scalar_rows)
    written["scalar_parameters"] = out_dir / "scalar_parameters.csv"

    probs = inclusion_probabilities(omega_matrix(draws), covariate_names)
    with open(out_dir / "inclusion_probabilities.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["covariate", "inclusion_probability", "included"])
        for name, prob in probs.items():
            writer.writerow([name, prob, int(prob > inclusion_threshold)])
    written["inclusion_probabilities"] = out_dir / "inclusion_probabilities.csv"

    with open(out_dir / "density_grids.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["series", "x", "density"])
        for label, values in gender_intercept_draws(draws).items():
            for row in density_grid(values, f"xi ({label})"):
                writer.writerow(row)
        for i, col in enumerate(draws.group("psi")):
            for row in density_grid(draws.pooled(col), f"psi ({region_names[i]})"):
                writer.writerow(row)
        for t, col in enumerate(alpha_cols):
            for row in density_grid(draws.pooled(col), f"alpha ({year_labels[t]})"):
                writer.writerow(row)
    written["density_grids"] = out_dir / "density_grids.csv"
    return written
