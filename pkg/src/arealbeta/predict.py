"""Posterior predictive simulation and the train/test comparison harness.

The out-of-sample temporal effect is obtained by iterating the AR(1)
forward per retained draw; test-year covariates are taken as observed.
The point prediction is the posterior predictive mean (median behind a
flag); SLPD uses the log of the draw-averaged density, computed with the
log-sum-exp pattern.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .config import ModelConfig
from .errors import ConfigError
from .ingest import Panel
from .mcmc import PosteriorDraws, run_sampler
from .model import inv_logit_vec
from .spatial import RegionGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictiveDraws:
    """Simulated rates and pointwise predictive log densities per test row."""

    samples: np.ndarray  # (n_draws, n_test)
    log_density: np.ndarray  # (n_draws, n_test), at the observed values

    def __post_init__(self) -> None:
        if self.samples.shape != self.log_density.shape:
            raise ConfigError("samples and log_density must be aligned")
        if np.any(self.samples <= 0.0) or np.any(self.samples >= 1.0):
            raise ConfigError("simulated rates must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class MetricsRow:
    model: str
    rmse: float
    rmse_f: float
    rmse_m: float
    mae: float
    mbpv: float
    slpd: float
    error: str | None = None

    def as_list(self) -> list:
        return [self.model, self.rmse, self.rmse_f, self.rmse_m, self.mae, self.mbpv, self.slpd]


def temporal_split(panel: Panel, test_time: int) -> tuple[Panel, Panel]:
    """Split at one time index: earlier rows train, that index tests.

    Rows after the test index, if any, are dropped with a warning.
    """
    if not 0 <= test_time < panel.n_times:
        raise ConfigError(f"test_time {test_time} outside 0..{panel.n_times - 1}")
    if test_time == 0:
        raise ConfigError("test_time 0 leaves an empty training set")
    if test_time < panel.n_times - 1:
        log.warning(
            "dropping %d rows after the test year", int(np.sum(panel.time_idx > test_time))
        )

    def subset(mask: np.ndarray, time_shift: int, year_labels: tuple[str, ...]) -> Panel:
        return replace(
            panel,
            region_idx=panel.region_idx[mask],
            time_idx=panel.time_idx[mask] - time_shift,
            group_idx=panel.group_idx[mask],
            rate=panel.rate[mask],
            X=panel.X[mask],
            year_labels=year_labels,
        )

    train = subset(panel.time_idx < test_time, 0, panel.year_labels[:test_time])
    test = subset(panel.time_idx == test_time, test_time, (panel.year_labels[test_time],))
    return train, test


def _stack(draws: PosteriorDraws, prefix: str) -> np.ndarray:
    return np.column_stack([draws.pooled(c) for c in draws.group(prefix)])


def posterior_predictive(
    draws: PosteriorDraws,
    test: Panel,
    horizon_offset: int,
    rng: np.random.Generator,
) -> PredictiveDraws:
    """Simulate the posterior predictive for every test row.

    ``horizon_offset`` is the number of AR(1) steps from the last training
    year to the test year: 1 for one-step-ahead, 0 when the test year's
    temporal effect was part of the fit.
    """
    beta0 = draws.pooled("beta0")
    D = beta0.shape[0]
    beta = _stack(draws, "beta")
    psi = _stack(draws, "psi")
    alpha = _stack(draws, "alpha")
    phi = draws.pooled("phi")
    if beta.shape[1] != test.n_covariates:
        raise ConfigError("test panel covariates do not match the fitted model")
    if psi.shape[1] <= int(test.region_idx.max()):
        raise ConfigError("test panel contains regions unseen in training")

    if horizon_offset == 0:
        # test time indices address fitted temporal effects directly
        if int(test.time_idx.max()) >= alpha.shape[1]:
            raise ConfigError("test time index beyond the fitted horizon needs horizon_offset > 0")
        alpha_star = alpha[:, test.time_idx]
    else:
        rho = draws.pooled("rho")
        tau_alpha = draws.pooled("tau_alpha")
        step = alpha[:, -1]
        for _ in range(horizon_offset):
            step = rho * step + rng.normal(size=D) / np.sqrt(tau_alpha)
        alpha_star = np.broadcast_to(step[:, None], (D, test.n_rows))

    eta = beta0[:, None] + beta @ test.X.T + psi[:, test.region_idx] + alpha_star
    if "gamma" in draws:
        gamma = draws.pooled("gamma")
        eta = eta + gamma[:, None] * (test.group_idx == 1)
    else:
        gamma_s = _stack(draws, "gamma")
        eta = eta + gamma_s[:, test.group_idx]

    mu = inv_logit_vec(eta)
    a = mu * phi[:, None]
    b = phi[:, None] - a
    samples = rng.beta(a, b)
    # clip away exact endpoint draws produced by floating-point rounding
    tiny = np.finfo(float).tiny
    samples = np.clip(samples, tiny, 1.0 - 1e-16)
    y = test.rate[None, :]
    log_density = (
        gammaln(phi)[:, None]
        - gammaln(a)
        - gammaln(b)
        + (a - 1.0) * np.log(y)
        + (b - 1.0) * np.log1p(-y)
    )
    return PredictiveDraws(samples=samples, log_density=log_density)


def metrics(
    pred: PredictiveDraws,
    test: Panel,
    model_label: str = "",
    point: str = "mean",
) -> MetricsRow:
    """Error metrics over the test rows.

    RMSE/MAE compare the per-row point prediction with the observed rate;
    BPV is the per-row fraction of simulated rates above the observation
    and MBPV its mean; SLPD sums log draw-averaged densities.
    """
    if pred.samples.shape[1] != test.n_rows:
        raise ConfigError("predictive draws are not aligned with the test panel")
    if point == "mean":
        predicted = pred.samples.mean(axis=0)
    elif point == "median":
        predicted = np.median(pred.samples, axis=0)
    else:
        raise ConfigError(f"unknown point predictor {point!r}")
    err = predicted - test.rate

    def rmse(mask: np.ndarray) -> float:
        return float(np.sqrt(np.mean(err[mask] ** 2))) if mask.any() else math.nan

    all_rows = np.ones(test.n_rows, dtype=bool)
    bpv = (pred.samples > test.rate[None, :]).mean(axis=0)
    n_draws = pred.log_density.shape[0]
    slpd = float(np.sum(logsumexp(pred.log_density, axis=0) - math.log(n_draws)))
    return MetricsRow(
        model=model_label,
        rmse=rmse(all_rows),
        rmse_f=rmse(test.group_idx == 0),
        rmse_m=rmse(test.group_idx == 1),
        mae=float(np.mean(np.abs(err))),
        mbpv=float(bpv.mean()),
        slpd=slpd,
    )


def bpv_per_row(pred: PredictiveDraws, test: Panel) -> np.ndarray:
    return (pred.samples > test.rate[None, :]).mean(axis=0)


def evaluate_variant(
    config: ModelConfig,
    panel: Panel,
    graph: RegionGraph,
    test_time: int,
    predictive_seed: int,
    point: str = "mean",
) -> tuple[MetricsRow, PosteriorDraws]:
    train, test = temporal_split(panel, test_time)
    draws = run_sampler(config, train, graph)
    rng = np.random.default_rng(predictive_seed)
    pred = posterior_predictive(draws, test, horizon_offset=1, rng=rng)
    return metrics(pred, test, model_label=config.variant, point=point), draws


def compare_models(
    panel: Panel,
    graph: RegionGraph,
    variants: list[ModelConfig],
    test_time: int,
    predictive_seed: int = 0,
    point: str = "mean",
) -> list[MetricsRow]:
    """Fit each variant on the training split and score the test split.

    A variant that fails is reported as a NaN row carrying the error
    message; the remaining variants still run.
    """
    rows: list[MetricsRow] = []
    for config in variants:
        try:
            row, _ = evaluate_variant(
                config, panel, graph, test_time, predictive_seed, point=point
            )
            rows.append(row)
        except Exception as exc:  # noqa: BLE001 - per-variant isolation is the contract
            log.warning("variant %s failed: %s", config.variant, exc)
            rows.append(
                MetricsRow(
                    model=config.variant,
                    rmse=math.nan,
                    rmse_f=math.nan,
                    rmse_m=math.nan,
                    mae=math.nan,
                    mbpv=math.nan,
                    slpd=math.nan,
                    error=str(exc),
                )
            )
    return rows
