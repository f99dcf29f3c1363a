"""Sampler driver, reusable Metropolis machinery, and convergence diagnostics.

`run_sampler` wires a panel and region graph into the compiled chain
kernel and assembles the retained draws. The univariate building blocks
(`rw_step`, `adapt_scale`, the conjugate Gamma updates) are also exposed
directly; `sample_mh` composes them into a generic adaptive
Metropolis-within-Gibbs loop for small custom targets.

Diagnostics: split-chain potential scale reduction (R-hat) computed from
chain halves as sqrt(var_plus / W) with var_plus = (n-1)/n * W + B/n, and
effective sample size from FFT autocorrelations combined across chains,
truncated with Geyer's initial positive-pair rule.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernel, model
from .config import ModelConfig, SamplerSettings
from .errors import ConfigError, SamplingError
from .ingest import Panel
from .spatial import RegionGraph, icar_quadform


# ---------------------------------------------------------------------------
# draws container


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in draws per chain, addressable by parameter name."""

    columns: tuple[str, ...]
    values: np.ndarray  # (chains, kept, n_params)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values.ndim != 3 or self.values.shape[2] != len(self.columns):
            raise ConfigError("draws array shape does not match column names")
        self._index = {name: j for j, name in enumerate(self.columns)}

    @property
    def n_chains(self) -> int:
        return self.values.shape[0]

    @property
    def n_kept(self) -> int:
        return self.values.shape[1]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def per_chain(self, name: str) -> np.ndarray:
        if name not in self._index:
            raise KeyError(f"no parameter named {name!r} in the draws")
        return self.values[:, :, self._index[name]]

    def pooled(self, name: str) -> np.ndarray:
        return self.per_chain(name).reshape(-1)

    def group(self, prefix: str) -> list[str]:
        """Column names like 'beta[1]', 'beta[2]', ... for a prefix."""
        return [c for c in self.columns if c.startswith(prefix + "[")]

    def write_csv(self, path: str | Path) -> None:
        """Draws file: chain and iteration columns followed by parameters.

        Floats are written with round-trip repr so identical runs produce
        byte-identical files.
        """
        thin = int(self.metadata.get("thinning", 1))
        burn = int(self.metadata.get("burn_in", 0))
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["chain", "iteration", *self.columns])
            for c in range(self.n_chains):
                for r in range(self.n_kept):
                    iteration = burn + (r + 1) * thin - 1
                    writer.writerow(
                        [c, iteration, *[repr(float(v)) for v in self.values[c, r]]]
                    )

    def write_metadata(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.metadata, handle, indent=2, sort_keys=True)
            handle.write("\n")

    @classmethod
    def read_csv(cls, draws_path: str | Path, metadata_path: str | Path) -> "PosteriorDraws":
        with open(metadata_path, encoding="utf-8") as handle:
            metadata = json.load(handle)
        with open(draws_path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if not header or header[:2] != ["chain", "iteration"]:
                raise ConfigError(f"{draws_path} is not a draws file")
            columns = tuple(header[2:])
            rows_by_chain: dict[int, list[list[float]]] = {}
            for row in reader:
                rows_by_chain.setdefault(int(row[0]), []).append(
                    [float(v) for v in row[2:]]
                )
        if not rows_by_chain:
            raise ConfigError(f"{draws_path} contains no draws")
        chains = sorted(rows_by_chain)
        values = np.array([rows_by_chain[c] for c in chains])
        return cls(columns=columns, values=values, metadata=metadata)


def parameter_columns(config: ModelConfig, panel: Panel, graph: RegionGraph) -> tuple[str, ...]:
    p, R, T, G = panel.n_covariates, graph.n_regions, panel.n_times, panel.n_groups
    cols: list[str] = ["beta0"]
    if config.gender_random:
        cols += [f"gamma[{s + 1}]" for s in range(G)]
        cols += [f"mu_s[{s + 1}]" for s in range(G)]
        cols += [f"sigma2_s[{s + 1}]" for s in range(G)]
    else:
        cols.append("gamma")
    cols += [f"beta[{k + 1}]" for k in range(p)]
    cols += [f"omega[{k + 1}]" for k in range(p)]
    cols += [f"theta[{k + 1}]" for k in range(p)]
    cols += [f"psi[{i + 1}]" for i in range(R)]
    cols += [f"alpha[{t + 1}]" for t in range(T)]
    cols += ["rho", "tau_psi", "tau_alpha", "phi"]
    return tuple(cols)


# ---------------------------------------------------------------------------
# univariate Metropolis building blocks


def rw_step(
    current: float,
    log_target: Callable[[float], float],
    scale: float,
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """One Gaussian random-walk Metropolis step on an unconstrained coordinate.

    Constrained coordinates are expected to be handled by the caller on a
    transformed scale with the Jacobian folded into ``log_target``.
    """
    lp = log_target(current)
    if not math.isfinite(lp):
        raise SamplingError(f"log target is not finite at the current point ({current})")
    proposal = current + rng.normal(0.0, scale)
    delta = log_target(proposal) - lp
    if math.log(rng.random()) < delta:
        return proposal, True
    return current, False


def adapt_scale(
    history: Sequence[bool],
    scale: float,
    settings: SamplerSettings,
    batch_index: int = 1,
) -> float:
    """Robbins-Monro multiplicative scale update toward the target rate.

    The step size decays as 1/sqrt(batch_index); the result is clamped to
    [1e-8, 1e4]. With empirical acceptance exactly at the target the scale
    is returned unchanged.
    """
    if not history:
        return scale
    rate = sum(bool(h) for h in history) / len(history)
    step = 1.0 / math.sqrt(max(1, batch_index))
    new = scale * math.exp(step * (rate - settings.target_acceptance))
    return min(max(new, 1e-8), 1e4)


def gibbs_tau_psi(
    psi: np.ndarray,
    graph: RegionGraph,
    hyper: tuple[float, float],
    rng: np.random.Generator,
) -> float:
    """Conjugate Gamma draw of the spatial precision.

    Shape gains (R - G)/2 for the ICAR rank plus 1/2 per isolated region;
    the rate gains half the pairwise quadratic form plus half the isolated
    regions' squares.
    """
    shape0, rate0 = hyper
    psi = np.asarray(psi, dtype=float)
    shape = shape0 + 0.5 * (graph.n_regions - graph.n_components) + 0.5 * len(graph.isolated)
    rate = rate0 + 0.5 * (
        icar_quadform(psi, graph) + sum(psi[i] ** 2 for i in graph.isolated)
    )
    return float(rng.gamma(shape, 1.0 / rate))


def gibbs_tau_alpha(
    alpha: np.ndarray,
    rho: float,
    hyper: tuple[float, float],
    rng: np.random.Generator,
) -> float:
    """Conjugate Gamma draw of the temporal precision under the AR(1) prior."""
    shape0, rate0 = hyper
    alpha = np.asarray(alpha, dtype=float)
    ss = alpha[0] ** 2 + float(np.sum((alpha[1:] - rho * alpha[:-1]) ** 2))
    return float(rng.gamma(shape0 + 0.5 * alpha.shape[0], 1.0 / (rate0 + 0.5 * ss)))


def sample_mh(
    log_target: Callable[[np.ndarray], float],
    init: np.ndarray,
    n_iter: int,
    burn_in: int,
    rng: np.random.Generator,
    settings: SamplerSettings | None = None,
    init_scale: float = 0.5,
) -> np.ndarray:
    """Adaptive coordinate-wise Metropolis sampler for small custom targets.

    Adapts each coordinate's proposal scale on burn-in windows, then runs
    a fixed kernel; returns the post-burn-in draws, one row per iteration.
    """
    settings = settings or SamplerSettings(iterations=n_iter, burn_in=burn_in, thinning=1)
    x = np.asarray(init, dtype=float).copy()
    dim = x.shape[0]
    if not math.isfinite(log_target(x)):
        raise SamplingError("log target is not finite at the initial point")
    scales = np.full(dim, init_scale)
    window: list[list[bool]] = [[] for _ in range(dim)]
    out = np.empty((n_iter - burn_in, dim))
    batch = 0
    for it in range(n_iter):
        for j in range(dim):

            def coord_target(v: float, j: int = j) -> float:
                prev = x[j]
                x[j] = v
                value = log_target(x)
                x[j] = prev
                return value

            x[j], accepted = rw_step(float(x[j]), coord_target, float(scales[j]), rng)
            window[j].append(accepted)
        if it < burn_in and (it + 1) % settings.adaptation_window == 0:
            batch += 1
            for j in range(dim):
                scales[j] = adapt_scale(window[j], float(scales[j]), settings, batch)
                window[j] = []
        if it >= burn_in:
            out[it - burn_in] = x
    return out


# ---------------------------------------------------------------------------
# full-model sampler


def _segment_rows(index: np.ndarray, n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(index, kind="stable").astype(np.int64)
    counts = np.bincount(index, minlength=n_levels)
    ptr = np.zeros(n_levels + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return order, ptr


def chain_seeds(seed: int, n_chains: int) -> list[int]:
    """Disjoint per-chain seeds derived from the root seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_chains)]


def _initial_beta0(config: ModelConfig, panel: Panel, graph: RegionGraph) -> float:
    """Deterministic start, jittered a bounded number of times if degenerate."""
    base = model.logit(float(panel.rate.mean()))
    rng = np.random.default_rng(0)
    for attempt in range(20):
        beta0 = base if attempt == 0 else base + rng.normal(0.0, 0.5)
        state = model.initial_state(config, panel, graph)
        state.beta0 = beta0
        if math.isfinite(model.log_posterior(state, config, panel, graph)):
            return beta0
    raise SamplingError(
        "could not find a finite-posterior initial state after 20 attempts; "
        "check the panel rates and model constants"
    )


def run_sampler(config: ModelConfig, panel: Panel, graph: RegionGraph) -> PosteriorDraws:
    """Run all chains of the Metropolis-within-Gibbs sampler.

    Deterministic given (seed, chains, config, inputs); chains execute
    sequentially, each with its own derived seed.
    """
    if panel.n_regions != graph.n_regions or panel.region_names != graph.region_names:
        raise ConfigError("panel regions do not match the adjacency graph")
    if not config.gender_random and panel.n_groups != 2:
        raise ConfigError("fixed-gender variants require exactly two groups")
    settings = config.sampler

    ly = np.log(panel.rate)
    l1y = np.log1p(-panel.rate)
    X = np.ascontiguousarray(panel.X)
    reg_rows, reg_ptr = _segment_rows(panel.region_idx, panel.n_regions)
    time_rows, time_ptr = _segment_rows(panel.time_idx, panel.n_times)
    grp_rows, grp_ptr = _segment_rows(panel.group_idx, panel.n_groups)

    nbr_ptr = np.zeros(graph.n_regions + 1, dtype=np.int64)
    np.cumsum([len(nb) for nb in graph.neighbors], out=nbr_ptr[1:])
    nbr_flat = (
        np.concatenate(graph.neighbors).astype(np.int64)
        if nbr_ptr[-1] > 0
        else np.zeros(0, dtype=np.int64)
    )
    degrees = graph.degrees.astype(np.int64)
    shape_add = 0.5 * (graph.n_regions - graph.n_components) + 0.5 * len(graph.isolated)

    init_beta0 = _initial_beta0(config, panel, graph)
    columns = parameter_columns(config, panel, graph)
    kept = settings.kept_per_chain
    values = np.empty((settings.chains, kept, len(columns)))
    seeds = chain_seeds(settings.seed, settings.chains)
    acceptance = []
    for c in range(settings.chains):
        out = values[c]
        acc = kernel.run_chain(
            seeds[c],
            settings.iterations,
            settings.burn_in,
            settings.thinning,
            settings.target_acceptance,
            settings.adaptation_window,
            ly,
            l1y,
            X,
            reg_rows,
            reg_ptr,
            time_rows,
            time_ptr,
            grp_rows,
            grp_ptr,
            nbr_flat,
            nbr_ptr,
            degrees,
            shape_add,
            config.ssvs.spike_var,
            config.ssvs.slab_var,
            config.a_phi,
            config.eps_phi,
            config.tau_shape,
            config.tau_rate,
            config.sigma2_gamma,
            config.mu_s_var,
            config.sigma2_s_low,
            config.sigma2_s_high,
            config.rho_beta_prior,
            config.gender_random,
            init_beta0,
            out,
        )
        acceptance.append([float(a) for a in acc])

    metadata = {
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "seed": settings.seed,
        "chain_seeds": seeds,
        "iterations": settings.iterations,
        "burn_in": settings.burn_in,
        "thinning": settings.thinning,
        "kept_per_chain": kept,
        "kept_pooled": kept * settings.chains,
        "columns": list(columns),
        "region_names": list(panel.region_names),
        "year_labels": list(panel.year_labels),
        "group_labels": list(panel.group_labels),
        "covariate_names": list(panel.covariate_names),
        "isolated_regions": sorted(panel.region_names[i] for i in graph.isolated),
        "isolated_convention": "independent N(0, 1/tau_psi), included in centering",
        "pca_convention": "pooled fit, scores re-standardized",
        "acceptance_rates": {
            "blocks": ["beta0", "gender", "beta", "psi", "alpha", "rho", "b"],
            "per_chain": acceptance,
        },
    }
    return PosteriorDraws(columns=columns, values=values, metadata=metadata)


# ---------------------------------------------------------------------------
# diagnostics


def split_rhat(chains: np.ndarray) -> float:
    """Split-chain potential scale reduction factor.

    ``chains`` is (n_chains, n_draws); each chain is halved before the
    between/within decomposition.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2:
        raise ValueError("split_rhat needs at least two chains")
    half = chains.shape[1] // 2
    if half < 2:
        raise ValueError("chains are too short to split")
    seqs = np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)
    n = seqs.shape[1]
    within = seqs.var(axis=1, ddof=1).mean()
    between = n * seqs.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return math.nan
    var_plus = (n - 1) / n * within + between / n
    return math.sqrt(var_plus / within)


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    fft = np.fft.rfft(centered, size)
    acov = np.fft.irfft(fft * np.conjugate(fft), size)[:n].real
    return acov / n


def effective_sample_size(chains: np.ndarray) -> float:
    """Autocorrelation-based ESS pooled across chains (BDA3-style).

    Uses the multi-chain correlation estimate rho_t = 1 - (W - m_t)/var_plus
    truncated at the first negative sum of an autocorrelation pair.
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    m, n = chains.shape
    if n < 4:
        raise ValueError("chains are too short for an ESS estimate")
    within = chains.var(axis=1, ddof=1).mean()
    if within == 0.0:
        return math.nan
    if m > 1:
        between = n * chains.mean(axis=1).var(ddof=1)
        var_plus = (n - 1) / n * within + between / n
    else:
        var_plus = (n - 1) / n * within
    acov = np.mean([_autocovariance(chains[c]) for c in range(m)], axis=0)
    rho = 1.0 - (within - acov) / var_plus
    rho[0] = 1.0
    # Geyer initial positive-pair truncation
    total = 0.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        total += pair
        t += 2
    ess = m * n / (1.0 + 2.0 * total)
    return float(min(ess, m * n))


def diagnostics(draws: PosteriorDraws) -> dict[str, tuple[float, float]]:
    """Per-parameter (rhat, ess); rhat is NaN for single-chain runs."""
    result: dict[str, tuple[float, float]] = {}
    for name in draws.columns:
        chains = draws.per_chain(name)
        if np.allclose(chains.var(), 0.0):
            result[name] = (math.nan, math.nan)
            continue
        rhat = split_rhat(chains) if draws.n_chains >= 2 else math.nan
        result[name] = (rhat, effective_sample_size(chains))
    return result
