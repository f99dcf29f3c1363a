"""Beta likelihood, link, linear predictor, and the composed log posterior.

The response is Beta(mu*phi, (1-mu)*phi) with logit link, so
Var(Y) = mu(1-mu)/(1+phi). The precision is parameterized through a
latent B in (0, 1) with phi = (a*B)^2; all prior evaluation happens on B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from . import spatial, ssvs
from .config import ModelConfig
from .errors import ConfigError, SamplingError
from .ingest import Panel, PanelRow
from .spatial import RegionGraph

LOG_2PI = math.log(2.0 * math.pi)


#: smallest representable step below 1.0, used to keep the link inside (0, 1)
_ONE_MINUS = math.nextafter(1.0, 0.0)
_TINY = math.nextafter(0.0, 1.0)


def inv_logit(eta: float) -> float:
    """Numerically stable logistic function, saturating strictly inside (0, 1)."""
    if eta >= 0.0:
        out = 1.0 / (1.0 + math.exp(-eta))
    else:
        e = math.exp(eta)
        out = e / (1.0 + e)
    return min(max(out, _TINY), _ONE_MINUS)


def logit(mu: float) -> float:
    if not 0.0 < mu < 1.0:
        raise ValueError(f"logit argument must lie in (0, 1), got {mu}")
    return math.log(mu / (1.0 - mu))


def inv_logit_vec(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, _TINY, _ONE_MINUS)


@dataclass
class ParamState:
    """One point in parameter space.

    ``gamma`` is used by the fixed-gender variants (M1/M2); ``gamma_s``
    with hyperparameters ``mu_s`` and ``sigma2_s`` by the random-gender
    variants (M3/M4). ``phi`` always equals ``(a * b)**2`` for the
    configured constant ``a``.
    """

    beta0: float
    beta: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    alpha: np.ndarray
    rho: float
    tau_psi: float
    tau_alpha: float
    b: float
    phi: float
    gamma: float | None = None
    gamma_s: np.ndarray | None = None
    mu_s: np.ndarray | None = None
    sigma2_s: np.ndarray | None = None

    def copy(self) -> "ParamState":
        return replace(
            self,
            beta=self.beta.copy(),
            omega=self.omega.copy(),
            theta=self.theta.copy(),
            psi=self.psi.copy(),
            alpha=self.alpha.copy(),
            gamma_s=None if self.gamma_s is None else self.gamma_s.copy(),
            mu_s=None if self.mu_s is None else self.mu_s.copy(),
            sigma2_s=None if self.sigma2_s is None else self.sigma2_s.copy(),
        )


def initial_state(config: ModelConfig, panel: Panel, graph: RegionGraph) -> ParamState:
    """Deterministic in-support starting point near the stationary regime."""
    p = panel.n_covariates
    b = 0.5
    state = ParamState(
        beta0=logit(float(panel.rate.mean())),
        beta=np.zeros(p),
        omega=np.zeros(p, dtype=np.int64),
        theta=np.full(p, 0.5),
        psi=np.zeros(graph.n_regions),
        alpha=np.zeros(panel.n_times),
        rho=0.5,
        tau_psi=1.0,
        tau_alpha=1.0,
        b=b,
        phi=(config.a_phi * b) ** 2,
    )
    if config.gender_random:
        G = panel.n_groups
        state.gamma_s = np.zeros(G)
        state.mu_s = np.zeros(G)
        state.sigma2_s = np.full(G, 0.5 * (config.sigma2_s_low + config.sigma2_s_high))
    else:
        state.gamma = 0.0
    return state


def linear_predictor(state: ParamState, row: PanelRow) -> float:
    """Linear predictor for one observation under the state's variant."""
    eta = state.beta0 + float(row.covariates @ state.beta) + state.psi[row.region] + state.alpha[row.time]
    if state.gamma_s is not None:
        eta += state.gamma_s[row.group]
    else:
        # dummy coding: group 0 (females) is the baseline
        eta += state.gamma * (1.0 if row.group == 1 else 0.0)
    return float(eta)


def linear_predictor_vec(state: ParamState, panel: Panel) -> np.ndarray:
    eta = (
        state.beta0
        + panel.X @ state.beta
        + state.psi[panel.region_idx]
        + state.alpha[panel.time_idx]
    )
    if state.gamma_s is not None:
        eta = eta + state.gamma_s[panel.group_idx]
    else:
        eta = eta + state.gamma * (panel.group_idx == 1)
    return eta


def beta_log_density(y: float, mu: float, phi: float) -> float:
    """Log density of Beta(mu*phi, (1-mu)*phi) at y."""
    if not 0.0 < y < 1.0:
        raise ValueError(f"Beta support violation: y={y} must lie in (0, 1)")
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu={mu} must lie in (0, 1)")
    a = mu * phi
    b = (1.0 - mu) * phi
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"non-positive Beta shapes ({a}, {b})")
    return float(
        gammaln(phi) - gammaln(a) - gammaln(b) + (a - 1.0) * math.log(y) + (b - 1.0) * math.log1p(-y)
    )


def log_likelihood(state: ParamState, panel: Panel) -> float:
    """Sum of Beta log densities over the panel."""
    eta = linear_predictor_vec(state, panel)
    mu = inv_logit_vec(eta)
    a = mu * state.phi
    b = state.phi - a
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        return -math.inf
    terms = (
        gammaln(state.phi)
        - gammaln(a)
        - gammaln(b)
        + (a - 1.0) * np.log(panel.rate)
        + (b - 1.0) * np.log1p(-panel.rate)
    )
    return float(terms.sum())


def _norm_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (LOG_2PI + math.log(var)) - 0.5 * (x - mean) ** 2 / var


def ar1_log_prior(alpha: np.ndarray, rho: float, tau_alpha: float) -> float:
    """AR(1) log density: alpha_1 ~ N(0, 1/tau), alpha_t ~ N(rho*alpha_{t-1}, 1/tau)."""
    if tau_alpha <= 0.0:
        raise ValueError("tau_alpha must be positive")
    alpha = np.asarray(alpha, dtype=float)
    T = alpha.shape[0]
    var = 1.0 / tau_alpha
    out = _norm_logpdf(float(alpha[0]), 0.0, var)
    for t in range(1, T):
        out += _norm_logpdf(float(alpha[t]), rho * float(alpha[t - 1]), var)
    return out


def _gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if x <= 0.0:
        return -math.inf
    return shape * math.log(rate) - float(gammaln(shape)) + (shape - 1.0) * math.log(x) - rate * x


def _beta_logpdf(x: float, a: float, b: float) -> float:
    if not 0.0 < x < 1.0:
        return -math.inf
    return float(
        (a - 1.0) * math.log(x)
        + (b - 1.0) * math.log1p(-x)
        + gammaln(a + b)
        - gammaln(a)
        - gammaln(b)
    )


def log_prior(state: ParamState, config: ModelConfig, graph: RegionGraph) -> float:
    """Sum of all component log priors (beta0 is flat and contributes 0).

    Support violations return -inf rather than raising, so the value can
    be used directly in accept/reject ratios.
    """
    if state.tau_psi <= 0.0 or state.tau_alpha <= 0.0:
        return -math.inf
    if not 0.0 < state.b < 1.0:
        return -math.inf
    if abs(state.phi - (config.a_phi * state.b) ** 2) > 1e-9 * max(1.0, state.phi):
        raise ConfigError("state.phi does not match (a * b)^2")

    out = 0.0
    # gender effect
    if config.gender_random:
        if state.gamma_s is None or state.mu_s is None or state.sigma2_s is None:
            raise ConfigError("random-gender variant requires gamma_s, mu_s, sigma2_s")
        for s in range(state.gamma_s.shape[0]):
            s2 = float(state.sigma2_s[s])
            if not config.sigma2_s_low <= s2 <= config.sigma2_s_high:
                return -math.inf
            out += _norm_logpdf(float(state.gamma_s[s]), float(state.mu_s[s]), s2)
            out += _norm_logpdf(float(state.mu_s[s]), 0.0, config.mu_s_var)
            out += -math.log(config.sigma2_s_high - config.sigma2_s_low)
    else:
        if state.gamma is None:
            raise ConfigError("fixed-gender variant requires gamma")
        out += _norm_logpdf(state.gamma, 0.0, config.sigma2_gamma)

    # SSVS coefficient block, inclusion indicators, and their probabilities
    for k in range(state.beta.shape[0]):
        th = float(state.theta[k])
        if not 0.0 < th < 1.0:
            return -math.inf
        om = int(state.omega[k])
        out += ssvs.ssvs_coef_log_prior(float(state.beta[k]), om, config.ssvs)
        out += math.log(th) if om == 1 else math.log1p(-th)
        # theta_k ~ Uniform(0,1) contributes 0 inside its support

    # spatial and temporal random effects
    out += spatial.icar_log_prior(state.psi, state.tau_psi, graph)
    out += ar1_log_prior(state.alpha, state.rho, state.tau_alpha)

    # AR coefficient
    if config.rho_beta_prior:
        if not 0.0 < state.rho < 1.0:
            return -math.inf
        # Beta(1,1) density is 1 on (0,1)
    else:
        out += _norm_logpdf(state.rho, 0.0, 1.0)

    # precisions and the Beta precision latent
    out += _gamma_logpdf(state.tau_psi, config.tau_shape, config.tau_rate)
    out += _gamma_logpdf(state.tau_alpha, config.tau_shape, config.tau_rate)
    out += _beta_logpdf(state.b, 1.0 + config.eps_phi, 1.0 + config.eps_phi)
    return out


def log_posterior(
    state: ParamState, config: ModelConfig, panel: Panel | None, graph: RegionGraph
) -> float:
    """Unnormalized log posterior; ``panel=None`` gives the prior alone."""
    prior = log_prior(state, config, graph)
    if not math.isfinite(prior):
        return -math.inf
    if panel is None or panel.n_rows == 0:
        return prior
    return prior + log_likelihood(state, panel)


def check_initial_state(
    state: ParamState, config: ModelConfig, panel: Panel, graph: RegionGraph
) -> None:
    value = log_posterior(state, config, panel, graph)
    if not math.isfinite(value):
        raise SamplingError(f"non-finite log posterior at initialization ({value})")
