"""Model and sampler configuration objects.

Defaults reproduce the production run: slab scaling c=4000 with practical
significance threshold zeta=0.001 (spike SD ~= 0.00025, slab variance ~= 1),
Gamma(0.5, 0.0005) hyperpriors on both random-effect precisions, the
(a*B)^2 precision prior with a=50, eps=0.1, and a 150k x 2-chain MCMC run
with 50k burn-in and thinning 10.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

VARIANTS = ("M1", "M2", "M3", "M4")


@dataclass(frozen=True)
class SsvsConstants:
    """Spike-and-slab mixture constants.

    ``tau`` (the spike SD) is derived from the slab scaling ``c`` and the
    density-intersection threshold ``zeta``; the slab variance is
    ``(c * tau)^2``.
    """

    c: float = 4000.0
    zeta: float = 0.001

    def __post_init__(self) -> None:
        if self.c <= 1.0:
            raise ConfigError(f"slab scaling c must exceed 1, got {self.c}")
        if self.zeta <= 0.0:
            raise ConfigError(f"threshold zeta must be positive, got {self.zeta}")

    @property
    def tau(self) -> float:
        return self.zeta / math.sqrt(2.0 * math.log(self.c) * self.c**2 / (self.c**2 - 1.0))

    @property
    def slab_var(self) -> float:
        return (self.c * self.tau) ** 2

    @property
    def spike_var(self) -> float:
        return self.tau**2


@dataclass(frozen=True)
class SamplerSettings:
    iterations: int = 150_000
    chains: int = 2
    burn_in: int = 50_000
    thinning: int = 10
    seed: int = 20231109
    target_acceptance: float = 0.44
    adaptation_window: int = 50

    def __post_init__(self) -> None:
        if self.burn_in >= self.iterations:
            raise ConfigError("burn_in must be smaller than iterations")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if self.chains < 1:
            raise ConfigError("need at least one chain")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ConfigError("target_acceptance must lie in (0, 1)")

    @property
    def kept_per_chain(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass(frozen=True)
class ModelConfig:
    """Full model specification: variant, priors, and sampler settings.

    Variants: M1 fixed gender effect + Beta(1,1) prior on the AR
    coefficient; M2 fixed gender + standard Normal; M3 random gender +
    Beta(1,1); M4 random gender + standard Normal.
    """

    variant: str = "M1"
    ssvs: SsvsConstants = field(default_factory=SsvsConstants)
    a_phi: float = 50.0
    eps_phi: float = 0.1
    tau_shape: float = 0.5
    tau_rate: float = 0.0005
    sigma2_gamma: float = 100.0
    mu_s_var: float = 4.0
    sigma2_s_low: float = 1.0
    sigma2_s_high: float = 10.0
    sampler: SamplerSettings = field(default_factory=SamplerSettings)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.a_phi <= 0.0:
            raise ConfigError("a_phi must be positive")
        if self.eps_phi < 0.0:
            raise ConfigError("eps_phi must be non-negative")
        if self.tau_shape <= 0.0 or self.tau_rate <= 0.0:
            raise ConfigError("Gamma hyperprior shape and rate must be positive")
        if not self.sigma2_s_low < self.sigma2_s_high:
            raise ConfigError("sigma2_s bounds must satisfy low < high")

    @property
    def gender_random(self) -> bool:
        return self.variant in ("M3", "M4")

    @property
    def rho_beta_prior(self) -> bool:
        return self.variant in ("M1", "M3")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Stable hash of the configuration, embedded in run artifacts."""
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def config_from_dict(raw: dict) -> ModelConfig:
    """Build a ModelConfig from a plain (e.g. YAML-loaded) mapping."""
    raw = dict(raw)
    kwargs = {}
    if "ssvs" in raw:
        kwargs["ssvs"] = SsvsConstants(**raw.pop("ssvs"))
    if "sampler" in raw:
        kwargs["sampler"] = SamplerSettings(**raw.pop("sampler"))
    known = {f for f in ModelConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
    kwargs.update(raw)
    try:
        return ModelConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
