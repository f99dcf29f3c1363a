"""Exception hierarchy shared across the package.

Each CLI failure mode maps to one subclass so the entry points can hand
out distinct exit codes.
"""


class ArealBetaError(Exception):
    """Base class for all package errors."""


class ConfigError(ArealBetaError):
    """Invalid run configuration or model constants."""


class IngestError(ArealBetaError):
    """Malformed panel data, adjacency file, or scaling request."""


class GraphError(IngestError):
    """Malformed region adjacency structure."""


class SamplingError(ArealBetaError):
    """Sampler could not be started or produced invalid state."""


class DiagnosticsAlarm(ArealBetaError):
    """Convergence diagnostics exceeded the configured alarm threshold."""
