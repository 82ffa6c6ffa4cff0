"""Exception hierarchy shared across the package."""


class LandauLabError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(LandauLabError):
    """Bad experiment configuration (missing file, parse error, invalid key)."""


class NumericError(LandauLabError):
    """A numerical computation failed (NaN, non-convergence, horizon exceeded)."""


class DivergenceError(LandauLabError):
    """A truncated sum or integral was detected to diverge for the given indices."""


class StabilityGapError(LandauLabError):
    """No stability gap exists at any tested strip width (unstable or marginal)."""
