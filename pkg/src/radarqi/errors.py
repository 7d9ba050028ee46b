"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
FormatError -> 3, DivergedError -> 4. Plain ValueError is treated as a
usage/config problem (exit 2).
"""


class RadarQiError(Exception):
    """Base class for package-specific errors."""


class ConfigError(RadarQiError):
    """Bad configuration file, unknown key, or inconsistent settings."""


class FormatError(RadarQiError):
    """Corrupt or unsupported on-disk artifact (IDX, echo container, checkpoint)."""


class DivergedError(RadarQiError):
    """An iterative computation produced non-finite values."""
