"""Exception hierarchy shared by every module."""

from __future__ import annotations


class PanelDmlError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PanelDmlError, ValueError):
    """An invalid configuration value or violated precondition bound."""


class DimensionError(PanelDmlError, ValueError):
    """Array lengths or widths do not match the panel layout."""


class SingularDesignError(PanelDmlError, ValueError):
    """The regression design matrix is rank deficient.

    Attributes
    ----------
    columns : list of str
        Names of the columns involved in the linear dependence.
    """

    def __init__(self, message: str, columns: list[str] | None = None):
        super().__init__(message)
        self.columns = list(columns or [])


class EstimationError(PanelDmlError, RuntimeError):
    """An estimator could not produce a coefficient (e.g. a degenerate fold)."""
