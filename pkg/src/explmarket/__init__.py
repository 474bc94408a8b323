"""Explanation-market simulator: tabular credit scoring, counterfactual search,
a keyword ad exchange, and revenue strategy simulations."""

__version__ = "0.1.0"


class ExplMarketError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(ExplMarketError):
    """Malformed dataset or schema file, or values outside declared domains."""


class ModelError(ExplMarketError):
    """Invalid training inputs or schema mismatch at prediction time."""


class CounterfactualError(ExplMarketError):
    """Invalid counterfactual operation (e.g. a candidate that does not flip)."""


class AuctionError(ExplMarketError):
    """Invalid exchange operation (duplicate advertiser, settling unsold, ...)."""


class SpamInjectionError(ExplMarketError):
    """Injected feature un-flipped the decision; caller should fall back."""
