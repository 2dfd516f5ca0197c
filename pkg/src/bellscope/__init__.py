"""Classical, quantum and PR-box correlations for two-party Bell experiments."""

__version__ = "0.1.0"
