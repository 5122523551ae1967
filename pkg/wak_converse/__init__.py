"""wak_converse - WAK to GW code reduction and finite-blocklength converse bounds."""

__version__ = "0.1.0"

__all__ = ["__version__"]
