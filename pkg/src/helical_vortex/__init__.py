"""Concentrated vortex solutions of -delta^2 div(K grad w) = (w - q)_+^p on a disc,
with the helical specialization and its lift to traveling-rotating Euler flows."""

__version__ = "0.1.0"
