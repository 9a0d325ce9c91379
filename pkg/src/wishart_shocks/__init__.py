"""Diffusing complex Wishart matrices: finite-N characteristic polynomials,
large-N shocks and the Bessoid limit at the hard-wall critical point."""

__version__ = "0.1.0"
