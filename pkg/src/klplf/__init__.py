"""Probabilistic load flow with a truncated Karhunen-Loeve input model and
anisotropic sparse-grid stochastic collocation."""

__version__ = "0.1.0"
