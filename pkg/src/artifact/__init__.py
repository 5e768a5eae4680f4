"""High-probability analysis tools and Monte Carlo checks for stochastic learning dynamics."""

__version__ = "0.1.0"
