"""
nngp - Gaussian processes induced by infinitely wide neural networks.

Kernel recursion, GP regression with the induced kernel, finite-width
simulations and Barron-space Monte Carlo networks.
"""

__version__ = "0.1.0"
