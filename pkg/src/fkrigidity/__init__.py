"""Monte Carlo and spectral tools for number rigidity of 1D random Schrodinger operators."""

__version__ = "0.1.0"
