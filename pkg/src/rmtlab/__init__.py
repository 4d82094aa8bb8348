"""Random-matrix spectral statistics: ensembles, local laws, universality oracles and DBM."""

__version__ = "0.1.0"
