"""Berry phases, Berry fluxes and Chern numbers of two-band models from simulated circuits."""

__version__ = "0.1.0"
