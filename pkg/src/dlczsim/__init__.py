"""dlczsim - decoherence of photon pairs from inhomogeneously broadened atomic ensembles."""

__version__ = "0.1.0"
