"""Fidelity-preserving quantum encoding: a from-scratch autodiff, autoencoder,
statevector simulator and benchmark harness."""

__version__ = "0.1.0"
