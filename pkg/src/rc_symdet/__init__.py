"""Reservoir-computing MIMO-OFDM symbol detectors and a link-level simulator."""

__version__ = "0.1.0"
