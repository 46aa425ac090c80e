"""Photon- and electron-number statistics for multiphoton emission."""

__version__ = "0.1.0"
