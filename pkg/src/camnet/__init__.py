"""Spectral networks, unipotent scattering and nonabelianization for complex Lie groups."""

__version__ = "0.1.0"
SCHEMA = "camnet/1"
