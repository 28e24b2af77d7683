"""Transformer S-parameter surrogates with frequency sub-band self-transfer,
plus surrogate-driven impedance-matching inverse design."""

__version__ = "0.1.0"
