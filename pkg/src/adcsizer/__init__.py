"""Automated SAR ADC sizing from high-level specifications."""

__version__ = "0.1.0"
