"""Firmware up-to-dateness analysis for internet-scan banner datasets."""

__version__ = "0.1.0"
