"""Sidescan-sonar ATR workbench: simulated world, online fine-tuning, data mining."""

__version__ = "0.1.0"
