"""Detect charge start/end events in furnace sensor streams with a small 1D-CNN."""

__version__ = "0.1.0"
