"""Soundness evaluation of data-leak detectors through tagged leak mutants."""

__version__ = "0.1.0"
