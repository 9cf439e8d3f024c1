"""Deterministic simulation lab for fountain-coded task offloading with an
adaptive collector protocol, baseline schedulers, and closed-form checks."""

__version__ = "0.1.0"
