"""Deterministic simulator for delay-tolerant MANET routing protocols."""

from .engine import PROTOCOLS, Scenario, run

__all__ = ["PROTOCOLS", "Scenario", "run"]
