"""Simulator for noise-resilient interactive coding over multiparty networks."""

from .engine import Engine, RunReport, run_simulation
from .scheme import SchemeVariant, make_variant

__all__ = ["Engine", "RunReport", "SchemeVariant", "make_variant", "run_simulation"]
__version__ = "0.1.0"
