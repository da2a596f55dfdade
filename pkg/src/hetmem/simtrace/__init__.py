"""Trace generation, hierarchy simulation and static-vs-simulated checks."""

from .check import Discrepancy, cross_check
from .hierarchy import HierarchySimulator, ModuleStats, SimStats, VariableStats, simulate
from .trace import Layout, TraceRecord, dump_trace, generate_trace, layout_variables, load_trace

__all__ = [
    "Discrepancy",
    "HierarchySimulator",
    "Layout",
    "ModuleStats",
    "SimStats",
    "TraceRecord",
    "VariableStats",
    "cross_check",
    "dump_trace",
    "generate_trace",
    "layout_variables",
    "load_trace",
    "simulate",
]
