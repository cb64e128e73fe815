"""Demand-driven water network hydraulics with null-space Newton solvers."""

from wdnsolve.errors import MaxIterations, WdnError
from wdnsolve.network import DemandScenario, FixedHead, HeadlossModel, Junction, Network, Pipe, load_network
from wdnsolve.nullbasis import NullBasis, build_fundamental_basis, diagnostics
from wdnsolve.solvers import Method, Precomputed, SolverConfig, SolverResult, precompute, solve

__all__ = [
    "MaxIterations", "WdnError", "DemandScenario", "FixedHead", "HeadlossModel", "Junction",
    "Network", "Pipe", "load_network", "NullBasis", "build_fundamental_basis", "diagnostics",
    "Method", "Precomputed", "SolverConfig", "SolverResult", "precompute", "solve",
]
__version__ = "0.1.0"
