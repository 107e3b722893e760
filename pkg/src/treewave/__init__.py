"""Schrodinger evolution on metric trees with Kirchhoff vertex conditions."""

__version__ = "0.1.0"

from .exppoly import ExpPoly, geom_inverse
from .functions import GraphFunction
from .graph import (Edge, MetricTree, ReductionStep, build_tree,
                    find_reducible_vertex, parse_tree, reduce_tree,
                    serialize_tree)
from .kernels import KernelExpansion, KernelTerm, kernel_terms, propagate, time_integral
from .resolvent import (assemble, det_direct, det_recursive, particular_solution,
                        solve_resolvent, strip_scan)

__all__ = [
    "Edge", "ExpPoly", "GraphFunction", "KernelExpansion", "KernelTerm",
    "MetricTree", "ReductionStep", "assemble", "build_tree", "det_direct",
    "det_recursive", "find_reducible_vertex", "geom_inverse", "kernel_terms",
    "parse_tree", "particular_solution", "propagate", "reduce_tree",
    "serialize_tree", "solve_resolvent", "strip_scan", "time_integral",
]
