"""Sampled complex functions on a metric tree.

A GraphFunction stores per-edge sample grids and values; between samples the
function is the piecewise-linear interpolant and outside the sampled window it
is zero.  Norms use trapezoid quadrature on the samples.  Exponential moments
of the interpolant (the building block of every resolvent formula here) are
closed-form per cell, with series guards against cancellation at small
exponents.
"""

from __future__ import annotations

from typing import Dict, Iterable, Tuple

import numpy as np

from .errors import GridMismatch, OutOfRangeCoordinate, SchemaError
from .graph import MetricTree


def _cexpm1(z: np.ndarray) -> np.ndarray:
    """exp(z) - 1 for complex z, stable near zero."""
    z = np.asarray(z, dtype=complex)
    out = np.exp(z) - 1.0
    small = np.abs(z) < 1e-4
    if np.any(small):
        zs = z[small]
        out[small] = zs * (1.0 + zs / 2.0 * (1.0 + zs / 3.0 * (1.0 + zs / 4.0)))
    return out


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with phi1(0) = 1."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < 1e-6
    out[~small] = _cexpm1(z[~small]) / z[~small]
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """integral_0^1 v e^{zv} dv = (e^z (z-1) + 1)/z^2 with phi2(0) = 1/2."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < 1e-4
    zb = z[~small]
    out[~small] = ((zb - 1.0) * _cexpm1(zb) + zb) / (zb * zb)
    zs = z[small]
    out[small] = 0.5 + zs / 3.0 + zs * zs / 8.0 + zs ** 3 / 30.0
    return out


def cell_exp_moment(x0, x1, f0, f1, zeta) -> complex:
    """Exact integral of the linear interpolant (f0 at x0, f1 at x1) against
    e^{zeta y} over [x0, x1].  Vectorised over cells."""
    x0 = np.asarray(x0, dtype=float)
    h = np.asarray(x1, dtype=float) - x0
    f0 = np.asarray(f0, dtype=complex)
    f1 = np.asarray(f1, dtype=complex)
    z = zeta * h
    vals = np.exp(zeta * x0) * h * (f0 * _phi1(z) + (f1 - f0) * _phi2(z))
    return vals


class GraphFunction:
    """Per-edge sampled complex function, zero outside the sampled support."""

    def __init__(self, data: Dict[str, Tuple[np.ndarray, np.ndarray]]):
        self.data: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
        for edge_id, (x, v) in data.items():
            x = np.asarray(x, dtype=float)
            v = np.asarray(v, dtype=complex)
            if x.ndim != 1 or x.shape != v.shape:
                raise SchemaError(f"edge {edge_id}: grid/value shape mismatch")
            if x.size and np.any(np.diff(x) <= 0):
                raise SchemaError(f"edge {edge_id}: grid not strictly increasing")
            if x.size:
                self.data[edge_id] = (x, v)

    # ---------------------------------------------------------------- builders
    @classmethod
    def zero(cls) -> "GraphFunction":
        return cls({})

    @classmethod
    def from_callable(cls, grids: Dict[str, np.ndarray], fn) -> "GraphFunction":
        return cls({e: (x, np.asarray([fn(e, xi) for xi in x], dtype=complex))
                    for e, x in grids.items()})

    @classmethod
    def bump(cls, edge_id: str, center: float, width: float = 1.0,
             half_support: float = 5.0, h: float = 0.005) -> "GraphFunction":
        """Gaussian bump exp(-((x-center)/width)^2) sampled on
        [center - half_support*width, center + half_support*width]."""
        lo = center - half_support * width
        hi = center + half_support * width
        n = max(3, int(round((hi - lo) / h)) + 1)
        x = np.linspace(lo, hi, n)
        v = np.exp(-(((x - center) / width) ** 2)).astype(complex)
        return cls({edge_id: (x, v)})

    def copy(self) -> "GraphFunction":
        return GraphFunction({e: (x.copy(), v.copy()) for e, (x, v) in self.data.items()})

    # ---------------------------------------------------------------- queries
    def edges(self) -> Iterable[str]:
        return self.data.keys()

    def grid(self, edge_id: str) -> np.ndarray:
        return self.data[edge_id][0]

    def values(self, edge_id: str) -> np.ndarray:
        return self.data[edge_id][1]

    def __call__(self, edge_id: str, x) -> np.ndarray:
        """Piecewise-linear evaluation, zero outside the sampled window."""
        x = np.asarray(x, dtype=float)
        if edge_id not in self.data:
            return np.zeros(x.shape, dtype=complex)
        xs, vs = self.data[edge_id]
        out = (np.interp(x, xs, vs.real, left=0.0, right=0.0)
               + 1j * np.interp(x, xs, vs.imag, left=0.0, right=0.0))
        return out

    def l1(self) -> float:
        total = 0.0
        for x, v in self.data.values():
            total += float(np.trapezoid(np.abs(v), x))
        return total

    def l2(self) -> float:
        total = 0.0
        for x, v in self.data.values():
            total += float(np.trapezoid(np.abs(v) ** 2, x))
        return float(np.sqrt(total))

    def linf(self) -> float:
        vals = [float(np.max(np.abs(v))) for _, v in self.data.values() if v.size]
        return max(vals) if vals else 0.0

    def inner(self, other: "GraphFunction") -> complex:
        """L^2 pairing <self, other> = sum_e int self * conj(other); the grids
        must coincide edgewise."""
        total = 0.0 + 0.0j
        for e in set(self.data) | set(other.data):
            if e not in self.data or e not in other.data:
                continue
            xa, va = self.data[e]
            xb, vb = other.data[e]
            if xa.shape != xb.shape or not np.allclose(xa, xb):
                raise GridMismatch(f"edge {e}: grids differ")
            total += complex(np.trapezoid(va * np.conj(vb), xa))
        return total

    # ---------------------------------------------------------------- moments
    def window(self, edge_id: str, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
        """Sample grid clipped to [lo, hi] (hi may be inf), with interpolated
        boundary samples so the support is represented exactly."""
        if edge_id not in self.data:
            return np.empty(0), np.empty(0, dtype=complex)
        x, v = self.data[edge_id]
        finite_hi = min(hi, x[-1])
        lo = max(lo, x[0])
        if finite_hi <= lo:
            return np.empty(0), np.empty(0, dtype=complex)
        inside = (x > lo) & (x < finite_hi)
        xs = np.concatenate(([lo], x[inside], [finite_hi]))
        vals = self(edge_id, xs)
        return xs, vals

    def segment_moment(self, edge_id: str, lo: float, hi: float, zeta: complex) -> complex:
        """Exact integral of the interpolant against e^{zeta y} over
        [lo, hi] intersected with the sampled support."""
        xs, vs = self.window(edge_id, lo, hi)
        if xs.size < 2:
            return 0.0 + 0.0j
        return complex(np.sum(cell_exp_moment(xs[:-1], xs[1:], vs[:-1], vs[1:], zeta)))


def load_rows(rows) -> GraphFunction:
    """Build a GraphFunction from (edge, x, re, im) records."""
    per_edge: Dict[str, list] = {}
    for rec in rows:
        edge, x, re, im = rec
        per_edge.setdefault(str(edge), []).append((float(x), float(re) + 1j * float(im)))
    data = {}
    for edge, pts in per_edge.items():
        xs = np.array([p[0] for p in pts])
        vs = np.array([p[1] for p in pts], dtype=complex)
        if np.unique(xs).size != xs.size:
            raise SchemaError(f"edge {edge}: duplicate sample coordinate")
        order = np.argsort(xs)
        data[edge] = (xs[order], vs[order])
    return GraphFunction(data)


def check_in_range(fn: GraphFunction, tree: MetricTree) -> None:
    for edge_id, (x, _) in fn.data.items():
        e = tree.edge(edge_id)
        if x[0] < 0:
            raise OutOfRangeCoordinate(f"edge {edge_id}: x={x[0]} < 0")
        if not e.infinite and x[-1] > e.length + 1e-12:
            raise OutOfRangeCoordinate(f"edge {edge_id}: x={x[-1]} beyond length {e.length}")
