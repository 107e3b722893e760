"""Crank-Nicolson finite-difference oracle on the truncated tree, plus the
closed-form references (free-line Gaussian evolution, one-vertex star kernel)
used to cross-validate the path-sum propagator.

The spatial operator is the variational (lumped P1) discretisation of
d/dx (sigma d/dx) with vertex values shared across incident edges and
homogeneous Dirichlet at the truncation tips, so one Crank-Nicolson step is a
Cayley map: the weighted discrete L^2 norm is conserved to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, TruncationTooShort, ZeroTime
from .functions import GraphFunction
from .graph import MetricTree


@dataclass
class TruncatedGrid:
    """Shared-vertex node layout; rays cut at length L with a Dirichlet tip."""
    tree: MetricTree
    h: float
    L: float
    coords: Dict[str, np.ndarray]          # per-edge node coordinates
    index: Dict[str, np.ndarray]           # per-edge global node indices (-1 = Dirichlet tip)
    n: int                                 # number of unknowns
    mass: np.ndarray                       # lumped mass per unknown

    @classmethod
    def build(cls, tree: MetricTree, h: float, L: float) -> "TruncatedGrid":
        coords: Dict[str, np.ndarray] = {}
        index: Dict[str, np.ndarray] = {}
        vidx = {v: i for i, v in enumerate(tree.vertices)}
        counter = len(tree.vertices)
        for e in tree.edges:
            length = e.length if not e.infinite else L
            cuts = sorted({a for a, _ in e.profile} | {0.0, length})
            cuts = [c for c in cuts if c <= length]
            xs = [np.array([0.0])]
            for lo, hi in zip(cuts, cuts[1:]):
                n = max(1, int(round((hi - lo) / h)))
                xs.append(np.linspace(lo, hi, n + 1)[1:])
            x = np.concatenate(xs)
            idx = np.empty(len(x), dtype=int)
            idx[0] = vidx[e.src]
            inner = len(x) - 2
            idx[1:1 + inner] = np.arange(counter, counter + inner)
            counter += inner
            idx[-1] = -1 if e.infinite else vidx[e.dst]  # tip is Dirichlet
            coords[e.id] = x
            index[e.id] = idx
        mass = np.zeros(counter)
        for e in tree.edges:
            x, idx = coords[e.id], index[e.id]
            dx = np.diff(x)
            w = np.zeros(len(x))
            w[:-1] += dx / 2.0
            w[1:] += dx / 2.0
            keep = idx >= 0
            np.add.at(mass, idx[keep], w[keep])
        return cls(tree, h, L, coords, index, counter, mass)

    def stiffness(self) -> sp.csc_matrix:
        """K with quadratic form sum_cells sigma |u_{k+1} - u_k|^2 / dx."""
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for e in self.tree.edges:
            x, idx = self.coords[e.id], self.index[e.id]
            mid = (x[:-1] + x[1:]) / 2.0
            sig = np.array([e.sigma_at(m) for m in mid])
            w = sig / np.diff(x)
            for k in range(len(x) - 1):
                i, j = idx[k], idx[k + 1]
                for a, b, v in ((i, i, w[k]), (j, j, w[k]), (i, j, -w[k]), (j, i, -w[k])):
                    if a >= 0 and b >= 0:
                        rows.append(a)
                        cols.append(b)
                        vals.append(v)
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def sample(self, f: GraphFunction) -> np.ndarray:
        out = np.zeros(self.n, dtype=complex)
        for e in self.tree.edges:
            idx = self.index[e.id]
            vals = f(e.id, self.coords[e.id])
            keep = idx >= 0
            out[idx[keep]] = vals[keep]
        return out

    def to_function(self, u: np.ndarray) -> GraphFunction:
        data = {}
        for e in self.tree.edges:
            idx = self.index[e.id]
            vals = np.where(idx >= 0, u[np.maximum(idx, 0)], 0.0)
            data[e.id] = (self.coords[e.id], vals.astype(complex))
        return GraphFunction(data)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.real(np.vdot(u, self.mass * u))))

    def boundary_mass_fraction(self, u: np.ndarray, width: float) -> float:
        """Weighted mass within `width` of a truncation tip, as a fraction."""
        total = np.real(np.vdot(u, self.mass * u))
        if total == 0:
            return 0.0
        frac = 0.0
        for e in self.tree.edges:
            if not e.infinite:
                continue
            x, idx = self.coords[e.id], self.index[e.id]
            sel = (x > self.L - width) & (idx >= 0)
            w = np.zeros(len(x))
            dx = np.diff(x)
            w[:-1] += dx / 2.0
            w[1:] += dx / 2.0
            frac += float(np.sum(w[sel] * np.abs(u[idx[sel]]) ** 2))
        return frac / float(total)


class CrankNicolson:
    """Factorised one-step map (M + i dt/2 K) u+ = (M - i dt/2 K) u."""

    def __init__(self, grid: TruncatedGrid, dt: float):
        self.grid = grid
        self.dt = dt
        K = grid.stiffness()
        M = sp.diags(grid.mass)
        theta = 0.5j * dt
        self._solve = spla.splu((M + theta * K).tocsc())
        self._rhs = (M - theta * K).tocsr()

    def step(self, u: np.ndarray) -> np.ndarray:
        return self._solve.solve(self._rhs @ u)


def cn_evolve(tree: MetricTree, u0: GraphFunction, T: float, dt: float,
              h: float, L: float, warn_fraction: float = 1e-6,
              fail_fraction: float = 1e-3,
              grid: Optional[TruncatedGrid] = None) -> GraphFunction:
    """Crank-Nicolson evolution to time T on the truncated graph."""
    if dt <= 0 or h <= 0:
        raise ValueError("dt and h must be positive")
    grid = grid or TruncatedGrid.build(tree, h, L)
    u = grid.sample(u0)
    stepper = CrankNicolson(grid, dt)
    nsteps = int(round(T / dt))
    sigma_max = max(s for e in tree.edges for _, s in e.profile)
    width = 4.0 * np.sqrt(sigma_max * max(T, dt))
    for _ in range(nsteps):
        u = stepper.step(u)
    frac = grid.boundary_mass_fraction(u, width)
    if frac > fail_fraction:
        raise TruncationTooShort(
            f"{frac:.2e} of the mass sits within {width:.3g} of a truncation tip")
    if frac > warn_fraction:
        import warnings

        warnings.warn(f"truncation boundary mass fraction {frac:.2e}",
                      RuntimeWarning, stacklevel=2)
    return grid.to_function(u)


# --------------------------------------------------------------------------- closed forms


def free_kernel(t: float, r: float) -> complex:
    """(4 pi i t)^{-1/2} e^{i r^2 / 4t}."""
    if t == 0:
        raise ZeroTime("t = 0")
    return (4j * np.pi * t) ** -0.5 * np.exp(1j * r * r / (4.0 * t))


def star_kernel(m: int, t: float, edge_x: int, x: float,
                edge_y: int, y: float) -> complex:
    """Propagator of the m-ray constant-coefficient star: direct plus image
    charge with the vertex reflection 2/m - 1, transmission 2/m."""
    if t == 0:
        raise ZeroTime("t = 0")
    if edge_x == edge_y:
        return free_kernel(t, x - y) + (2.0 / m - 1.0) * free_kernel(t, x + y)
    return (2.0 / m) * free_kernel(t, x + y)


def free_gaussian(x: np.ndarray, t: float, center: float = 0.0,
                  a: float = 1.0) -> np.ndarray:
    """e^{it Laplacian} applied to exp(-a (x-center)^2) on the line."""
    g = 1.0 + 4j * a * t
    return np.exp(-a * (np.asarray(x) - center) ** 2 / g) / np.sqrt(g)


def compare(a: GraphFunction, b: GraphFunction) -> Dict[str, object]:
    """Error report between two functions sampled on identical grids."""
    l2 = 0.0
    linf = 0.0
    npts = 0
    for e in sorted(set(a.data) | set(b.data)):
        if e not in a.data or e not in b.data:
            raise GridMismatch(f"edge {e} present in only one function")
        xa, va = a.data[e]
        xb, vb = b.data[e]
        if xa.shape != xb.shape or not np.allclose(xa, xb):
            raise GridMismatch(f"edge {e}: grids differ")
        d = np.abs(va - vb)
        l2 += float(np.trapezoid(d * d, xa))
        linf = max(linf, float(d.max()))
        npts += len(xa)
    return {"l2_err": float(np.sqrt(l2)), "linf_err": linf,
            "grid": {"points": npts, "edges": sorted(a.data)}}
