"""Kirchhoff coupling system of the resolvent (-d/dx sigma d/dx + w^2)^{-1}
on a metric tree: dense assembly and solve, direct LU determinant, the
recursive determinant pair built on the segment network, and the tau-axis
scans certifying the lower bound c_Gamma and ratio r_Gamma.

Conventions: on a segment of slowness b the solution is
c e^{w b x} + ct e^{-w b x} + b * P[f](x) with P the literal particular
integral (1/2w) int f e^{-w b |x-y|} dy; derivative rows are divided by w so
every matrix entry is a constant times a real power of e^w.  Rays carry only
the decaying slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BoundViolated, SingularSystem, ZeroFrequency
from .exppoly import ExpPoly
from .functions import GraphFunction
from .graph import MetricTree
from .network import SegmentNetwork, Segment, SegKey, TreeStates

Slot = Tuple[SegKey, int]  # (+1: growing exponent, -1: decaying exponent)


# --------------------------------------------------------------------------- particular part


def particular_solution(f: GraphFunction, edge_id: str, lo: float, hi: float,
                        b: float, omega: complex, x: float) -> complex:
    """(1/2w) int_seg f(y) e^{-w b |x-y|} dy for the piecewise-linear
    interpolant of f, exact per cell.  Note the resolvent's particular part
    on a sigma = 1/b^2 segment is b times this integral."""
    if omega == 0:
        raise ZeroFrequency("omega = 0 is excluded; the propagator handles it")
    wb = omega * b
    below = f.segment_moment(edge_id, lo, min(hi, x), +wb) if x > lo else 0.0
    above = f.segment_moment(edge_id, max(lo, x), hi, -wb) if x < hi else 0.0
    return (np.exp(-wb * x) * below + np.exp(wb * x) * above) / (2.0 * omega)


def _segment_moments(f: GraphFunction, seg: Segment, omega: complex) -> Tuple[complex, complex]:
    """(M_plus, M_minus) = int_seg f e^{+- w b y} dy."""
    hi = seg.x_hi if seg.x_hi is not None else float("inf")
    wb = omega * seg.b
    return (f.segment_moment(seg.edge_id, seg.x_lo, hi, +wb),
            f.segment_moment(seg.edge_id, seg.x_lo, hi, -wb))


def _particular_endpoint(seg: Segment, omega: complex, mp: complex, mm: complex,
                         end: str) -> Tuple[complex, complex]:
    """(u_p, sigma u_p' / w) of the resolvent particular part at an endpoint;
    u_p carries the Green's-function factor b, the weighted flux does not."""
    b = seg.b
    if end == "lo":
        e = np.exp(omega * b * seg.x_lo)
        return b * e * mm / (2 * omega), e * mm / (2 * omega)
    e = np.exp(-omega * b * seg.x_hi)
    return b * e * mp / (2 * omega), -e * mp / (2 * omega)


# --------------------------------------------------------------------------- assembly


@dataclass
class CouplingSystem:
    ordering: List[Slot]
    matrix: np.ndarray
    rhs: np.ndarray
    omega: complex
    net: SegmentNetwork


def _slots(net: SegmentNetwork) -> List[Slot]:
    slots: List[Slot] = []
    for key in net.seg_order:
        if not net.segments[key].infinite:
            slots.append((key, +1))
        slots.append((key, -1))
    return slots


def assemble(tree: MetricTree, omega: complex,
             f: Optional[GraphFunction] = None) -> CouplingSystem:
    """Continuity and sigma-weighted flux rows for every node (vertices and
    profile interfaces), in canonical depth-first order."""
    if omega == 0:
        raise ZeroFrequency("omega = 0 is excluded")
    net = SegmentNetwork(tree)
    f = f or GraphFunction.zero()
    slots = _slots(net)
    col = {s: i for i, s in enumerate(slots)}
    n = len(slots)
    A = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)

    moments = {key: _segment_moments(f, seg, omega) for key, seg in net.segments.items()}

    def port_entries(key: SegKey, end: str):
        """((value, flux) matrix entries per slot, (u_p, sigma u_p'/w))."""
        seg = net.segments[key]
        b = seg.b
        x = seg.x_lo if end == "lo" else seg.x_hi
        ep, em = np.exp(omega * b * x), np.exp(-omega * b * x)
        sgn = -1.0 if end == "lo" else 1.0  # flux convention: T(e)-side minus I(e)-side
        entries = {}
        if (key, +1) in col:
            entries[(key, +1)] = (ep, sgn * ep / b)
        entries[(key, -1)] = (em, -sgn * em / b)
        up, fp = _particular_endpoint(seg, omega, *moments[key], end)
        return entries, (up, sgn * fp)

    row = 0
    for nid in net.node_order:
        node = net.nodes[nid]
        ports = [(k, "hi") for k in node.hi_ports] + [(k, "lo") for k in node.lo_ports]
        datas = [port_entries(k, end) for k, end in ports]
        for (ent_a, part_a), (ent_b, part_b) in zip(datas, datas[1:]):
            for slot, (val, _) in ent_a.items():
                A[row, col[slot]] += val
            for slot, (val, _) in ent_b.items():
                A[row, col[slot]] -= val
            rhs[row] = part_b[0] - part_a[0]
            row += 1
        for ent, part in datas:
            for slot, (_, flux) in ent.items():
                A[row, col[slot]] += flux
            rhs[row] -= part[1]
        row += 1
    assert row == n, f"system rows {row} != unknowns {n}"
    return CouplingSystem(slots, A, rhs, omega, net)


def det_direct(tree: MetricTree, omega: complex) -> complex:
    """LU determinant of the assembled coupling matrix."""
    return complex(np.linalg.det(assemble(tree, omega).matrix))


COND_LIMIT = 1e12


def solve_resolvent(tree: MetricTree, omega: complex, f: GraphFunction) -> GraphFunction:
    """R_w f sampled on f's grids extended to every edge of the tree."""
    sys_ = assemble(tree, omega, f)
    if np.linalg.cond(sys_.matrix) > COND_LIMIT:
        raise SingularSystem(f"coupling matrix condition number above {COND_LIMIT:g}")
    coef = np.linalg.solve(sys_.matrix, sys_.rhs)
    co = {s: coef[i] for i, s in enumerate(sys_.ordering)}
    net = sys_.net
    out: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for e in tree.edges:
        if e.id in f.data:
            x = f.grid(e.id)
        else:
            L = e.length if not e.infinite else 10.0
            x = np.linspace(0.0, L, max(3, int(round(L / 0.05)) + 1))
        vals = resolvent_values(net, co, f, omega, e.id, x)
        out[e.id] = (x, vals)
    return GraphFunction(out)


def resolvent_values(net: SegmentNetwork, co: Dict[Slot, complex], f: GraphFunction,
                     omega: complex, edge_id: str, x: np.ndarray) -> np.ndarray:
    vals = np.zeros(len(x), dtype=complex)
    for seg in net.segments_of_edge(edge_id):
        hi = seg.x_hi if seg.x_hi is not None else float("inf")
        mask = (x >= seg.x_lo - 1e-15) & (x <= hi + 1e-15)
        if not np.any(mask):
            continue
        xs = x[mask]
        c = co.get((seg.key, +1), 0.0)
        ct = co.get((seg.key, -1), 0.0)
        hom = c * np.exp(omega * seg.b * xs) + ct * np.exp(-omega * seg.b * xs)
        part = np.array([seg.b * particular_solution(f, edge_id, seg.x_lo, hi,
                                                     seg.b, omega, xi) for xi in xs])
        vals[mask] = hom + part
    return vals


def resolvent_derivative(net: SegmentNetwork, co: Dict[Slot, complex], f: GraphFunction,
                         omega: complex, edge_id: str, x: float) -> complex:
    """d/dx of the solved resolvent at a point (used by the Kirchhoff checks)."""
    for seg in net.segments_of_edge(edge_id):
        hi = seg.x_hi if seg.x_hi is not None else float("inf")
        if not (seg.x_lo - 1e-15 <= x <= hi + 1e-15):
            continue
        b = seg.b
        c = co.get((seg.key, +1), 0.0)
        ct = co.get((seg.key, -1), 0.0)
        hom = omega * b * (c * np.exp(omega * b * x) - ct * np.exp(-omega * b * x))
        wb = omega * b
        below = f.segment_moment(edge_id, seg.x_lo, min(hi, x), +wb) if x > seg.x_lo else 0.0
        above = f.segment_moment(edge_id, max(seg.x_lo, x), hi, -wb) if x < hi else 0.0
        dpart = -(b * b / 2.0) * (np.exp(-wb * x) * below - np.exp(wb * x) * above)
        return complex(hom + dpart)
    raise ValueError(f"x={x} outside edge {edge_id}")


# --------------------------------------------------------------------------- recursive determinant


@dataclass
class DetPair:
    det: ExpPoly
    det_tilde: ExpPoly
    ratio_bound: float
    lower_bound: float


def det_recursive(tree: MetricTree, tau_max: float = 50.0, samples: int = 4001) -> DetPair:
    """Determinant pair from the vertex-removal / interface-removal recursion
    run over the segment network, with scan-certified bounds."""
    net = SegmentNetwork(tree)
    det = TreeStates(net, with_sources=False).det
    det_t = TreeStates(net, tilde_seg=net.distinguished_segment(),
                       with_sources=False).det
    c_min, r_max = _scan_bounds(det, det_t, tau_max, samples)
    if not (c_min > 0.0) or not (r_max < 1.0):
        raise BoundViolated(f"c_min={c_min:.3g}, r_max={r_max:.3g}")
    return DetPair(det, det_t, r_max, c_min)


def _scan_bounds(det: ExpPoly, det_t: ExpPoly, tau_max: float,
                 samples: int) -> Tuple[float, float]:
    taus = np.linspace(-tau_max, tau_max, samples)
    taus = taus[np.abs(taus) > 1e-9]
    dv = np.abs(det.evaluate_many(1j * taus))
    rv = np.abs(det_t.evaluate_many(1j * taus)) / dv
    c_min, c_arg = float(dv.min()), taus[int(dv.argmin())]
    r_max, r_arg = float(rv.max()), taus[int(rv.argmax())]
    # polish the extrema so lattice minima (e.g. tau a = k pi) are hit exactly
    step = taus[1] - taus[0]

    def absdet(t: float) -> float:
        return abs(det.evaluate(1j * t))

    def negratio(t: float) -> float:
        return -abs(det_t.evaluate(1j * t)) / abs(det.evaluate(1j * t))

    for fun, arg, best, keep in ((absdet, c_arg, c_min, "min"),
                                 (negratio, r_arg, -r_max, "max")):
        res = minimize_scalar(fun, bounds=(arg - step, arg + step), method="bounded",
                              options={"xatol": 1e-12})
        val = min(best, float(res.fun))
        if keep == "min":
            c_min = val
        else:
            r_max = -val
    return c_min, r_max


def strip_scan(tree: MetricTree, tau_max: float, samples: int) -> Tuple[float, float]:
    """(c_min, r_max) over tau in [-tau_max, tau_max] minus 0; BoundViolated
    if the proposition's bounds fail (which signals an implementation bug)."""
    if samples < 1000:
        raise ValueError("samples must be at least 10^3")
    net = SegmentNetwork(tree)
    det = TreeStates(net, with_sources=False).det
    det_t = TreeStates(net, tilde_seg=net.distinguished_segment(), with_sources=False).det
    c_min, r_max = _scan_bounds(det, det_t, tau_max, samples)
    if not (c_min > 0.0) or not (r_max < 1.0):
        raise BoundViolated(f"c_min={c_min:.3g}, r_max={r_max:.3g}")
    return c_min, r_max


def strip_scan_table(tree: MetricTree, tau_max: float, samples: int) -> np.ndarray:
    """Rows (tau, |det|, |det~/det|) for the CLI det-scan command."""
    net = SegmentNetwork(tree)
    det = TreeStates(net, with_sources=False).det
    det_t = TreeStates(net, tilde_seg=net.distinguished_segment(), with_sources=False).det
    taus = np.linspace(-tau_max, tau_max, samples)
    taus = taus[np.abs(taus) > 1e-9]
    dv = det.evaluate_many(1j * taus)
    tv = det_t.evaluate_many(1j * taus)
    return np.column_stack([taus, np.abs(dv), np.abs(tv) / np.abs(dv)])


# --------------------------------------------------------------------------- scattering matrices


def vertex_scattering_matrix(bs: List[float]) -> np.ndarray:
    """Amplitude map out = S in at a node joining slownesses bs: the
    sigma-weighted Kirchhoff solve gives S = 2 P - I with P the rank-one
    projection weighted by 1/b."""
    inv_b = np.array([1.0 / b for b in bs])
    Z = inv_b.sum()
    S = 2.0 * np.outer(np.ones(len(bs)), inv_b) / Z - np.eye(len(bs))
    return S


def interface_scattering_matrix(b_left: float, b_right: float) -> np.ndarray:
    return vertex_scattering_matrix([b_left, b_right])
