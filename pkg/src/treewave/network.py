"""Segment network of a metric tree and the two-pass elimination that powers
the recursive determinant and the kernel expansion.

Every edge is cut at its profile breakpoints into segments of constant
coefficient sigma = 1/b^2.  Coupling conditions live at nodes: tree vertices
(continuity + sigma-weighted flux) and interface nodes at breakpoints (the
degree-2 case of the same conditions).  On a segment the resolvent reads

    u(x) = c e^{w b x} + ct e^{-w b x} + (b / 2w) int f(y) e^{-w b |x-y|} dy.

For the subtree hanging below a segment, eliminating all conditions there
leaves one linear relation  A c - B ct = H  between the segment's two
coefficients, with A, B exponential polynomials in w and H a combination of
data moments M^{+-} = int f e^{+-w b y} dy.  The upward pass computes
(A, B, H) leaf-to-root; the mirrored downward pass computes the relation
(At, Bt, Ht) imposed by everything above.  Per segment the 2x2 solve then
gives Cramer numerators over the common denominator det D_Gamma, and the
root elimination gives det D_Gamma itself: the star and vertex-removal
recursions are exactly the zero-child and one-child instances of the node
rule used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .exppoly import ExpPoly
from .graph import MetricTree

SegKey = Tuple[str, int]          # (edge id, segment index)
SrcKey = Tuple[SegKey, int]       # (segment, +1/-1) labelling moment M^{+-}


@dataclass(frozen=True)
class Segment:
    edge_id: str
    index: int
    b: float                      # slowness sigma^{-1/2}
    sigma: float
    x_lo: float
    x_hi: Optional[float]         # None on the outermost segment of a ray

    @property
    def key(self) -> SegKey:
        return (self.edge_id, self.index)

    @property
    def infinite(self) -> bool:
        return self.x_hi is None


@dataclass
class Node:
    """Coupling point: a tree vertex or a profile-interface point."""
    id: str
    kind: str                                 # "vertex" | "interface"
    lo_ports: List[SegKey] = field(default_factory=list)  # segments starting here
    hi_ports: List[SegKey] = field(default_factory=list)  # segments ending here


class SegmentNetwork:
    """Canonical segment decomposition with root-first depth-first ordering."""

    def __init__(self, tree: MetricTree):
        self.tree = tree
        self.segments: Dict[SegKey, Segment] = {}
        self.nodes: Dict[str, Node] = {v: Node(v, "vertex") for v in tree.vertices}
        self.seg_order: List[SegKey] = []
        edge_rank = {e.id: i for i, e in enumerate(tree.edges)}

        for e in tree.edges:
            ats = [a for a, _ in e.profile]
            sigs = [s for _, s in e.profile]
            cuts = ats + ([e.length] if not e.infinite else [None])
            prev_node = e.src
            for k, sig in enumerate(sigs):
                lo = cuts[k]
                hi = cuts[k + 1]
                seg = Segment(e.id, k, sig ** -0.5, sig, lo, hi)
                self.segments[seg.key] = seg
                self.nodes[prev_node].lo_ports.append(seg.key)
                if hi is None:
                    pass
                elif k == len(sigs) - 1 and not e.infinite:
                    self.nodes[e.dst].hi_ports.append(seg.key)
                else:
                    nid = f"{e.id}#{k + 1}"
                    self.nodes[nid] = Node(nid, "interface")
                    self.nodes[nid].hi_ports.append(seg.key)
                    prev_node = nid

        # canonical DFS order over segments from the root
        root = tree.root
        order: List[SegKey] = []
        seen_nodes = set()

        def node_children(nid: str) -> List[SegKey]:
            ports = self.nodes[nid].lo_ports
            return sorted(ports, key=lambda k: (edge_rank[k[0]], k[1]))

        def walk(nid: str) -> None:
            if nid in seen_nodes:
                return
            seen_nodes.add(nid)
            for key in node_children(nid):
                order.append(key)
                far = self.far_node(key)
                if far is not None:
                    walk(far)

        walk(root)
        self.seg_order = order
        self.node_order = [root] + [n for n in
                                    (self.far_node(k) for k in order) if n is not None]

    # ------------------------------------------------------------------ helpers
    def far_node(self, key: SegKey) -> Optional[str]:
        for nid, node in self.nodes.items():
            if key in node.hi_ports:
                return nid
        return None

    def near_node(self, key: SegKey) -> str:
        for nid, node in self.nodes.items():
            if key in node.lo_ports:
                return nid
        raise KeyError(key)

    def segments_of_edge(self, edge_id: str) -> List[Segment]:
        return [self.segments[k] for k in self.seg_order if k[0] == edge_id]

    def distinguished_segment(self) -> SegKey:
        """Outermost segment of the last ray in declaration order (the edge
        whose decaying exponent the tilde determinant flips)."""
        rays = [e for e in self.tree.edges if e.infinite]
        if not rays:
            raise ValueError("tree has no infinite edge")
        e = rays[-1]
        segs = [k for k in self.segments if k[0] == e.id]
        return (e.id, max(idx for _, idx in segs))


class SourceMap:
    """Sparse map from (source segment, sign) to ExpPoly coefficients of the
    symbolic data moments M^{+-}_segment(w)."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Dict[SrcKey, ExpPoly]] = None):
        self.terms: Dict[SrcKey, ExpPoly] = terms or {}

    @classmethod
    def inject(cls, src: SrcKey, poly: ExpPoly) -> "SourceMap":
        return cls({src: poly})

    def __add__(self, other: "SourceMap") -> "SourceMap":
        out = dict(self.terms)
        for k, p in other.terms.items():
            out[k] = (out[k] + p) if k in out else p
        return SourceMap(out)

    def times(self, poly: ExpPoly) -> "SourceMap":
        return SourceMap({k: p * poly for k, p in self.terms.items()})

    def scaled(self, factor: complex) -> "SourceMap":
        return SourceMap({k: p.scaled(factor) for k, p in self.terms.items()})

    def abs_sum(self) -> float:
        return sum(p.abs_sum() for p in self.terms.values())

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.terms.values())


@dataclass
class State:
    """One-sided relation  A c - B ct = H/(2w)  on a segment (up states), or
    the mirrored  A ct - B c = H/(2w)  (down states)."""
    A: ExpPoly
    B: ExpPoly
    H: SourceMap


@dataclass
class Port:
    w: ExpPoly          # value factor of the branch at the node
    g: ExpPoly          # sigma-weighted flux factor (divided by w)
    h: SourceMap        # 2 H / b
    v_in: SourceMap     # particular-solution value injected at the node
    f_in: SourceMap     # particular-solution flux injected at the node


def _mono(freq: float) -> ExpPoly:
    return ExpPoly.monomial(freq, 1.0)


def _up_port(seg: Segment, state: State, with_sources: bool) -> Port:
    """Port data of a below-state seen at the segment's lo end."""
    p = seg.x_lo
    em = _mono(-seg.b * p)   # pairs with A (the slot decaying away from the node)
    ep = _mono(+seg.b * p)
    w = state.A * em + state.B * ep
    g = (state.A * em - state.B * ep).scaled(1.0 / seg.b)
    h = state.H.scaled(2.0 / seg.b)
    if with_sources:
        src: SrcKey = (seg.key, -1)
        v_in = SourceMap.inject(src, ep.scaled(seg.b))
        f_in = SourceMap.inject(src, ep)
    else:
        v_in = SourceMap()
        f_in = SourceMap()
    return Port(w, g, h, v_in, f_in)


def _down_port(seg: Segment, state: State, with_sources: bool) -> Port:
    """Port data of an above-state seen at the segment's hi end."""
    q = seg.x_hi
    ep = _mono(+seg.b * q)
    em = _mono(-seg.b * q)
    w = state.A * ep + state.B * em
    g = (state.A * ep - state.B * em).scaled(1.0 / seg.b)
    h = state.H.scaled(2.0 / seg.b)
    if with_sources:
        src: SrcKey = (seg.key, +1)
        v_in = SourceMap.inject(src, em.scaled(seg.b))
        f_in = SourceMap.inject(src, em)
    else:
        v_in = SourceMap()
        f_in = SourceMap()
    return Port(w, g, h, v_in, f_in)


def _eliminate(ports: List[Port]) -> Tuple[ExpPoly, ExpPoly, SourceMap, SourceMap]:
    """Fold the node conditions over the given ports.

    Returns (W, S, Hmix, Fsum) with W = prod w_j, S = sum g_j prod' w,
    Hmix = sum (h_j + v_j g_j) prod' w and Fsum = W sum f_j.
    """
    W = ExpPoly.one()
    for p in ports:
        W = W * p.w
    S = ExpPoly.zero()
    Hmix = SourceMap()
    for j, pj in enumerate(ports):
        prod = ExpPoly.one()
        for i, pi in enumerate(ports):
            if i != j:
                prod = prod * pi.w
        S = S + pj.g * prod
        Hmix = Hmix + (pj.h + pj.v_in.times(pj.g)).times(prod)
    Fsum = SourceMap()
    for p in ports:
        Fsum = Fsum + p.f_in
    return W, S, Hmix, Fsum.times(W)


def _out_state(seg: Segment, coord: float, out_sign: int,
               W: ExpPoly, S: ExpPoly, Hmix: SourceMap, Fsum: SourceMap,
               with_sources: bool) -> State:
    """Assemble the output relation on `seg` at `coord`.  out_sign +1 builds
    the upward state (node at the hi end), -1 the downward state (lo end)."""
    e_out = _mono(out_sign * seg.b * coord)
    e_in = _mono(-out_sign * seg.b * coord)
    Wb = W.scaled(1.0 / seg.b)
    A = e_out * (Wb + S)
    B = e_in * (Wb - S)
    H = Hmix + Fsum
    if with_sources:
        # the segment's own radiation at this node
        src: SrcKey = (seg.key, +1 if out_sign > 0 else -1)
        inj = e_in  # e^{-w b q} for up, e^{+w b p} for down
        H = H + SourceMap.inject(src, inj * (W - S.scaled(seg.b)))
        # v-term enters as -S * (b * inj), f-term as W * inj; combined above
    return State(A, B, H)


class TreeStates:
    """Upward and downward elimination states for every segment."""

    def __init__(self, net: SegmentNetwork, tilde_seg: Optional[SegKey] = None,
                 with_sources: bool = True):
        self.net = net
        self.with_sources = with_sources
        self.tilde_seg = tilde_seg
        self.up: Dict[SegKey, State] = {}
        self.down: Dict[SegKey, State] = {}
        self._run_up()
        self.det, self.det_rhs = self._root()
        if with_sources:
            self._run_down()

    # ------------------------------------------------------------------ passes
    def _base_state(self, key: SegKey) -> State:
        if key == self.tilde_seg:
            return State(ExpPoly.zero(), ExpPoly.one(), SourceMap())
        return State(ExpPoly.one(), ExpPoly.zero(), SourceMap())

    def _run_up(self) -> None:
        for key in reversed(self.net.seg_order):
            seg = self.net.segments[key]
            if seg.infinite:
                self.up[key] = self._base_state(key)
                continue
            far = self.net.far_node(key)
            ports = [_up_port(self.net.segments[k], self.up[k], self.with_sources)
                     for k in self.net.nodes[far].lo_ports]
            W, S, Hmix, Fsum = _eliminate(ports)
            self.up[key] = _out_state(seg, seg.x_hi, +1, W, S, Hmix, Fsum,
                                      self.with_sources)

    def _root(self) -> Tuple[ExpPoly, SourceMap]:
        root = self.net.tree.root
        ports = [_up_port(self.net.segments[k], self.up[k], self.with_sources)
                 for k in self.net.nodes[root].lo_ports]
        W, S, Hmix, Fsum = _eliminate(ports)
        return S, Hmix + Fsum

    def _run_down(self) -> None:
        for key in self.net.seg_order:
            seg = self.net.segments[key]
            near = self.net.near_node(key)
            node = self.net.nodes[near]
            ports = []
            for k in node.lo_ports:
                if k != key:
                    ports.append(_up_port(self.net.segments[k], self.up[k], True))
            for k in node.hi_ports:
                ports.append(_down_port(self.net.segments[k], self.down[k], True))
            W, S, Hmix, Fsum = _eliminate(ports)
            self.down[key] = _out_state(seg, seg.x_lo, -1, W, S, Hmix, Fsum, True)

    # ------------------------------------------------------------------ results
    def coefficient_numerators(self, key: SegKey) -> Tuple[SourceMap, SourceMap, ExpPoly]:
        """(N_plus, N_minus, D) with c = N_plus/(2w D), ct = N_minus/(2w D)
        on the segment; D is proportional to det D_Gamma."""
        ups = self.up[key]
        dns = self.down[key]
        D = ups.A * dns.A - ups.B * dns.B
        N_plus = ups.H.times(dns.A) + dns.H.times(ups.B)
        N_minus = ups.H.times(dns.B) + dns.H.times(ups.A)
        return N_plus, N_minus, D
