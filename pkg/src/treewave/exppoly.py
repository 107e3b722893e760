"""Sparse exponential polynomials  p(w) = sum_k c_k exp(w * lam_k)  with real
frequencies lam_k and complex coefficients.

These are the almost-periodic sums the coupling determinants live in: ring
operations (add, mul, scale, frequency shift) plus a certified geometric-series
inversion for determinants with a dominant term.  Frequencies within a merge
tolerance are combined so that exact collisions (a + a vs 2a) do not duplicate
terms while incommensurate lengths stay separate.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Tuple

import numpy as np

from .errors import NotContractive

MERGE_TOL = 1e-12
_DROP_REL = 4e-16  # coefficient magnitudes below this (relative) are rounding noise


def _cleanup(freqs: np.ndarray, coeffs: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sort by frequency, merge groups closer than tol, drop negligible coefficients."""
    if freqs.size == 0:
        return freqs, coeffs
    order = np.argsort(freqs, kind="stable")
    freqs = freqs[order]
    coeffs = coeffs[order]
    # group boundaries where the gap exceeds tol
    gaps = np.diff(freqs) > tol
    group = np.concatenate(([0], np.cumsum(gaps)))
    ngroup = group[-1] + 1
    merged_f = np.zeros(ngroup)
    merged_c = np.zeros(ngroup, dtype=complex)
    np.add.at(merged_c, group, coeffs)
    # representative frequency: first of each group (deterministic)
    first = np.concatenate(([True], gaps))
    merged_f = freqs[first]
    scale = np.max(np.abs(merged_c)) if merged_c.size else 0.0
    keep = np.abs(merged_c) > _DROP_REL * scale
    return merged_f[keep], merged_c[keep]


class ExpPoly:
    """Immutable sparse exponential polynomial."""

    __slots__ = ("freqs", "coeffs", "tol")

    def __init__(self, freqs=(), coeffs=(), tol: float = MERGE_TOL, _clean: bool = True):
        f = np.asarray(freqs, dtype=float).ravel()
        c = np.asarray(coeffs, dtype=complex).ravel()
        if f.shape != c.shape:
            raise ValueError("frequency/coefficient length mismatch")
        if _clean:
            f, c = _cleanup(f, c, tol)
        self.freqs = f
        self.coeffs = c
        self.tol = tol

    # ---------------------------------------------------------------- builders
    @classmethod
    def from_terms(cls, terms: Mapping[float, complex] | Iterable[Tuple[float, complex]],
                   tol: float = MERGE_TOL) -> "ExpPoly":
        if isinstance(terms, Mapping):
            items = list(terms.items())
        else:
            items = list(terms)
        if not items:
            return cls((), (), tol)
        f, c = zip(*items)
        return cls(f, c, tol)

    @classmethod
    def zero(cls, tol: float = MERGE_TOL) -> "ExpPoly":
        return cls((), (), tol)

    @classmethod
    def one(cls, tol: float = MERGE_TOL) -> "ExpPoly":
        return cls((0.0,), (1.0,), tol)

    @classmethod
    def monomial(cls, freq: float, coeff: complex = 1.0, tol: float = MERGE_TOL) -> "ExpPoly":
        return cls((freq,), (coeff,), tol)

    # ---------------------------------------------------------------- queries
    def __len__(self) -> int:
        return self.freqs.size

    def is_zero(self) -> bool:
        return self.freqs.size == 0

    def abs_sum(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def terms(self) -> dict:
        return {float(f): complex(c) for f, c in zip(self.freqs, self.coeffs)}

    def __repr__(self) -> str:
        inner = ", ".join(f"{f:.6g}: {c:.6g}" for f, c in zip(self.freqs, self.coeffs))
        return f"ExpPoly({{{inner}}})"

    # ---------------------------------------------------------------- algebra
    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly(np.concatenate([self.freqs, other.freqs]),
                       np.concatenate([self.coeffs, other.coeffs]),
                       min(self.tol, other.tol))

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly(np.concatenate([self.freqs, other.freqs]),
                       np.concatenate([self.coeffs, -other.coeffs]),
                       min(self.tol, other.tol))

    def __neg__(self) -> "ExpPoly":
        return ExpPoly(self.freqs, -self.coeffs, self.tol, _clean=False)

    def scaled(self, factor: complex) -> "ExpPoly":
        if factor == 0:
            return ExpPoly.zero(self.tol)
        return ExpPoly(self.freqs, self.coeffs * factor, self.tol, _clean=False)

    def shifted(self, dfreq: float) -> "ExpPoly":
        """Multiply by exp(w * dfreq)."""
        return ExpPoly(self.freqs + dfreq, self.coeffs, self.tol, _clean=False)

    def __mul__(self, other: "ExpPoly") -> "ExpPoly":
        if self.is_zero() or other.is_zero():
            return ExpPoly.zero(min(self.tol, other.tol))
        f = (self.freqs[:, None] + other.freqs[None, :]).ravel()
        c = (self.coeffs[:, None] * other.coeffs[None, :]).ravel()
        return ExpPoly(f, c, min(self.tol, other.tol))

    # ---------------------------------------------------------------- evaluation
    def __call__(self, omega: complex) -> complex:
        return self.evaluate(omega)

    def evaluate(self, omega: complex) -> complex:
        """Sum c_k exp(omega lam_k), accumulated in ascending-frequency order."""
        if self.freqs.size == 0:
            return 0.0 + 0.0j
        return complex(np.sum(self.coeffs * np.exp(omega * self.freqs)))

    def evaluate_many(self, omegas: np.ndarray) -> np.ndarray:
        """Vectorised evaluate over an array of complex omegas."""
        omegas = np.asarray(omegas, dtype=complex).ravel()
        if self.freqs.size == 0:
            return np.zeros(omegas.shape, dtype=complex)
        return np.exp(np.outer(omegas, self.freqs)) @ self.coeffs


def evaluate(p: ExpPoly, omega: complex) -> complex:
    return p.evaluate(omega)


def mul(p: ExpPoly, q: ExpPoly) -> ExpPoly:
    return p * q


def dominant_term(p: ExpPoly) -> Tuple[float, complex]:
    """Largest-|coefficient| term.  Raises NotContractive on a tie, since a
    unique dominant term is what makes the geometric factoring possible."""
    if p.is_zero():
        raise ValueError("zero polynomial has no dominant term")
    mags = np.abs(p.coeffs)
    k = int(np.argmax(mags))
    if p.coeffs.size > 1:
        rest = np.delete(mags, k)
        if rest.max() >= mags[k] * (1.0 - 1e-12):
            raise NotContractive(1.0, "no unique dominant term")
    return float(p.freqs[k]), complex(p.coeffs[k])


def geom_inverse(p: ExpPoly, eps: float, max_power: int = 4000) -> Tuple[ExpPoly, float]:
    """Certified truncated inverse of p = c e^{w mu} (1 - q) with abs_sum(q) < 1.

    Returns (inv, tail) where inv = (1/c) e^{-w mu} sum_{k<=K} q^k and
    tail = r^{K+1} / ((1-r) |c|) <= eps bounds |inv(i tau) - 1/p(i tau)|
    pointwise on the imaginary axis.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu, c = dominant_term(p)
    if len(p) == 1:
        return ExpPoly.monomial(-mu, 1.0 / c, p.tol), 0.0
    mask = np.ones(len(p), dtype=bool)
    mask[np.argmax(np.abs(p.coeffs))] = False
    q = ExpPoly(p.freqs[mask] - mu, -p.coeffs[mask] / c, p.tol, _clean=False)
    r = q.abs_sum()
    if r >= 1.0:
        raise NotContractive(r)
    # smallest K with r^(K+1)/(1-r)/|c| <= eps
    target = eps * (1.0 - r) * abs(c)
    if r == 0.0:
        K = 0
    else:
        K = max(0, int(np.ceil(np.log(target) / np.log(r))) - 1)
        while r ** (K + 1) / (1.0 - r) / abs(c) > eps:
            K += 1
    if K > max_power:
        raise NotContractive(r, f"series needs {K} powers (> {max_power}); ratio {r:.4g}")
    acc = ExpPoly.one(p.tol)
    power = ExpPoly.one(p.tol)
    for _ in range(K):
        power = power * q
        acc = acc + power
    inv = acc.scaled(1.0 / c).shifted(-mu)
    tail = r ** (K + 1) / (1.0 - r) / abs(c)
    return inv, tail
