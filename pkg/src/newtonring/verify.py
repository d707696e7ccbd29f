"""A posteriori completeness check with power sums.

The exact power sums ``a_k`` of all roots come from the leading
coefficients through the Newton identities (in Gaussian integers).  The
floating sums over the roots found are compared against them, once plainly
to confirm the integer part and once modulo 1 (real and imaginary part
separately) so that the full double precision lands on the fractional
residual.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import GaussianInt
from .polyfam import PolyFamily, top_coefficients

PLAIN = "plain"
FRACTIONAL = "fractional"


def power_sums_from_coefficients(c: Sequence) -> list:
    """``a_1..a_m`` from ``c_1..c_m`` of a monic polynomial.

    Solves ``-a_k = sum_{j<k} c_j a_{k-j} + k c_k`` in whatever ring the
    coefficients live in (exact for GaussianInt / GaussianRat).
    """
    m = len(c)
    if m < 1:
        raise ValueError("need at least one coefficient")
    a: list = []
    for k in range(1, m + 1):
        acc = c[k - 1] * k
        for j in range(1, k):
            acc = acc + c[j - 1] * a[k - j - 1]
        a.append(-acc)
    return a


def _powers(roots: np.ndarray, k: int) -> np.ndarray:
    out = roots.copy()
    for _ in range(k - 1):
        out *= roots
    return out


def _frac_tree(x: np.ndarray) -> float:
    """Sum modulo 1 over a fixed-shape pairwise tree with two-sum carries."""
    x = np.fmod(np.asarray(x, dtype=np.float64), 1.0)
    if x.size == 0:
        return 0.0
    size = 1 << max(0, (x.size - 1).bit_length())
    hi = np.zeros(size)
    hi[: x.size] = x
    lo = np.zeros(size)
    while hi.size > 1:
        a_h, b_h = hi[0::2], hi[1::2]
        s = a_h + b_h
        bb = s - a_h
        e = (a_h - (s - bb)) + (b_h - bb) + (lo[0::2] + lo[1::2])
        h = s + e
        lo = e - (h - s)
        hi = np.fmod(h, 1.0)
    return float(np.fmod(hi[0] + lo[0], 1.0))


def empirical_power_sum(roots, k: int, mode: str = PLAIN) -> complex:
    """``sum z**k`` over ``roots``.

    PLAIN is correctly rounded (``math.fsum`` per component).  FRACTIONAL
    returns only the real and imaginary parts modulo 1, each in (-1, 1).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    z = np.asarray(roots, dtype=np.complex128).ravel()
    pw = _powers(z, k) if z.size else z
    if mode == PLAIN:
        return complex(math.fsum(pw.real), math.fsum(pw.imag))
    if mode == FRACTIONAL:
        return complex(_frac_tree(pw.real), _frac_tree(pw.imag))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SplitSum:
    """A floating sum known as exact integer part plus fraction."""

    integer: GaussianInt
    frac: complex

    def value(self) -> complex:
        return complex(self.integer) + self.frac

    def offset_from(self, a: GaussianInt) -> complex:
        """``a - value`` with the integer parts cancelled exactly."""
        diff = a - self.integer
        return complex(diff) - self.frac


def split_power_sum(roots, k: int) -> SplitSum:
    plain = empirical_power_sum(roots, k, PLAIN)
    frac = empirical_power_sum(roots, k, FRACTIONAL)
    n_re = round(plain.real - frac.real)
    n_im = round(plain.imag - frac.imag)
    return SplitSum(GaussianInt(int(n_re), int(n_im)), frac)


@dataclass
class PowerSumReport:
    m: int
    degree: int
    theoretical: list[GaussianInt]
    empirical: list[complex]
    residuals: list[float]
    delta: float
    deficit: int = 0
    integer_parts: list[GaussianInt] = field(default_factory=list)
    fractions: list[complex] = field(default_factory=list)
    offsets: list[complex] = field(default_factory=list)

    @property
    def integer_consistent(self) -> list[bool]:
        # a fraction of 0.99.. over N is the same sum as -0.00.. over N+1
        return [abs(o.real) < 0.5 and abs(o.imag) < 0.5 for o in self.offsets]

    def max_residual(self, upto: int | None = None) -> float:
        r = self.residuals[: upto or self.m]
        return max(r) if r else 0.0

    def passed(self, tol: float = 1e-6) -> bool:
        return self.deficit == 0 and self.max_residual() < tol

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "a_k", "integer_part", "frac_re", "frac_im",
                        "empirical_re", "empirical_im", "residual"])
            for k in range(self.m):
                e = self.empirical[k]
                f = self.fractions[k] if self.fractions else complex("nan")
                n = self.integer_parts[k] if self.integer_parts else ""
                w.writerow([k + 1, str(self.theoretical[k]), str(n), repr(f.real), repr(f.imag),
                            repr(e.real), repr(e.imag), repr(self.residuals[k])])


def theoretical_power_sums(fam: PolyFamily, m: int) -> list[GaussianInt]:
    c = top_coefficients(fam, m)
    return power_sums_from_coefficients(c[1:])


def verify_roots(fam: PolyFamily, roots, m: int = 19) -> PowerSumReport:
    """Compare power sums of ``roots`` with the exact ones for ``fam``."""
    z = np.asarray(roots, dtype=np.complex128).ravel()
    d = fam.degree
    m = min(m, d)
    a = theoretical_power_sums(fam, m)
    empirical, offsets, ints, fracs = [], [], [], []
    for k in range(1, m + 1):
        s = split_power_sum(z, k)
        ints.append(s.integer)
        fracs.append(s.frac)
        empirical.append(s.value())
        offsets.append(s.offset_from(a[k - 1]))
    residuals = [abs(o) for o in offsets]
    return PowerSumReport(
        m=m, degree=d, theoretical=a, empirical=empirical, residuals=residuals,
        delta=residuals[0] / math.sqrt(d), deficit=d - z.size,
        integer_parts=ints, fractions=fracs, offsets=offsets,
    )


def residual_slope(report: PowerSumReport, skip: int = 0) -> float:
    """Least-squares slope of ln r_k against k."""
    k = np.arange(1, report.m + 1)[skip:]
    r = np.maximum(np.asarray(report.residuals[skip:]), 1e-300)
    return float(np.polyfit(k, np.log(r), 1)[0])
