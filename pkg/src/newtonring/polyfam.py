"""The recursively defined polynomial families.

* Mandelbrot centers: ``p_0 = 0``, ``p_{k+1} = p_k**2 + c`` in the variable
  ``c``; ``p_n`` has degree ``2**(n-1)``.
* Periodic points of ``f(z) = z**2 + c``: ``p = f^n(z) - z`` of degree ``2**n``.

Nothing here ever expands a polynomial into coefficient form except
:func:`top_coefficients`, which keeps only the leading ``m + 1`` entries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .numerics import SATURATION, GaussianInt, ScaledComplex

MAX_PERIOD = 40

# max |root| per family
_ROOT_BOUNDS = {
    ("mandelbrot", 0j): 2.0,
    ("periodic", 2 + 0j): 1.74,
    ("periodic", 1j): 1.48,
}

SELECTORS = ("mandelbrot", "per2", "peri")


@dataclass(frozen=True)
class PolyFamily:
    kind: str
    period: int
    c: complex = 0j

    def __post_init__(self):
        if self.kind not in ("mandelbrot", "periodic"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not 1 <= self.period <= MAX_PERIOD:
            raise ValueError(f"period must be in 1..{MAX_PERIOD}, got {self.period}")
        object.__setattr__(self, "c", complex(self.c))

    @classmethod
    def mandelbrot(cls, period: int) -> PolyFamily:
        return cls("mandelbrot", period)

    @classmethod
    def periodic(cls, c: complex, period: int) -> PolyFamily:
        return cls("periodic", period, c)

    @classmethod
    def from_selector(cls, name: str, period: int) -> PolyFamily:
        if name == "mandelbrot":
            return cls.mandelbrot(period)
        if name == "per2":
            return cls.periodic(2, period)
        if name == "peri":
            return cls.periodic(1j, period)
        raise ValueError(f"unknown family {name!r}; expected one of {SELECTORS}")

    @property
    def selector(self) -> str | None:
        if self.kind == "mandelbrot":
            return "mandelbrot"
        return {2 + 0j: "per2", 1j: "peri"}.get(self.c)

    @property
    def degree(self) -> int:
        if self.kind == "mandelbrot":
            return 1 << (self.period - 1)
        return 1 << self.period

    @property
    def root_bound(self) -> float:
        key = (self.kind, 0j if self.kind == "mandelbrot" else self.c)
        if key in _ROOT_BOUNDS:
            return _ROOT_BOUNDS[key]
        # escape radius of z**2 + c
        return (1 + math.sqrt(1 + 4 * abs(self.c))) / 2

    @property
    def kernel_args(self) -> tuple[int, complex, int]:
        kind = _kernels.MANDELBROT if self.kind == "mandelbrot" else _kernels.PERIODIC
        return kind, self.c, self.period

    def __str__(self):
        return f"{self.selector or f'periodic(c={self.c})'} n={self.period} d={self.degree}"


class EvalResult(NamedTuple):
    p: ScaledComplex
    dp: ScaledComplex


_ONE = ScaledComplex(1 + 0j)
_TWO = ScaledComplex(2 + 0j)


def eval(fam: PolyFamily, z: complex) -> EvalResult:
    """``p(z)`` and ``p'(z)`` by the defining recursion in scaled arithmetic."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("eval needs a finite point")
    c = ScaledComplex(fam.c)
    if fam.kind == "mandelbrot":
        c = ScaledComplex(z)
        p = dp = ScaledComplex(0j)
        for _ in range(fam.period):
            dp = _TWO * p * dp + _ONE
            p = p * p + c
        return EvalResult(p, dp)
    zs = ScaledComplex(z)
    w, dw = zs, _ONE
    for _ in range(fam.period):
        dw = _TWO * w * dw
        w = w * w + c
    return EvalResult(w - zs, dw - _ONE)


def newton_displacements(fam: PolyFamily, zs, *, promote: bool = False,
                         hp_threshold: float = 1e-13, saturation: float = SATURATION):
    """Vectorized ``p/p'`` over an array of points (compiled path).

    Returns ``(displacements, ok)``; ``ok`` is False where ``p'`` vanishes.
    """
    kind, c, n = fam.kernel_args
    return _kernels.batch_displacements(kind, c, n, np.asarray(zs), saturation,
                                        promote, hp_threshold)


def _gaussian_c(fam: PolyFamily) -> GaussianInt:
    try:
        return GaussianInt.from_complex(fam.c)
    except ValueError:
        raise ValueError(f"exact coefficients need a Gaussian-integer c, got {fam.c}") from None


def _square_truncated(re: list[int], im: list[int]) -> tuple[list[int], list[int]]:
    m = len(re)
    sr = [0] * m
    si = [0] * m
    for j in range(m):
        acc_r = acc_i = 0
        for i in range(j + 1):
            ar, ai, br, bi = re[i], im[i], re[j - i], im[j - i]
            acc_r += ar * br - ai * bi
            acc_i += ar * bi + ai * br
        sr[j] = acc_r
        si[j] = acc_i
    return sr, si


def top_coefficients(fam: PolyFamily, m: int) -> list[GaussianInt]:
    """Leading coefficients ``c_0..c_m`` of ``p(z) = sum c_k z**(d-k)``.

    The recursion runs on coefficient vectors truncated to ``m + 1`` entries,
    which is exact because lower terms never feed back into higher ones.
    """
    d = fam.degree
    if not 1 <= m <= d:
        raise ValueError(f"m must be in 1..{d}, got {m}")
    c = _gaussian_c(fam)
    size = m + 1
    # index k holds the coefficient of z**(deg - k)
    re = [0] * size
    im = [0] * size
    re[0] = 1
    deg = 1
    if fam.kind == "mandelbrot":
        # p_1 = c (the variable)
        steps = fam.period - 1
    else:
        # w_0 = z
        steps = fam.period
    for _ in range(steps):
        re, im = _square_truncated(re, im)
        deg *= 2
        if fam.kind == "mandelbrot":
            # + c, the variable: coefficient of z**1
            k = deg - 1
            if k < size:
                re[k] += 1
        else:
            k = deg
            if k < size:
                re[k] += c.re
                im[k] += c.im
    if fam.kind == "periodic":
        k = deg - 1
        if k < size:
            re[k] -= 1
    assert deg == d
    return [GaussianInt(a, b) for a, b in zip(re, im)]


def starting_radius(fam: PolyFamily, factor: float = 2.0) -> float:
    if not factor > 1.0:
        raise ValueError(f"radius factor must exceed 1, got {factor}")
    return factor * fam.root_bound
