"""Overflow-safe complex arithmetic and exact Gaussian integers/rationals.

``ScaledComplex`` keeps a native complex mantissa together with an explicit
power-of-two exponent, so that values such as ``4 ** (2 ** 30)`` can be
carried through a polynomial recursion without leaving the double range.
``GaussianInt`` and ``GaussianRat`` are exact and rely on Python's
unbounded ``int``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

EXP_LIMIT = 1 << 62
# exponent gaps beyond this are below any double mantissa
_ABSORB_GAP = 60
SATURATION = 1e300


class ScaledOverflowError(OverflowError):
    """Exponent left the +-2**62 range; a configuration problem, not a NaN."""


class CriticalPointError(ZeroDivisionError):
    """Division by an exact zero derivative (Newton step at a critical point)."""


def _ldexp_c(z: complex, k: int) -> complex:
    return complex(math.ldexp(z.real, k), math.ldexp(z.imag, k))


@dataclass(frozen=True)
class ScaledComplex:
    """Value ``mantissa * 2**exp2`` with ``1 <= |mantissa| < 2`` or exact zero."""

    mantissa: complex
    exp2: int = 0

    def __post_init__(self):
        m, e = _normalize(complex(self.mantissa), int(self.exp2))
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exp2", e)

    @classmethod
    def from_complex(cls, z: complex) -> ScaledComplex:
        return cls(complex(z), 0)

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def to_complex(self) -> complex:
        """Native value; saturates instead of producing inf."""
        if self.is_zero():
            return 0j
        if self.log2_abs() > math.log2(SATURATION):
            return self.mantissa / abs(self.mantissa) * SATURATION
        if self.exp2 < -1100:
            return 0j
        return _ldexp_c(self.mantissa, self.exp2)

    def log2_abs(self) -> float:
        if self.is_zero():
            return -math.inf
        return math.log2(abs(self.mantissa)) + self.exp2

    def __mul__(self, other: ScaledComplex) -> ScaledComplex:
        return sc_mul(self, other)

    def __add__(self, other: ScaledComplex) -> ScaledComplex:
        return sc_add(self, other)

    def __neg__(self) -> ScaledComplex:
        return ScaledComplex(-self.mantissa, self.exp2)

    def __sub__(self, other: ScaledComplex) -> ScaledComplex:
        return sc_add(self, -other)


def _normalize(m: complex, e: int) -> tuple[complex, int]:
    if m == 0:
        return 0j, 0
    if not (math.isfinite(m.real) and math.isfinite(m.imag)):
        raise ValueError(f"non-finite mantissa {m!r}")
    _, k = math.frexp(abs(m))
    # frexp puts |m| in [0.5, 1); shift one more to land in [1, 2)
    m = _ldexp_c(m, 1 - k)
    e += k - 1
    # rounding in abs() can leave |m| a hair outside [1, 2)
    a = abs(m)
    if a >= 2.0:
        m, e = _ldexp_c(m, -1), e + 1
    elif a < 1.0:
        m, e = _ldexp_c(m, 1), e - 1
    if abs(e) > EXP_LIMIT:
        raise ScaledOverflowError(f"exponent {e} outside +-2**62")
    return m, e


def sc_mul(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if a.is_zero() or b.is_zero():
        return ScaledComplex(0j, 0)
    return ScaledComplex(a.mantissa * b.mantissa, a.exp2 + b.exp2)


def sc_add(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if a.exp2 < b.exp2:
        a, b = b, a
    gap = a.exp2 - b.exp2
    if gap > _ABSORB_GAP:
        return a
    return ScaledComplex(a.mantissa + _ldexp_c(b.mantissa, -gap), a.exp2)


def sc_ratio(a: ScaledComplex, b: ScaledComplex, saturation: float = SATURATION) -> complex:
    """Native ``a / b``; magnitudes beyond ``saturation`` are clamped to it."""
    if b.is_zero():
        raise CriticalPointError("division by zero ScaledComplex")
    if a.is_zero():
        return 0j
    q = a.mantissa / b.mantissa
    e = a.exp2 - b.exp2
    if e > 1000 or math.log2(abs(q)) + e > math.log2(saturation):
        return q / abs(q) * saturation
    if e < -1100:
        return 0j
    return _ldexp_c(q, e)


_GI_RE = re.compile(r"^\s*([+-]?\d+)\s*([+-])\s*(\d+)i\s*$")


@dataclass(frozen=True)
class GaussianInt:
    re: int = 0
    im: int = 0

    def __add__(self, other):
        other = _as_gi(other)
        if other is None:
            return NotImplemented
        return GaussianInt(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianInt(-self.re, -self.im)

    def __sub__(self, other):
        other = _as_gi(other)
        if other is None:
            return NotImplemented
        return GaussianInt(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        other = _as_gi(other)
        if other is None:
            return NotImplemented
        return GaussianInt(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def __bool__(self) -> bool:
        return bool(self.re or self.im)

    def __str__(self) -> str:
        return f"{self.re}{'-' if self.im < 0 else '+'}{abs(self.im)}i"

    @classmethod
    def parse(cls, text: str) -> GaussianInt:
        """Inverse of ``str``: ``"a+bi"`` / ``"a-bi"``."""
        mt = _GI_RE.match(text)
        if mt is None:
            raise ValueError(f"not a Gaussian integer: {text!r}")
        im = int(mt.group(3))
        return cls(int(mt.group(1)), -im if mt.group(2) == "-" else im)

    @classmethod
    def from_complex(cls, z: complex) -> GaussianInt:
        """Exact conversion; the value must have integral parts."""
        z = complex(z)
        if z.real != int(z.real) or z.imag != int(z.imag):
            raise ValueError(f"{z!r} is not a Gaussian integer")
        return cls(int(z.real), int(z.imag))


def _as_gi(x) -> GaussianInt | None:
    if isinstance(x, GaussianInt):
        return x
    if isinstance(x, int):
        return GaussianInt(x, 0)
    return None


def gi_add(a: GaussianInt, b: GaussianInt) -> GaussianInt:
    return a + b


def gi_mul(a: GaussianInt, b: GaussianInt) -> GaussianInt:
    return a * b


@dataclass(frozen=True)
class GaussianRat:
    """``num / den`` with ``den > 0``; always stored in lowest terms."""

    num: GaussianInt
    den: int = 1

    def __post_init__(self):
        if self.den == 0:
            raise ZeroDivisionError("GaussianRat with zero denominator")
        num, den = self.num, self.den
        if den < 0:
            num, den = -num, -den
        g = math.gcd(num.re, num.im, den)
        if g > 1:
            num, den = GaussianInt(num.re // g, num.im // g), den // g
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def of(cls, x) -> GaussianRat:
        if isinstance(x, GaussianRat):
            return x
        if isinstance(x, int):
            x = GaussianInt(x)
        return cls(x, 1)

    def __add__(self, other):
        o = GaussianRat.of(other)
        return GaussianRat(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRat(-self.num, self.den)

    def __sub__(self, other):
        return self + (-GaussianRat.of(other))

    def __mul__(self, other):
        o = GaussianRat.of(other)
        return GaussianRat(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, k: int) -> GaussianRat:
        """Division by a nonzero rational integer only."""
        if not isinstance(k, int):
            return NotImplemented
        return GaussianRat(self.num, self.den * k)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, GaussianInt)):
            other = GaussianRat.of(other)
        if not isinstance(other, GaussianRat):
            return NotImplemented
        return self.num * other.den == other.num * self.den

    def __hash__(self):
        return hash((self.num, self.den))

    def real(self) -> Fraction:
        return Fraction(self.num.re, self.den)

    def imag(self) -> Fraction:
        return Fraction(self.num.im, self.den)

    def __complex__(self) -> complex:
        return complex(float(self.real()), float(self.imag()))
