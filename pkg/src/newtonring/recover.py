"""Recovery of a few missing roots when all the others are known.

Three routes, all of which avoid forming the deflated polynomial
``q = p / prod(z - alpha_i)`` explicitly:

* implicit deflation: Newton on ``q`` with ``q'/q = p'/p - sum 1/(z - alpha_i)``;
* Ehrlich-Aberth on all ``d`` coordinates with the known ones frozen;
* backward Newton identities: the power sums of the missing roots are
  ``b_k = a_k - sum alpha_i**k``, which give the coefficients of ``q``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .numerics import GaussianInt, GaussianRat
from .polyfam import PolyFamily, newton_displacements, starting_radius
from .rootset import RootSet
from .verify import PowerSumReport, split_power_sum, theoretical_power_sums, verify_roots

EPS_STOP = 1e-15
EPS_ROOT = 1e-14
_POLE_TOL = 10 * np.finfo(float).eps


class PoleError(ZeroDivisionError):
    """The evaluation point sits on one of the known roots."""


class PartialRecovery(RuntimeError):
    def __init__(self, count: int, roots):
        super().__init__(f"only {count} distinct limits found")
        self.count = count
        self.roots = roots


class NumericalFailure(ArithmeticError):
    def __init__(self, msg: str, roots):
        super().__init__(msg)
        self.roots = roots


class Method(str, enum.Enum):
    IMPLICIT_DEFLATION = "deflate"
    EHRLICH_ABERTH = "aberth"
    NEWTON_IDENTITIES = "identities"


@dataclass(frozen=True)
class DensePoly:
    """Monic ``sum e_k z**(m-k)`` with ``e_0 = 1``."""

    coeffs: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.coeffs, dtype=np.complex128).ravel()
        if e.size < 2:
            raise ValueError("degree must be >= 1")
        if e[0] != 1:
            raise ValueError("polynomial must be monic (e_0 = 1)")
        object.__setattr__(self, "coeffs", e)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def eval(self, z):
        z = np.asarray(z, dtype=np.complex128)
        p = np.ones_like(z)
        dp = np.zeros_like(z)
        for e in self.coeffs[1:]:
            dp = dp * z + p
            p = p * z + e
        return p, dp

    def __call__(self, z):
        return self.eval(z)[0]

    def root_radius(self) -> float:
        """``1 + max |e_k|**(1/k)``; every root lies inside."""
        m = self.degree
        k = np.arange(1, m + 1)
        return 1.0 + float(np.max(np.abs(self.coeffs[1:]) ** (1.0 / k)))


Poly = Union[PolyFamily, DensePoly]


def _log_derivative(poly: Poly, zs: np.ndarray) -> np.ndarray:
    """``p'/p`` at each point; ``inf`` on an exact root of ``p``."""
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    if isinstance(poly, DensePoly):
        p, dp = poly.eval(zs)
    else:
        disp, ok = newton_displacements(poly, zs, promote=True)
        # p' = 0 leaves p'/p = 0; the kernel marks it not ok
        p = np.where(ok, disp, 1.0)
        dp = np.where(ok, 1.0, 0.0).astype(np.complex128)
    out = np.empty_like(zs)
    zero = p == 0
    out[zero] = complex(math.inf, 0.0)
    out[~zero] = dp[~zero] / p[~zero]
    return out


def _pole_sum(z: complex, others: np.ndarray) -> complex:
    """Compensated ``sum 1/(z - a)``; PoleError when z hits some ``a``."""
    if others.size == 0:
        return 0j
    diff = z - others
    if np.min(np.abs(diff)) <= _POLE_TOL * max(1.0, abs(z)):
        raise PoleError(f"{z} coincides with a known root")
    inv = 1.0 / diff
    return complex(math.fsum(inv.real), math.fsum(inv.imag))


def deflated_log_derivative(poly: Poly, z: complex, found) -> complex:
    """``q'/q`` at z for ``q = p / prod(z - found)``."""
    found = np.asarray(found, dtype=np.complex128).ravel()
    s = _pole_sum(complex(z), found)
    return complex(_log_derivative(poly, [z])[0]) - s


def _circle(n: int, radius: float) -> np.ndarray:
    # half-step offset keeps starts off the real axis, a symmetry line of
    # the real families
    k = np.arange(n)
    return radius * np.exp(2j * np.pi * (k + 0.5) / n)


def _start_radius(poly: Poly) -> float:
    if isinstance(poly, DensePoly):
        return 1.5 * poly.root_radius()
    return starting_radius(poly, 1.5)


@dataclass
class MissingRootJob:
    fam: Poly
    found_roots: np.ndarray
    m: int
    method: Method = Method.NEWTON_IDENTITIES
    eps_stop: float = EPS_STOP
    eps_root: float = EPS_ROOT

    def __post_init__(self):
        self.found_roots = np.asarray(self.found_roots, dtype=np.complex128).ravel()
        self.method = Method(self.method)
        if self.m < 0:
            raise ValueError("m must be >= 0")
        d = self.fam.degree
        if self.found_roots.size != d - self.m:
            raise ValueError(f"expected {d - self.m} found roots, got {self.found_roots.size}")


def _newton_deflated(poly: Poly, z: complex, found: np.ndarray, eps_stop: float,
                     max_iter: int) -> tuple[complex, complex, bool]:
    """Newton on q from z; returns (limit, last step, converged)."""
    step = complex(math.inf)
    perturbed = False
    for _ in range(max_iter):
        try:
            L = deflated_log_derivative(poly, z, found)
        except PoleError:
            if perturbed:
                return z, step, False
            z += eps_stop * max(1.0, abs(z)) * (1 + 1j)
            perturbed = True
            continue
        if not (math.isfinite(L.real) and math.isfinite(L.imag)):
            return z, 0j, True
        if L == 0:
            return z, step, False
        step = 1.0 / L
        z = z - step
        if abs(step) < eps_stop:
            return z, step, True
    return z, step, False


def implicit_deflation_solve(job: MissingRootJob, starts=None, max_iter: int = 200) -> np.ndarray:
    if job.m == 0:
        return np.zeros(0, np.complex128)
    if starts is None:
        starts = _circle(4 * job.m, _start_radius(job.fam))
    rs = RootSet(job.eps_root)
    for z0 in np.asarray(starts, dtype=np.complex128):
        z, step, ok = _newton_deflated(job.fam, complex(z0), job.found_roots,
                                       job.eps_stop, max_iter)
        if ok:
            rs.register(z, step, job.m)
    if len(rs) < job.m:
        raise PartialRecovery(len(rs), rs.values())
    best = sorted(rs.roots, key=lambda r: (-r.hit_count, r.displacement))[: job.m]
    return np.array([r.z for r in best], dtype=np.complex128)


def ehrlich_aberth_sweep(poly: Poly, approximations, frozen=None) -> np.ndarray:
    """One Jacobi-style sweep: every free coordinate reads the same snapshot."""
    z = np.array(approximations, dtype=np.complex128).ravel()
    frozen = np.zeros(z.size, bool) if frozen is None else np.asarray(frozen, bool)
    free = np.flatnonzero(~frozen)
    if free.size == 0:
        return z
    # separate coincident points before reading the snapshot
    for j in free:
        others = np.delete(z, j)
        if others.size and np.min(np.abs(z[j] - others)) <= _POLE_TOL * max(1.0, abs(z[j])):
            z[j] += 1e3 * _POLE_TOL * max(1.0, abs(z[j])) * (1 + 1j)
    L = _log_derivative(poly, z[free])
    out = z.copy()
    for idx, j in enumerate(free):
        lj = L[idx]
        if not (math.isfinite(lj.real) and math.isfinite(lj.imag)):
            continue
        w = lj - _pole_sum(complex(z[j]), np.delete(z, j))
        if w != 0:
            out[j] = z[j] - 1.0 / w
    return out


def ehrlich_aberth_solve(job: MissingRootJob, max_sweeps: int = 500) -> np.ndarray:
    """Frozen-coordinate EA: only the m unknown coordinates move."""
    if job.m == 0:
        return np.zeros(0, np.complex128)
    d_found = job.found_roots.size
    z = np.concatenate([job.found_roots, _circle(job.m, _start_radius(job.fam))])
    frozen = np.zeros(z.size, bool)
    frozen[:d_found] = True
    for _ in range(max_sweeps):
        new = ehrlich_aberth_sweep(job.fam, z, frozen)
        step = np.max(np.abs(new[d_found:] - z[d_found:]))
        z = new
        if step < job.eps_stop:
            return z[d_found:]
    raise NumericalFailure(f"no convergence in {max_sweeps} sweeps", z[d_found:])


def missing_power_sums(a: Sequence[GaussianInt], found, m: int, ks: Sequence[int] | None = None) -> list[complex]:
    """``b_k = a_k - sum found**k`` for k = 1..m (or the exponents ``ks``).

    The integer part of the found sum cancels exactly against ``a_k``; only
    the fractional part carries rounding error.
    """
    ks = list(range(1, m + 1)) if ks is None else list(ks)
    if ks and len(a) < max(ks):
        raise ValueError("not enough theoretical power sums")
    found = np.asarray(found, dtype=np.complex128).ravel()
    out = []
    for k in ks:
        if found.size == 0:
            out.append(complex(a[k - 1]))
        else:
            out.append(split_power_sum(found, k).offset_from(a[k - 1]))
    return out


def _backward(b: Sequence, one) -> list:
    e = [one]
    for k in range(1, len(b) + 1):
        acc = b[k - 1]
        for j in range(1, k):
            acc = acc + e[k - j] * b[j - 1]
        e.append(-acc / k)
    return e


def coefficients_from_power_sums(b: Sequence[complex]) -> DensePoly:
    """Solve ``-k e_k = sum_{j<k} e_{k-j} b_j + b_k`` for the monic q."""
    if len(b) < 1:
        raise ValueError("need at least one power sum")
    return DensePoly(np.array(_backward([complex(x) for x in b], 1 + 0j)))


def exact_coefficients_from_power_sums(b: Sequence) -> list[GaussianRat]:
    """Same recursion over Gaussian rationals; returns ``e_0..e_m``."""
    if len(b) < 1:
        raise ValueError("need at least one power sum")
    return _backward([GaussianRat.of(x) for x in b], GaussianRat.of(1))


def solve_dense(q: DensePoly, eps_stop: float = 1e-14, max_sweeps: int = 200) -> np.ndarray:
    """All roots of a small dense polynomial by Ehrlich-Aberth."""
    m = q.degree
    if m == 1:
        return np.array([-q.coeffs[1]])
    z = q.root_radius() * np.exp(2j * np.pi * np.arange(m) / m + 0.4j)
    for _ in range(max_sweeps):
        p, dp = q.eval(z)
        new = z.copy()
        for j in range(m):
            if p[j] == 0:
                continue
            diff = z[j] - np.delete(z, j)
            w = dp[j] / p[j] - np.sum(1.0 / diff)
            new[j] = z[j] - 1.0 / w
        step = np.max(np.abs(new - z))
        z = new
        if step < eps_stop:
            return z
    raise NumericalFailure(f"no convergence in {max_sweeps} sweeps", z)


def _has_vanishing_odd(a: Sequence[GaussianInt], kmax: int) -> bool:
    return all(a[k - 1] == GaussianInt(0) for k in range(1, kmax + 1, 2))


def refine_power_system(x: np.ndarray, ks: Sequence[int], b: Sequence[complex],
                        max_iter: int = 20) -> np.ndarray:
    """Newton on ``sum_i x_i**k = b_k`` for the given exponents."""
    x = np.array(x, dtype=np.complex128)
    ks = np.asarray(ks)
    b = np.asarray(b, dtype=np.complex128)
    prev = math.inf
    for _ in range(max_iter):
        F = np.array([np.sum(x ** k) for k in ks]) - b
        J = ks[:, None] * x[None, :] ** (ks[:, None] - 1)
        try:
            dx = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        size = float(np.max(np.abs(dx)))
        if not size < prev:
            break
        x = x - dx
        prev = size
        if size < 1e-16 * max(1.0, float(np.max(np.abs(x)))):
            break
    return x


def identities_solve(job: MissingRootJob) -> tuple[np.ndarray, bool]:
    """Roots of q from backward identities; second value is False when the
    dense solve did not settle (near-multiple missing roots)."""
    m = job.m
    if m == 0:
        return np.zeros(0, np.complex128), True
    fam = job.fam
    kmax = 2 * m - 1
    a = theoretical_power_sums(fam, min(kmax, fam.degree))
    b = missing_power_sums(a, job.found_roots, m)
    try:
        x = solve_dense(coefficients_from_power_sums(b))
        settled = True
    except NumericalFailure as exc:
        x, settled = exc.roots, False
    if m > 1 and kmax <= len(a) and _has_vanishing_odd(a, kmax):
        ks = list(range(1, kmax + 1, 2))
        x = refine_power_system(x, ks, missing_power_sums(a, job.found_roots, m, ks))
    return x, settled


def polish(fam: Poly, z: np.ndarray, steps: int = 5) -> np.ndarray:
    """A few Newton steps on the full polynomial."""
    z = np.array(z, dtype=np.complex128)
    for _ in range(steps):
        L = _log_derivative(fam, z)
        move = np.isfinite(L) & (L != 0)
        z[move] -= 1.0 / L[move]
    return z


def condition_estimates(roots: np.ndarray) -> np.ndarray:
    """Distance from each recovered root to the nearest other one."""
    r = np.asarray(roots, dtype=np.complex128)
    if r.size < 2:
        return np.full(r.size, math.inf)
    dist = np.abs(r[:, None] - r[None, :])
    np.fill_diagonal(dist, math.inf)
    return dist.min(axis=1)


@dataclass
class Recovery:
    roots: np.ndarray
    report: PowerSumReport
    raw: np.ndarray
    condition: np.ndarray
    method: Method
    settled: bool = True
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.roots, self.report))


def recover_missing(job: MissingRootJob, extra_sums: int = 8, polish_steps: int = 5) -> Recovery:
    if job.method is Method.IMPLICIT_DEFLATION:
        try:
            raw = implicit_deflation_solve(job)
        except PartialRecovery:
            starts = _circle(8 * job.m, _start_radius(job.fam) * 1.25)
            raw = implicit_deflation_solve(job, starts)
        settled = True
    elif job.method is Method.EHRLICH_ABERTH:
        raw, settled = ehrlich_aberth_solve(job), True
    else:
        raw, settled = identities_solve(job)
    roots = polish(job.fam, raw, polish_steps) if raw.size else raw
    full = np.concatenate([job.found_roots, roots])
    report = verify_roots(job.fam, full, job.m + extra_sums) if isinstance(job.fam, PolyFamily) else None
    return Recovery(roots, report, raw, condition_estimates(roots), job.method, settled)


def write_power_sums(path, ks: Sequence[int], sums: Sequence[complex]) -> None:
    with open(path, "w") as fh:
        for k, s in zip(ks, sums):
            fh.write(f"{k} {s.real!r} {s.imag!r}\n")


def read_power_sums(path) -> dict[int, complex]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            try:
                if len(parts) != 3:
                    raise ValueError(f"expected 'k re im', got {len(parts)} fields")
                out[int(parts[0])] = complex(float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
