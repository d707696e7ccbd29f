"""The iterated refinement Newton method on a circular ring of orbits.

All running orbits take one Newton step per sweep.  After the step every
running orbit compares the shape of the triangle it forms with its two ring
neighbours against the shape recorded when its neighbourhood last changed.
When the triangle has deformed too much, new orbits are inserted at the
chord midpoints towards both neighbours.

The ring is stored as flat arrays with prev/next links so that insertion is
O(1) and a sweep costs O(number of running orbits).
"""
from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .engine import EngineConfig, Orbit, Status
from .polyfam import PolyFamily
from .rootset import RootSet


class DegenerateTriangle(ArithmeticError):
    pass


def cross_ratio(z_prev: complex, z_cur: complex, z_next: complex) -> complex:
    """Shape of the triangle (prev, cur, next), invariant under z -> a z + b."""
    den = z_next - z_cur
    if den == 0:
        raise DegenerateTriangle("next point coincides with current point")
    return (z_prev - z_cur) / den


def deformation(t_now: complex, t_base: complex) -> float:
    """``|log(t_now / t_base)|`` on the principal branch; inf when degenerate."""
    if t_now == 0 or t_base == 0:
        return math.inf
    r = t_now / t_base
    if r == 0 or not cmath.isfinite(r):
        return math.inf
    return abs(cmath.log(r))


def default_threshold(fam: PolyFamily) -> float:
    return 0.0005 if fam.kind == "mandelbrot" else 0.05


def default_max_generation(degree: int, n0: int) -> int:
    """Largest g with n0 * 2**g <= 4 * degree."""
    if 4 * degree <= n0:
        return 0
    return int(math.floor(math.log2(4 * degree / n0) + 1e-12))


@dataclass(frozen=True)
class RingConfig:
    n0: int = 64
    threshold: float | None = None
    radius_factor: float = 2.0
    phase: float = 0.0
    max_generation: int | None = None
    threads: int = 1


@dataclass
class RunStats:
    """Raw counters of one run; scaling columns are derived on demand."""

    period: int
    degree: int
    total_iterations: int
    sweeps: int
    refinements: int
    ring_size: int
    converged: int
    cycle_trapped: int
    exhausted: int
    failed: int
    distinct_roots: int
    wall_seconds: float

    def _per(self, value: float, lnpow: float) -> float:
        d = self.degree
        return value / (d * math.log(d) ** lnpow) if d > 1 else math.nan

    @property
    def iter_per_d(self) -> float:
        return self.total_iterations / self.degree

    @property
    def iter_per_dlnd(self) -> float:
        return self._per(self.total_iterations, 1)

    @property
    def iter_per_dln11d(self) -> float:
        return self._per(self.total_iterations, 1.1)

    @property
    def iter_per_dln2d(self) -> float:
        return self._per(self.total_iterations, 2)

    @property
    def us_per_dln2d(self) -> float:
        return self._per(1e6 * self.wall_seconds, 2)

    @property
    def us_per_dln3d(self) -> float:
        return self._per(1e6 * self.wall_seconds, 3)


class OrbitRing:
    """Ring state; ``sweep`` mutates it in place and returns it."""

    def __init__(self, points, threshold: float, max_generation: int, capacity: int | None = None):
        points = np.asarray(points, dtype=np.complex128)
        n0 = len(points)
        if n0 < 3:
            raise ValueError("a ring needs at least 3 orbits")
        if capacity is None:
            capacity = n0 * 2 ** max_generation
        capacity = max(capacity, n0)
        self.threshold = float(threshold)
        self.max_generation = int(max_generation)
        self.capacity = capacity
        self.z = np.zeros(capacity, np.complex128)
        self.z[:n0] = points
        self.disp = np.zeros(capacity, np.complex128)
        self.iters = np.zeros(capacity, np.int64)
        self.gen = np.zeros(capacity, np.int32)
        self.base = np.zeros(capacity, np.complex128)
        self.bset = np.zeros(capacity, np.bool_)
        self.status = np.full(capacity, Status.RUNNING, np.int8)
        self.sent = self.z.copy()
        self.sent_it = np.zeros(capacity, np.int64)
        idx = np.arange(n0)
        self.prv = np.zeros(capacity, np.int64)
        self.nxt = np.zeros(capacity, np.int64)
        self.prv[:n0] = (idx - 1) % n0
        self.nxt[:n0] = (idx + 1) % n0
        self.run_ids = np.zeros(capacity, np.int64)
        self.run_ids[:n0] = idx
        # n_orbits, n_running, total_steps, refinements, sweeps
        self.counters = np.array([n0, n0, 0, 0, 0], np.int64)
        self._edges = np.zeros(capacity, np.int64)
        self._split = np.zeros(capacity, np.int8)
        self._new = np.zeros(capacity, np.int64)

    @property
    def size(self) -> int:
        return int(self.counters[0])

    @property
    def n_running(self) -> int:
        return int(self.counters[1])

    @property
    def total_iterations(self) -> int:
        return int(self.counters[2])

    @property
    def refinements(self) -> int:
        return int(self.counters[3])

    @property
    def sweep_count(self) -> int:
        return int(self.counters[4])

    def running_ids(self) -> np.ndarray:
        return self.run_ids[: self.n_running].copy()

    def ring_order(self, start: int = 0) -> np.ndarray:
        out = np.empty(self.size, np.int64)
        i = start
        for k in range(self.size):
            out[k] = i
            i = self.nxt[i]
        return out

    def orbit(self, i: int) -> Orbit:
        st = Status(int(self.status[i]))
        return Orbit(
            z=complex(self.z[i]),
            last_displacement=complex(self.disp[i]),
            iterations=int(self.iters[i]),
            generation=int(self.gen[i]),
            baseline_cross_ratio=complex(self.base[i]) if self.bset[i] else None,
            status=st,
            period_estimate=int(self.iters[i] - self.sent_it[i]) if st == Status.CYCLE_TRAPPED else 0,
            sentinel=complex(self.sent[i]),
            sentinel_iter=int(self.sent_it[i]),
        )

    def orbits(self) -> list[Orbit]:
        """Orbits in circular order starting from the first seed."""
        return [self.orbit(i) for i in self.ring_order()]

    def status_counts(self) -> dict[Status, int]:
        st = self.status[: self.size]
        return {s: int(np.count_nonzero(st == s)) for s in Status}

    def sweep(self, fam: PolyFamily, cfg: EngineConfig, max_sweeps: int = 1, threads: int = 1) -> OrbitRing:
        if self.n_running == 0:
            return self
        kind, c, n = fam.kernel_args
        if threads > 1:
            _kernels.set_threads(threads)
            fn = _kernels.run_sweeps_parallel
        else:
            fn = _kernels.run_sweeps_serial
        fn(int(max_sweeps), self.z, self.disp, self.iters, self.gen, self.base, self.bset,
           self.status, self.sent, self.sent_it, self.prv, self.nxt, self.run_ids,
           self.counters, self._edges, self._split, self._new,
           kind, c, n, cfg.saturation, cfg.promote, cfg.high_precision_threshold,
           cfg.eps_stop, cfg.eps_cycle, cfg.max_iter(fam.degree),
           self.threshold, self.max_generation)
        return self


def seed_ring(fam: PolyFamily, n0: int, radius: float, phase: float = 0.0,
              threshold: float | None = None, max_generation: int | None = None) -> OrbitRing:
    if n0 < 3:
        raise ValueError(f"need at least 3 initial orbits, got {n0}")
    if not radius > fam.root_bound:
        raise ValueError(f"starting radius {radius} must exceed the root bound {fam.root_bound}")
    k = np.arange(n0)
    pts = radius * np.exp(2j * np.pi * (k + phase) / n0)
    if threshold is None:
        threshold = default_threshold(fam)
    if max_generation is None:
        max_generation = default_max_generation(fam.degree, n0)
    return OrbitRing(pts, threshold, max_generation)


def sweep(ring: OrbitRing, fam: PolyFamily, cfg: EngineConfig) -> OrbitRing:
    """One lockstep sweep: step, measure deformation, refine."""
    return ring.sweep(fam, cfg, 1)


def collect_roots(ring: OrbitRing, d: int, eps_root: float) -> RootSet:
    """Register every converged endpoint, walking the ring in circular order."""
    rs = RootSet(eps_root)
    for i in ring.ring_order():
        if ring.status[i] == Status.CONVERGED:
            rs.register(complex(ring.z[i]), complex(ring.disp[i]), d)
    return rs


TraceSink = Callable[[int, np.ndarray, np.ndarray], None]


@dataclass
class RunResult:
    roots: RootSet
    stats: RunStats
    ring: OrbitRing = field(repr=False)


def run(fam: PolyFamily, cfg: EngineConfig, ring_cfg: RingConfig = RingConfig(), *,
        eps_root: float = 1e-14, trace: TraceSink | None = None, trace_every: int = 1) -> RunResult:
    """Sweep until no orbit is running; dedup converged endpoints."""
    from .polyfam import starting_radius

    t0 = time.perf_counter()
    ring = seed_ring(fam, ring_cfg.n0, starting_radius(fam, ring_cfg.radius_factor),
                     ring_cfg.phase, ring_cfg.threshold, ring_cfg.max_generation)
    chunk = max(1, trace_every) if trace is not None else 1 << 30
    while ring.n_running:
        if trace is not None:
            ids = ring.running_ids()
            trace(ring.sweep_count, ids, ring.z[ids])
        ring.sweep(fam, cfg, chunk, ring_cfg.threads)
    rs = collect_roots(ring, fam.degree, eps_root)
    counts = ring.status_counts()
    stats = RunStats(
        period=fam.period,
        degree=fam.degree,
        total_iterations=ring.total_iterations,
        sweeps=ring.sweep_count,
        refinements=ring.refinements,
        ring_size=ring.size,
        converged=counts[Status.CONVERGED],
        cycle_trapped=counts[Status.CYCLE_TRAPPED],
        exhausted=counts[Status.EXHAUSTED],
        failed=counts[Status.FAILED],
        distinct_roots=len(rs),
        wall_seconds=time.perf_counter() - t0,
    )
    return RunResult(rs, stats, ring)
