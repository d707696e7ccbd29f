"""Acceptance gate: one PASS/FAIL line per criterion.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest.
Desk-scale runs are shared between criteria through a cache.
"""
from __future__ import annotations

import functools
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from newtonring.engine import DEFAULT_TIER, TIERS, EngineConfig
from newtonring.numerics import GaussianInt
from newtonring.polyfam import PolyFamily, top_coefficients
from newtonring.recover import Method, MissingRootJob, recover_missing
from newtonring.ring import run
from newtonring.verify import power_sums_from_coefficients, verify_roots

sys.path.insert(0, os.path.dirname(__file__))
from oracles import grid_newton_roots, hausdorff  # noqa: E402

TIER = TIERS[DEFAULT_TIER]

DESK_RUNS = ([("peri", n) for n in range(10, 17)]
             + [("per2", n) for n in range(12, 17)]
             + [("mandelbrot", n) for n in range(10, 15)])

# scaling ceilings: (log power, bound)
SCALING = {"mandelbrot": (2, 200.0), "per2": (2, 20.0), "peri": (1.1, 50.0)}
# per-period bands from the series examples
SERIES_BANDS = {("per2", n): (2, 9.0, 20.0) for n in range(12, 17)}
SERIES_BANDS.update({("peri", n): (1.1, 30.0, 45.0) for n in range(10, 15)})

RESIDUAL_TOL = 1e-6
DELTA_TOL = 10 * TIER.eps_stop
DELETION_FLOOR = 1e-2


@functools.lru_cache(maxsize=None)
def desk(sel: str, n: int):
    fam = PolyFamily.from_selector(sel, n)
    res = run(fam, EngineConfig.for_tier(DEFAULT_TIER), eps_root=TIER.eps_root)
    roots = res.roots.values()
    return fam, res.stats, roots, verify_roots(fam, roots, 19)


def _per(stats, power):
    d = stats.degree
    return stats.total_iterations / (d * math.log(d) ** power)


@pytest.fixture
def say(capsys):
    def _say(line):
        with capsys.disabled():
            print("\n" + line)
    return _say


def _verdict(say, label, failures, detail=""):
    status = "PASS" if not failures else "FAIL"
    say(f"[{status}] {label}" + (f": {detail}" if detail else "")
        + ("" if not failures else " | " + "; ".join(failures)))
    assert not failures, "; ".join(failures)


def test_criterion_1_completeness(say):
    failures, worst = [], 0.0
    for sel, n in DESK_RUNS:
        fam, st, _, _ = desk(sel, n)
        worst = max(worst, st.wall_seconds)
        if st.distinct_roots != fam.degree:
            failures.append(f"{sel} n={n}: {st.distinct_roots}/{fam.degree}")
    _verdict(say, "1 completeness at desk scale", failures,
             f"{len(DESK_RUNS)} runs, slowest {worst:.1f} s")


def test_criterion_2_iteration_scaling(say):
    failures, parts = [], []
    for sel, n in DESK_RUNS:
        _, st, _, _ = desk(sel, n)
        power, bound = SCALING[sel]
        g = _per(st, power)
        parts.append(f"{sel}{n}={g:.2f}")
        if g > bound:
            failures.append(f"{sel} n={n}: {g:.2f} > {bound}")
        if (sel, n) in SERIES_BANDS:
            p, lo, hi = SERIES_BANDS[(sel, n)]
            g = _per(st, p)
            if not lo <= g <= hi:
                failures.append(f"{sel} n={n}: {g:.2f} outside [{lo}, {hi}]")
    _verdict(say, "2 iteration scaling", failures, " ".join(parts))


def test_criterion_3_golden_coefficients(say):
    t0 = time.perf_counter()
    c = top_coefficients(PolyFamily.from_selector("peri", 27), 5)
    want = [GaussianInt(1), GaussianInt(0), GaussianInt(0, 2 ** 26), GaussianInt(0),
            GaussianInt(-(2 ** 51) + 2 ** 25, 2 ** 25), GaussianInt(0)]
    a = power_sums_from_coefficients(c[1:])
    dt = time.perf_counter() - t0
    failures = []
    if c != want:
        failures.append(f"coefficients {[str(x) for x in c]}")
    if a[1] != GaussianInt(0, -(2 ** 27)):
        failures.append(f"a_2 = {a[1]}")
    if dt >= 1.0:
        failures.append(f"took {dt:.2f} s")
    _verdict(say, "3 exact coefficients", failures, f"a_2 = {a[1]}, {dt * 1e3:.1f} ms")


def test_criterion_4_power_sum_residuals(say):
    failures, worst_r, worst_d = [], 0.0, 0.0
    for sel, n in DESK_RUNS:
        _, _, _, rep = desk(sel, n)
        worst_r = max(worst_r, rep.max_residual())
        worst_d = max(worst_d, rep.delta)
        if rep.m != 19 or rep.max_residual() >= RESIDUAL_TOL:
            failures.append(f"{sel} n={n}: max residual {rep.max_residual():.2e}")
        if rep.delta > DELTA_TOL:
            failures.append(f"{sel} n={n}: delta {rep.delta:.2e}")
    _verdict(say, "4a power-sum residuals and delta", failures,
             f"max residual {worst_r:.2e} < {RESIDUAL_TOL}, max delta {worst_d:.2e} <= {DELTA_TOL:.0e}")


def test_criterion_4_single_deletion_detected(say):
    # deleting root alpha changes the first residual to |(a_1 - S_1) + alpha|
    failures, parts = [], []
    for sel, n in DESK_RUNS:
        _, _, roots, rep = desk(sel, n)
        r1_after = np.abs(rep.offsets[0] + roots)
        weakest = float(r1_after.min())
        parts.append(f"{sel}{n}={weakest:.1e}")
        if weakest <= DELETION_FLOOR:
            alpha = roots[int(r1_after.argmin())]
            failures.append(f"{sel} n={n}: deleting {alpha:.3g} leaves r1 = {weakest:.2e}")
    _verdict(say, "4b any single deletion pushes r1 above 1e-2", failures, " ".join(parts))


def test_criterion_5_recovery(say):
    t0 = time.perf_counter()
    fam, _, roots, _ = desk("peri", 12)
    idx = np.random.default_rng(2026).choice(roots.size, 3, replace=False)
    gone, found = roots[idx], np.delete(roots, idx)
    failures, parts = [], []
    tol = {Method.NEWTON_IDENTITIES: 1e-6, Method.IMPLICIT_DEFLATION: 10 * TIER.eps_stop,
           Method.EHRLICH_ABERTH: 10 * TIER.eps_stop}
    for method in Method:
        rec = recover_missing(MissingRootJob(fam, found, 3, method, TIER.eps_stop, TIER.eps_root))
        err = max(float(np.min(np.abs(rec.raw - g))) for g in gone)
        r11 = rec.report.max_residual(11)
        parts.append(f"{method.value} err {err:.1e} r<=11 {r11:.1e}")
        if err >= tol[method]:
            failures.append(f"{method.value}: error {err:.2e} >= {tol[method]:.0e}")
        if r11 >= 1e-4:
            failures.append(f"{method.value}: residual {r11:.2e}")
    dt = time.perf_counter() - t0
    if dt >= 30:
        failures.append(f"took {dt:.1f} s")
    _verdict(say, "5 recovery of 3 deleted roots at peri n=12", failures, "; ".join(parts))


def test_criterion_6_oracle_equivalence(say):
    failures, parts = [], []
    for sel in ("peri", "per2"):
        fam = PolyFamily.from_selector(sel, 4)
        got = run(fam, EngineConfig.for_tier(DEFAULT_TIER), eps_root=TIER.eps_root).roots.values()
        oracle = grid_newton_roots(sel, 4)
        h = hausdorff(got, oracle)
        parts.append(f"{sel} {len(got)}/{len(oracle)} roots, Hausdorff {h:.1e}")
        if len(got) != 16 or len(oracle) != 16 or h >= 1e-10:
            failures.append(f"{sel}: {parts[-1]}")
    _verdict(say, "6 oracle equivalence at d=16", failures, "; ".join(parts))


PROPERTY_SUITES = [
    "tests/test_ring.py::test_cross_ratio_similarity_invariance",
    "tests/test_numerics.py::test_ops_match_native",
    "tests/test_numerics.py::test_mul_associative",
    "tests/test_recover.py::test_exact_round_trip",
    "tests/test_rootset.py::test_grid_equals_all_pairs",
    "tests/test_rootset.py::test_grid_equals_all_pairs_large",
    "tests/test_threads.py::test_bit_identical_across_thread_counts",
]


def test_criterion_7_property_suites_standalone(say):
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    r = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                        *PROPERTY_SUITES], cwd=root, capture_output=True, text=True)
    tail = r.stdout.strip().splitlines()[-1] if r.stdout.strip() else r.stderr[-200:]
    _verdict(say, "7 property suites standalone", [] if r.returncode == 0 else [tail], tail)


def test_criterion_8_cycle_pattern(say):
    failures = []
    mandel = {n: desk("mandelbrot", n)[1].cycle_trapped for n in (13, 14)}
    if not any(mandel.values()):
        mandel[15] = desk("mandelbrot", 15)[1].cycle_trapped
    if not any(mandel.values()):
        failures.append("no CycleTrapped orbit for mandelbrot n=13..15")
    quiet = {f"{s}{n}": desk(s, n)[1].cycle_trapped for s, n in DESK_RUNS if s != "mandelbrot"}
    loud = [k for k, v in quiet.items() if v]
    if loud:
        failures.append(f"cycles for {', '.join(loud)}")
    detail = (", ".join(f"mandelbrot{n}={v}" for n, v in mandel.items())
              + f"; per2/peri total {sum(quiet.values())}"
              + "; degrees 2^20-2^30, wall-clock columns and exact cycle counts excluded")
    _verdict(say, "8 cycle pattern (desk-scale subset)", failures, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
