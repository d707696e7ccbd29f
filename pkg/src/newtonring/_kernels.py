"""Compiled inner loops: recursive evaluation and the lockstep ring sweep.

The double-precision evaluator carries values as (complex mantissa, int
exponent) pairs, renormalizing only when a mantissa drifts outside
[2**-400, 2**400].  Rescaling by powers of two is exact, so the results
match the eagerly normalized ``ScaledComplex`` arithmetic bit for bit.

The promotion evaluator uses double-double arithmetic (about 106 bits) and
is only entered near a root, where no rescaling is needed.
"""
import math

import numba
import numpy as np
from numba import njit, prange

MANDELBROT = 0
PERIODIC = 1

RUNNING = 0
CONVERGED = 1
CYCLE = 2
EXHAUSTED = 3
FAILED = 4

_BIG = 2.0 ** 400
_SMALL = 2.0 ** -400

_jit = dict(cache=True, nogil=True)


@njit(**_jit)
def _cldexp(m, k):
    return complex(math.ldexp(m.real, k), math.ldexp(m.imag, k))


@njit(**_jit)
def _renorm(m, e):
    a = max(abs(m.real), abs(m.imag))
    if a > _BIG or (a < _SMALL and a != 0.0):
        k = math.frexp(a)[1]
        return _cldexp(m, -k), e + k
    return m, e


@njit(**_jit)
def _sadd(m1, e1, m2, e2):
    if m2 == 0:
        return m1, e1
    if m1 == 0:
        return m2, e2
    if e1 == e2:
        return m1 + m2, e1
    if e1 > e2:
        g = e2 - e1
        if g < -1100:
            return m1, e1
        return m1 + _cldexp(m2, g), e1
    g = e1 - e2
    if g < -1100:
        return m2, e2
    return m2 + _cldexp(m1, g), e2


@njit(**_jit)
def eval_scaled(kind, c, n, z):
    """(p mantissa, p exp2, p' mantissa, p' exp2) by forward recursion."""
    if kind == MANDELBROT:
        pm, pe = 0j, 0
        dm, de = 0j, 0
        for _ in range(n):
            dm, de = _sadd(2.0 * pm * dm, pe + de, 1.0 + 0j, 0)
            dm, de = _renorm(dm, de)
            pm, pe = _sadd(pm * pm, 2 * pe, z, 0)
            pm, pe = _renorm(pm, pe)
        return pm, pe, dm, de
    wm, we = z, 0
    dm, de = 1.0 + 0j, 0
    for _ in range(n):
        dm, de = _renorm(2.0 * wm * dm, we + de)
        wm, we = _sadd(wm * wm, 2 * we, c, 0)
        wm, we = _renorm(wm, we)
    pm, pe = _sadd(wm, we, -z, 0)
    dm, de = _sadd(dm, de, -1.0 + 0j, 0)
    return pm, pe, dm, de


@njit(**_jit)
def displacement(kind, c, n, z, sat):
    """Newton displacement p/p' at z; ok=False when p'(z) is exactly zero."""
    pm, pe, dm, de = eval_scaled(kind, c, n, z)
    if dm == 0:
        return 0j, False
    if pm == 0:
        return 0j, True
    kp = math.frexp(max(abs(pm.real), abs(pm.imag)))[1]
    kd = math.frexp(max(abs(dm.real), abs(dm.imag)))[1]
    q = _cldexp(pm, -kp) / _cldexp(dm, -kd)
    e = pe + kp - de - kd
    aq = abs(q)
    if e > 1000 or math.log2(aq) + e > math.log2(sat):
        return q / aq * sat, True
    if e < -1100:
        return 0j, True
    return _cldexp(q, e), True


# --- double-double -----------------------------------------------------------

@njit(**_jit)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(**_jit)
def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(**_jit)
def _split(a):
    t = 134217729.0 * a
    hi = t - (t - a)
    return hi, a - hi


@njit(**_jit)
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(**_jit)
def dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    e += t
    s, e = _quick_two_sum(s, e)
    e += f
    return _quick_two_sum(s, e)


@njit(**_jit)
def dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _quick_two_sum(p, e)


@njit(**_jit)
def _cdd_mul(a, b):
    # a, b: (re_hi, re_lo, im_hi, im_lo)
    rr = dd_mul(a[0], a[1], b[0], b[1])
    ii = dd_mul(a[2], a[3], b[2], b[3])
    ri = dd_mul(a[0], a[1], b[2], b[3])
    ir = dd_mul(a[2], a[3], b[0], b[1])
    re = dd_add(rr[0], rr[1], -ii[0], -ii[1])
    im = dd_add(ri[0], ri[1], ir[0], ir[1])
    return (re[0], re[1], im[0], im[1])


@njit(**_jit)
def _cdd_add_c(a, c):
    re = dd_add(a[0], a[1], c.real, 0.0)
    im = dd_add(a[2], a[3], c.imag, 0.0)
    return (re[0], re[1], im[0], im[1])


@njit(**_jit)
def _cdd_value(a):
    return complex(a[0] + a[1], a[2] + a[3])


@njit(**_jit)
def displacement_dd(kind, c, n, z, fallback):
    """Displacement from a double-double evaluation at the (double) point z."""
    if kind == MANDELBROT:
        p = (0.0, 0.0, 0.0, 0.0)
        dp = (0.0, 0.0, 0.0, 0.0)
        for _ in range(n):
            t = _cdd_mul(p, dp)
            dp = _cdd_add_c((2.0 * t[0], 2.0 * t[1], 2.0 * t[2], 2.0 * t[3]), 1.0 + 0j)
            p = _cdd_add_c(_cdd_mul(p, p), z)
        pv = _cdd_value(p)
        dv = _cdd_value(dp)
    else:
        w = (z.real, 0.0, z.imag, 0.0)
        dw = (1.0, 0.0, 0.0, 0.0)
        for _ in range(n):
            t = _cdd_mul(w, dw)
            dw = (2.0 * t[0], 2.0 * t[1], 2.0 * t[2], 2.0 * t[3])
            w = _cdd_add_c(_cdd_mul(w, w), c)
        pv = _cdd_value(_cdd_add_c(w, -z))
        dv = _cdd_value(_cdd_add_c(dw, -1.0 + 0j))
    if dv == 0:
        return fallback
    r = pv / dv
    if not (math.isfinite(r.real) and math.isfinite(r.imag)):
        return fallback
    return r


@njit(**_jit)
def newton_displacement(kind, c, n, z, sat, promote, hp_threshold):
    d, ok = displacement(kind, c, n, z, sat)
    if ok and promote and abs(d) < hp_threshold:
        d = displacement_dd(kind, c, n, z, d)
    return d, ok


@njit(**_jit)
def displacements(kind, c, n, zs, sat, promote, hp_threshold, out, ok):
    for j in range(zs.shape[0]):
        d, good = newton_displacement(kind, c, n, zs[j], sat, promote, hp_threshold)
        out[j] = d
        ok[j] = good


# --- single orbit step ---------------------------------------------------------

@njit(**_jit)
def advance_one(i, z, disp, iters, status, sent, sent_it,
                kind, c, n, sat, promote, hp, eps_stop, eps_cycle, max_iter):
    zi = z[i]
    d, ok = newton_displacement(kind, c, n, zi, sat, promote, hp)
    if not ok:
        zi = zi + eps_stop * (1.0 + 1.0j)
        d, ok = newton_displacement(kind, c, n, zi, sat, promote, hp)
        if not ok:
            z[i] = zi
            status[i] = FAILED
            return
    znew = zi - d
    it = iters[i] + 1
    iters[i] = it
    z[i] = znew
    disp[i] = d
    a = abs(d)
    if a < eps_stop:
        status[i] = CONVERGED
        return
    if not (math.isfinite(znew.real) and math.isfinite(znew.imag)):
        status[i] = FAILED
        return
    if it - sent_it[i] >= 2 and abs(znew - sent[i]) < eps_cycle:
        status[i] = CYCLE
        return
    if it >= max_iter:
        status[i] = EXHAUSTED
        return
    if it & (it - 1) == 0:
        sent[i] = znew
        sent_it[i] = it


# --- ring sweeps -------------------------------------------------------------

@njit(**_jit)
def deformation(t_now, t_base):
    if t_now == 0 or t_base == 0:
        return math.inf
    r = t_now / t_base
    if not (math.isfinite(r.real) and math.isfinite(r.imag)) or r == 0:
        return math.inf
    return abs(complex(math.log(abs(r)), math.atan2(r.imag, r.real)))


def _run_sweeps_impl(max_sweeps, z, disp, iters, gen, base, bset, status, sent, sent_it,
                     prv, nxt, run_ids, counters, scratch_edges, split, new_ids,
                     kind, c, n, sat, promote, hp, eps_stop, eps_cycle, max_iter,
                     threshold, g_max):
    # counters: [n_orbits, n_running, total_steps, refinements, sweeps]
    done = 0
    while done < max_sweeps and counters[1] > 0:
        nr = counters[1]
        # (a) independent Newton steps
        for j in prange(nr):
            advance_one(run_ids[j], z, disp, iters, status, sent, sent_it,
                        kind, c, n, sat, promote, hp, eps_stop, eps_cycle, max_iter)
        counters[2] += nr
        # (b) deformation test and scheduling of split edges (left endpoint ids)
        n_edges = 0
        for j in range(nr):
            i = run_ids[j]
            if status[i] != RUNNING:
                continue
            p = prv[i]
            q = nxt[i]
            if status[p] > CONVERGED or status[q] > CONVERGED:
                continue
            dz = z[q] - z[i]
            if dz == 0:
                trigger = True
            else:
                t = (z[p] - z[i]) / dz
                if not bset[i]:
                    base[i] = t
                    bset[i] = True
                    trigger = False
                else:
                    trigger = deformation(t, base[i]) > threshold
            if trigger and gen[i] < g_max:
                if split[p] == 0:
                    split[p] = 1
                    scratch_edges[n_edges] = p
                    n_edges += 1
                if split[i] == 0:
                    split[i] = 1
                    scratch_edges[n_edges] = i
                    n_edges += 1
        # (c) midpoint insertion, (d) baseline reset of touched orbits
        n_new = 0
        for k in range(n_edges):
            left = scratch_edges[k]
            split[left] = 0
            right = nxt[left]
            g = max(gen[left], gen[right]) + 1
            if g > g_max:
                continue
            if status[left] != RUNNING and status[right] != RUNNING:
                continue
            m = counters[0]
            counters[0] = m + 1
            zm = 0.5 * (z[left] + z[right])
            z[m] = zm
            disp[m] = 0j
            gen[m] = g
            it = max(iters[left], iters[right])
            iters[m] = it
            bset[m] = False
            status[m] = RUNNING
            sent[m] = zm
            sent_it[m] = it
            nxt[left] = m
            prv[m] = left
            nxt[m] = right
            prv[right] = m
            bset[left] = False
            bset[right] = False
            new_ids[n_new] = m
            n_new += 1
        counters[3] += n_new
        # running list: survivors in previous order, then new orbits
        w = 0
        for j in range(nr):
            i = run_ids[j]
            if status[i] == RUNNING:
                run_ids[w] = i
                w += 1
        for k in range(n_new):
            run_ids[w] = new_ids[k]
            w += 1
        counters[1] = w
        counters[4] += 1
        done += 1
    return done


run_sweeps_serial = njit(cache=True, nogil=True)(_run_sweeps_impl)
run_sweeps_parallel = njit(cache=True, nogil=True, parallel=True)(_run_sweeps_impl)


def set_threads(threads: int) -> int:
    """Clamp and apply the numba thread count; returns the count in effect."""
    t = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(t)
    return t


def batch_displacements(kind, c, n, zs, sat, promote, hp_threshold):
    zs = np.ascontiguousarray(zs, dtype=np.complex128)
    out = np.empty_like(zs)
    ok = np.empty(zs.shape[0], dtype=np.bool_)
    displacements(kind, complex(c), n, zs, sat, promote, hp_threshold, out, ok)
    return out, ok
