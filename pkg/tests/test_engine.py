import cmath

import numpy as np
import pytest

from newtonring.engine import TIERS, EngineConfig, Orbit, Status, advance, newton_step
from newtonring.numerics import CriticalPointError
from newtonring.polyfam import PolyFamily

from oracles import grid_newton_roots


def test_newton_step_examples():
    z, d = newton_step(PolyFamily.periodic(2, 1), 0)
    assert z == 2 and d == -2
    z, _ = newton_step(PolyFamily.mandelbrot(2), 1)
    assert z == pytest.approx(1 / 3, abs=1e-16)
    root = (1 + cmath.sqrt(1 - 4j)) / 2
    z, d = newton_step(PolyFamily.periodic(1j, 1), root)
    assert abs(d) < 10 * 2.0 ** -52


def test_newton_step_critical_point():
    # p = z**2 + z has p' = 0 at -1/2
    with pytest.raises(CriticalPointError):
        newton_step(PolyFamily.mandelbrot(2), -0.5)


def test_critical_point_is_perturbed():
    cfg = EngineConfig()
    o = advance(Orbit(-0.5 + 0j), PolyFamily.mandelbrot(2), cfg)
    assert o.status is Status.RUNNING
    assert o.iterations == 1


def test_config_defaults_and_validation():
    cfg = EngineConfig()
    assert cfg.eps_cycle == pytest.approx(1e3 * cfg.eps_stop)
    assert cfg.max_iter(4096) == 40960
    assert EngineConfig.for_tier("double").eps_stop == TIERS["double"].eps_stop
    with pytest.raises(ValueError):
        EngineConfig(eps_stop=1e-10, eps_cycle=1e-12)
    with pytest.raises(ValueError):
        EngineConfig(eps_stop=0)


def test_exact_root_converges_in_one_step():
    o = advance(Orbit(0j), PolyFamily.mandelbrot(5), EngineConfig())
    assert o.status is Status.CONVERGED and o.iterations == 1


def test_budget_exhaustion():
    fam = PolyFamily.mandelbrot(2)  # d = 2, budget 10 * 2
    cfg = EngineConfig(max_iter_factor=0.5)
    o = advance(Orbit(10 + 10j), fam, cfg)
    assert o.status is Status.EXHAUSTED


def test_advance_rejects_finished_orbit():
    with pytest.raises(ValueError):
        advance(Orbit(0j, status=Status.CONVERGED), PolyFamily.mandelbrot(3), EngineConfig())


def _run_orbit(fam, z, cfg):
    o = Orbit(complex(z))
    while o.status is Status.RUNNING:
        o = advance(o, fam, cfg)
    return o


def test_real_orbit_of_real_polynomial_never_converges():
    # z^2 - z + 2 has no real roots and Newton keeps real points real
    fam = PolyFamily.periodic(2, 1)
    cfg = EngineConfig()
    o = _run_orbit(fam, 0.3, cfg)
    assert o.status in (Status.CYCLE_TRAPPED, Status.EXHAUSTED)
    assert o.status is not Status.CONVERGED


def test_advance_deterministic():
    fam = PolyFamily.from_selector("peri", 6)
    cfg = EngineConfig()
    a = _run_orbit(fam, 2.5 + 0.7j, cfg)
    b = _run_orbit(fam, 2.5 + 0.7j, cfg)
    assert a == b


@pytest.mark.parametrize("sel", ["peri", "per2"])
def test_converged_orbit_inclusion_disk(sel):
    fam = PolyFamily.from_selector(sel, 4)
    oracle = grid_newton_roots(sel, 4)
    cfg = EngineConfig()
    rng = np.random.default_rng(3)
    for _ in range(30):
        z0 = 2.2 * np.exp(2j * np.pi * rng.random())
        o = _run_orbit(fam, z0, cfg)
        if o.status is not Status.CONVERGED:
            continue
        assert abs(o.last_displacement) < cfg.eps_stop
        s = fam.degree * abs(o.last_displacement)
        # the disk radius can underflow to 0 at an exactly representable
        # root; compare with a small absolute floor
        assert np.min(np.abs(oracle - o.z)) <= max(s, 1e-15)


def test_no_cycle_reported_near_convergence():
    fam = PolyFamily.from_selector("peri", 8)
    cfg = EngineConfig()
    rng = np.random.default_rng(11)
    for _ in range(40):
        o = _run_orbit(fam, 3 * np.exp(2j * np.pi * rng.random()), cfg)
        if o.status is Status.CYCLE_TRAPPED:
            assert abs(o.last_displacement) >= cfg.eps_stop
            assert o.period_estimate >= 2
