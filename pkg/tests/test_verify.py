import cmath
import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newtonring.engine import EngineConfig
from newtonring.numerics import GaussianInt
from newtonring.polyfam import PolyFamily
from newtonring.ring import run
from newtonring.verify import (
    FRACTIONAL, PLAIN, empirical_power_sum, power_sums_from_coefficients, residual_slope,
    split_power_sum, verify_roots,
)

G = GaussianInt


def test_power_sums_examples():
    assert power_sums_from_coefficients([G(0), G(0, 2 ** 26)]) == [G(0), G(0, -(2 ** 27))]
    assert power_sums_from_coefficients([G(0), G(-1)]) == [G(0), G(2)]
    assert power_sums_from_coefficients([G(-3), G(2)]) == [G(3), G(5)]
    with pytest.raises(ValueError):
        power_sums_from_coefficients([])


def test_empirical_examples():
    assert empirical_power_sum([1, -1], 2, PLAIN) == 2
    assert empirical_power_sum([1j], 3, PLAIN) == -1j
    s = cmath.sqrt(1 - 8)
    roots = [(1 + s) / 2, (1 - s) / 2]
    got = empirical_power_sum(roots, 1, PLAIN)
    assert abs(got - 1) <= 4 * 2.0 ** -52
    with pytest.raises(ValueError):
        empirical_power_sum(roots, 0)


def test_fractional_mode_range_and_consistency():
    rng = np.random.default_rng(2)
    z = 1.7 * (rng.random(5000) - 0.5) + 1.7j * (rng.random(5000) - 0.5)
    for k in (1, 2, 5, 9):
        f = empirical_power_sum(z, k, FRACTIONAL)
        assert -1 < f.real < 1 and -1 < f.imag < 1
        plain = empirical_power_sum(z, k, PLAIN)
        s = split_power_sum(z, k)
        assert abs(s.value() - plain) < 1e-9 * max(1, abs(plain))


monic = st.lists(st.builds(complex, st.integers(-5, 5), st.integers(-5, 5)), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(monic)
def test_power_sums_match_numeric_roots(c):
    roots = np.roots([1] + c)
    assert len(roots) == len(c)
    a = power_sums_from_coefficients([G(int(x.real), int(x.imag)) for x in c])
    # multiple roots are found only to sqrt(eps), so skip clustered cases
    if len(roots) > 1:
        gap = min(abs(x - y) for i, x in enumerate(roots) for y in roots[i + 1:])
        if gap < 1e-3:
            return
    for k, ak in enumerate(a, 1):
        scale = max(1.0, float(np.sum(np.abs(roots) ** k)))
        assert abs(complex(ak) - np.sum(roots ** k)) <= 1e-9 * scale


@pytest.fixture(scope="module")
def per2_roots():
    fam = PolyFamily.from_selector("per2", 12)
    return fam, run(fam, EngineConfig()).roots.values()


def test_verify_complete_set(per2_roots):
    fam, z = per2_roots
    rep = verify_roots(fam, z)
    assert rep.m == 19 and len(rep.residuals) == len(rep.theoretical) == 19
    assert rep.deficit == 0
    assert max(rep.residuals) < 1e-6
    assert rep.delta <= 10 * EngineConfig().eps_stop
    assert rep.delta == rep.residuals[0] / math.sqrt(fam.degree)
    assert all(rep.integer_consistent)
    assert rep.passed()


def test_verify_one_deleted(per2_roots):
    fam, z = per2_roots
    rep = verify_roots(fam, z[1:])
    assert rep.deficit == 1
    assert rep.residuals[0] == pytest.approx(abs(z[0]), abs=1e-9)
    assert not rep.passed()


def test_verify_duplicate_and_delete(per2_roots):
    fam, z = per2_roots
    bad = np.concatenate([z[1:], z[5:6]])
    rep = verify_roots(fam, bad)
    assert rep.deficit == 0
    assert rep.residuals[0] == pytest.approx(abs(z[0] - z[5]), abs=1e-9)
    assert not rep.passed()


def test_residual_growth_slope(per2_roots):
    fam, z = per2_roots
    rep = verify_roots(fam, z)
    assert residual_slope(rep) < 1.2 * math.log(fam.root_bound) + 0.7


def test_report_csv(per2_roots, tmp_path):
    fam, z = per2_roots
    rep = verify_roots(fam, z, 5)
    path = tmp_path / "r.csv"
    rep.write_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert [int(r["k"]) for r in rows] == [1, 2, 3, 4, 5]
    assert rows[1]["a_k"] == str(rep.theoretical[1])
    assert float(rows[0]["residual"]) == rep.residuals[0]


def test_m_capped_by_degree():
    fam = PolyFamily.from_selector("peri", 2)
    roots = run(fam, EngineConfig()).roots.values()
    rep = verify_roots(fam, roots, 19)
    assert rep.m == 4 and max(rep.residuals) < 1e-12
