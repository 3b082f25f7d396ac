import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lomega.moduli import (CONVERGES, DIVERGES, FAILS, HOLDS, MODULUS_IDS, GridSpec, Modulus, catalog_modulus,
                           check_properties, delta_omega, from_function, monotone_hull, osgood_divergence,
                           rescaled, slope_tail, tabulated)

FORMULA_IDS = [i for i in MODULUS_IDS if i != "tabulated"]


@pytest.mark.parametrize("mid", FORMULA_IDS)
def test_catalog_zero_at_zero_and_nonnegative(mid):
    m = catalog_modulus(mid)
    grid = np.linspace(0.0, m.domain_end, 10_000)
    v = np.asarray(m(grid))
    assert v[0] == 0.0
    assert np.all(v >= 0)
    assert float(m(0.0)) == 0.0


def test_log_at_one():
    assert float(catalog_modulus("log", L=0.3)(1.0)) == pytest.approx(0.3, abs=1e-15)


def test_alog_at_tenth():
    assert float(catalog_modulus("alog", alpha=1.0)(0.1)) == pytest.approx(0.1, rel=1e-14)


def test_radial_majorant_high_precision():
    lam = mpmath.mpf("0.5")
    with mpmath.workdps(50):
        d = mpmath.mpf(1)
        ref = lam / (2 * mpmath.sqrt(3)) * d + 1.5 * lam * d * mpmath.sqrt(abs(1 - d))
    got = float(catalog_modulus("radial-majorant", lam=0.5)(1.0))
    assert got == pytest.approx(float(ref), rel=1e-14)
    assert got == pytest.approx(0.14434, abs=1e-5)


@pytest.mark.parametrize("bad", [("log", {"L": -1}), ("radial", {"lam": 1.5}), ("ratio", {"L": 2}),
                                 ("power", {"p": 0}), ("zero-at-one", {"c": 0})])
def test_out_of_range_params(bad):
    with pytest.raises(ValueError):
        catalog_modulus(bad[0], **bad[1])


def test_unknown_id_and_param():
    with pytest.raises(ValueError):
        catalog_modulus("nope")
    with pytest.raises(ValueError):
        catalog_modulus("linear", slope=2)


def test_tabulated_interpolates():
    m = tabulated([0, 1, 2], [0, 1, 1])
    assert float(m(0.5)) == 0.5
    assert float(m(1.5)) == 1.0
    with pytest.raises(ValueError):
        tabulated([0, 1], [1, 1])


def test_roundtrip_dict():
    for mid in ("log", "alog", "ratio", "radial"):
        m = catalog_modulus(mid)
        back = Modulus.from_dict(m.to_dict())
        x = np.linspace(0, 1, 101)
        assert np.array_equal(np.asarray(m(x)), np.asarray(back(x)))


def test_sqrt2_omega2_holds():
    rep = check_properties(catalog_modulus("sqrt2"))
    assert rep.omega2.status == HOLDS


def test_linear_omega4_equality_omega2_fails():
    L = 0.3
    rep = check_properties(catalog_modulus("linear", c=1 - L), L=L)
    assert rep.omega4.status == HOLDS
    assert rep.omega2.status == FAILS
    assert rep.omega2.witness is not None


def test_alog_conditions():
    rep = check_properties(catalog_modulus("alog", alpha=1.0))
    assert rep.omega1.status == HOLDS
    assert rep.omega2.status == HOLDS
    assert rep.omega3.status == HOLDS


def test_fails_carry_witnesses():
    rep = check_properties(catalog_modulus("zero-at-one"))
    for v in (rep.omega1, rep.omega2, rep.omega3, rep.omega4, rep.subadditive, rep.concave,
              rep.nondecreasing_near_0):
        if v.status == FAILS:
            assert v.witness is not None


def test_check_properties_order_insensitive():
    m = catalog_modulus("radial", lam=0.4)
    pts = np.geomspace(1e-8, 2.0, 3000)
    rng = np.random.default_rng(0)

    class Perm(GridSpec):
        def points(self, ell=None):
            return rng.permutation(pts)

    a = check_properties(m, grid=GridSpec(lo=1e-8, hi=2.0, n=3000)).to_dict()
    b = check_properties(m, grid=Perm()).to_dict()
    a.pop("grid_spec"), b.pop("grid_spec")
    assert a == b


def test_concave_nondecreasing_is_subadditive():
    for m in (catalog_modulus("sqrt2"), catalog_modulus("ratio", L=0.3), catalog_modulus("power", p=0.3)):
        rep = check_properties(m, grid=GridSpec(hi=1.0))
        assert rep.concave.status == HOLDS
        assert rep.subadditive.status == HOLDS


def test_delta_omega_examples():
    assert delta_omega(catalog_modulus("radial", lam=0.4)) == pytest.approx(0.6, rel=1e-9)
    assert delta_omega(catalog_modulus("linear", c=0.7)) == 0.7
    assert delta_omega(catalog_modulus("log", L=0.0)) == math.inf


@settings(max_examples=50, deadline=None)
# below ~2**-422 the product c * 2**-600 turns subnormal and the ratio loses bits
@given(st.one_of(st.just(0.0), st.floats(1e-100, 10.0)))
def test_delta_omega_linear_exact(c):
    assert delta_omega(catalog_modulus("linear", c=c)) == c


def test_slope_tail_running_sup_nonincreasing():
    t = slope_tail(catalog_modulus("radial", lam=0.4))
    assert np.all(np.diff(t.running_sup) <= 0)


def test_osgood_examples():
    assert osgood_divergence(catalog_modulus("log", L=0.5)) == DIVERGES
    assert osgood_divergence(catalog_modulus("power", p=0.5)) == CONVERGES
    assert osgood_divergence(catalog_modulus("power", p=2.0)) == DIVERGES


def test_osgood_r2_integral_oracle():
    # closed form of the reciprocal integral, checked against quadrature
    for eps in (1e-1, 1e-2, 1e-3):
        q, _ = integrate.quad(lambda r: r ** -2, eps, 1.0, limit=200)
        assert q == pytest.approx(1 / eps - 1, rel=1e-8)


def test_osgood_interior_zero_rejected():
    with pytest.raises(ValueError):
        osgood_divergence(catalog_modulus("zero-at-one"))


def test_rescaled_and_hull():
    m = catalog_modulus("radial", lam=0.4)
    r = rescaled(m, inner=0.5, outer=2.0)
    x = np.linspace(0, 1, 11)
    assert np.allclose(r(x), 2.0 * np.asarray(m(0.5 * x)))
    h = monotone_hull(m)
    z = np.linspace(0, 2, 5001)
    hv = np.asarray(h(z))
    assert np.all(np.diff(hv) >= -1e-15)
    assert np.all(hv >= np.asarray(m(z)) - 1e-15)


def test_from_function_dominates_sampled_oscillation():
    f = lambda r: np.sin(np.asarray(r) ** 2)
    m = from_function(f, (0.0, 1.0), 2.0)
    rng = np.random.default_rng(1)
    x, y = rng.random(20_000), rng.random(20_000)
    d = np.abs(x - y)
    assert np.all(np.abs(f(x) - f(y)) <= np.asarray(m(d)) + 1e-12)
