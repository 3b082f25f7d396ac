import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lomega.maps import build
from lomega.minmod import (certify_L_omega, empirical_min_modulus, lower_derivative, nonexpansive_upgrade_check,
                           sample_interval_pairs, sample_pairs)
from lomega.moduli import LN10, GridSpec, catalog_modulus
from lomega.spaces import DomainSpec, point_from_json


def ex41(sigma):
    return lambda r: np.asarray(r) * np.abs(sigma * np.log10(np.where(np.asarray(r) > 0, r, 1.0)))


def test_identity_function_modulus_tight():
    e = empirical_min_modulus(lambda r: r, grid=GridSpec(1e-6, 1.0, 200), pairs=20_000, interval=(0.0, 1.0))
    assert np.all(e.sup_values <= e.delta_grid + 1e-15)
    assert np.all(e.sup_values >= 0.95 * e.delta_grid)  # sampled, so only approached


def test_constant_function_modulus_zero():
    e = empirical_min_modulus(lambda r: np.full_like(r, 0.3), grid=GridSpec(1e-6, 1.0, 50), pairs=5000,
                              interval=(0.0, 1.0))
    assert np.all(e.sup_values == 0)


@pytest.mark.parametrize("sigma", [0.5, 1.0])
def test_ex41_bound_sampled(sigma):
    e = empirical_min_modulus(ex41(sigma), grid=GridSpec(1e-8, 1.0, 2000), pairs=100_000, interval=(0.0, 1.0))
    d = e.delta_grid
    assert np.all(e.sup_values <= d * (2 * sigma / LN10 + np.abs(np.log10(d))) + 1e-9)


def test_sup_values_nondecreasing_and_deterministic():
    m = build("ex45", d=8)
    a = empirical_min_modulus(m, grid=GridSpec(1e-6, m.domain.diameter(), 100), pairs=5000, seed=4)
    b = empirical_min_modulus(m, grid=GridSpec(1e-6, m.domain.diameter(), 100), pairs=5000, seed=4)
    assert np.all(np.diff(a.sup_values) >= 0)
    assert a.to_dict() == b.to_dict()


def test_sample_pairs_in_domain():
    for dom in (DomainSpec.ball(1.0, "l2", 6), DomainSpec.simplex(0.15, 6), DomainSpec.box(0.2, 6)):
        x, y = sample_pairs(dom, 4000, 0)
        assert np.all(dom.contains_many(x)) and np.all(dom.contains_many(y))
        d = dom.distances(x, y)
        assert d.min() < 1e-6  # near-diagonal group present
    x, y = sample_interval_pairs((0.0, 1.0), 1000, 0)
    assert x.min() >= 0 and y.max() <= 1


def test_certify_kakutani_pass():
    m = build("ex46", {"L": 1.0}, d=16)
    c = certify_L_omega(m, 1.0, catalog_modulus("sqrt2"), pairs=20_000, seed=1)
    assert c.passed and c.margin > 0


def test_certify_identity_constant_fails_with_sound_witness():
    m = build("identity", d=8)
    c = certify_L_omega(m, 0.0, catalog_modulus("zero"), pairs=2000, seed=0)
    assert not c.passed
    wp = c.worst_pair
    assert c.margin == pytest.approx(-wp["distance"], rel=1e-12)
    # re-evaluate the worst pair independently
    x, y = point_from_json(wp["x"]), point_from_json(wp["y"])
    lhs = np.linalg.norm(m.apply(x) - m.apply(y))
    assert lhs - 0.0 >= abs(c.margin) - c.tol
    assert c.witness is not None


def test_certify_deterministic():
    m = build("ex44", d=8)
    w = catalog_modulus("alog")
    a = certify_L_omega(m, 2 / LN10, w, pairs=3000, seed=9).to_dict()
    b = certify_L_omega(m, 2 / LN10, w, pairs=3000, seed=9).to_dict()
    assert a == b


def test_certify_rejects_short_modulus_domain():
    m = build("identity", d=4)
    with pytest.raises(ValueError):
        certify_L_omega(m, 1.0, catalog_modulus("linear", ell=1.0), pairs=10)


def test_lower_derivative_trivial():
    x, y = np.zeros(6), np.r_[0.5, np.zeros(5)]
    assert lower_derivative(build("identity", d=6), x, y).value == pytest.approx(1.0, rel=1e-12)
    assert lower_derivative(build("constant", d=6), x, y).value == 0.0
    assert lower_derivative(build("identity", d=6), x, x).value == 0.0


def test_lower_derivative_ex44_diverges():
    # oracle: ||T(s e1) - T(0)||_1 / s = |log s| / 2 along the segment
    x, y = np.zeros(8), np.r_[0.5, np.zeros(7)]
    est = lower_derivative(build("ex44", d=8), x, y)
    oracle = 0.5 * np.abs(np.log10(est.scales))
    assert np.all(est.infima >= oracle - 1e-12)
    assert np.all(est.infima <= oracle + 0.1)
    assert est.trend == "diverges"
    assert np.all(np.diff(est.infima) >= 0)


def test_upgrade_examples():
    assert nonexpansive_upgrade_check(0.3, catalog_modulus("ratio", L=0.3)).passed
    c = nonexpansive_upgrade_check(1.0, catalog_modulus("zero"))
    assert c.passed and c.margin == 0
    f = nonexpansive_upgrade_check(0.0, catalog_modulus("sqrt2"))
    assert not f.passed and f.witness["delta"] < 0.1
    assert math.sqrt(2 * f.witness["delta"]) > f.witness["delta"]


def test_upgrade_ratio_oracle():
    d = np.linspace(1e-8, 1, 10_000)
    assert np.all(0.3 * d + 0.7 * d / (1 + d) <= d)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0))
def test_upgrade_ratio_family(L):
    assert nonexpansive_upgrade_check(L, catalog_modulus("ratio", L=L)).passed
