import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lomega.fpengine import (PremiseError, afp_mu_schedule, afp_thm510, basis_starts, constancy_certify,
                             diametral_profile, displacement_search, history_csv, iterate_displacement)
from lomega.maps import MapInstance, build, krasnoselskii_average
from lomega.moduli import catalog_modulus
from lomega.spaces import DomainSpec, StepFn


def test_ex44_converges_to_zero():
    m = build("ex44", d=16)
    x0 = m.domain.sample(1, seed=3)[0]
    rep = iterate_displacement(m, x0, max_iter=1000)
    assert rep.converged and rep.best_residual < 1e-10
    # oracle: the scalar recursion t <- t|log t| / 2 heads to 0 from any t in (0, 1]
    t = x0[0]
    for _ in range(rep.iterations):
        t = 0.5 * t * abs(math.log10(t)) if t > 0 else 0.0
    assert t < 1e-10


def test_ex46_contraction_fixed_point():
    L = 0.5
    m = build("ex46", {"L": L}, d=64)
    rep = iterate_displacement(m, np.zeros(64), max_iter=5000, tol=1e-13)
    assert rep.best_residual < 1e-10
    # oracle: x_{n+1} = L x_n and x_1 = sqrt(1 - |x|^2) give x_1^2 = (1 - L^2)/(2 - L^2)
    assert rep.best_point[0] == pytest.approx(math.sqrt((1 - L * L) / (2 - L * L)), abs=1e-6)
    assert rep.best_point[0] == pytest.approx(math.sqrt(3 / 7), abs=1e-6)


def test_identity_immediate():
    m = build("identity", d=4)
    rep = iterate_displacement(m, np.array([0.1, 0.2, 0, 0]))
    assert rep.best_residual == 0 and rep.converged and rep.iterations == 1


def test_residual_reevaluates():
    m = build("ex45", d=8)
    rep = displacement_search(m, multistart=4, seed=2, budget=2000)
    assert rep.best_residual == pytest.approx(m.residual(rep.best_point), rel=1e-12)


def test_krasnoselskii_scheme_and_errors():
    m = build("ex46", {"L": 1.0}, d=8)
    rep = iterate_displacement(m, np.zeros(8), scheme="krasnoselskii", lam=0.5, max_iter=50)
    assert rep.scheme.startswith("krasnoselskii") and len(rep.history) == rep.iterations
    with pytest.raises(ValueError):
        iterate_displacement(m, np.zeros(8), scheme="krasnoselskii", lam=1.0)
    with pytest.raises(ValueError):
        iterate_displacement(m, np.r_[2.0, np.zeros(7)])


def test_escape_reported():
    m = build("ex46", d=4, domain=DomainSpec.ball(2.0, "l2", 4))
    rep = iterate_displacement(m, np.array([1.5, 0, 0, 0]), max_iter=10)
    assert rep.escaped


def test_thm51_basis_residuals():
    m = build("thm51", d=32)
    rep = displacement_search(m, starts=basis_starts(m.domain), budget=32 * 5)
    beta = 2.0 ** -(np.arange(1, 33) + 1)
    got = np.array([c["start_residual"] for c in rep.candidates])
    assert np.allclose(got, beta, rtol=1e-12, atol=0)
    assert rep.best_residual <= beta[-1]


def test_alspach_zero_is_fixed():
    m = build("alspach")
    rep = displacement_search(m, starts=[StepFn.constant(0)], budget=5)
    assert rep.best_residual == 0


def test_prop59_flag():
    m = build("prop59", d=8)
    rep = displacement_search(m, multistart=4, seed=0, budget=400)
    assert rep.best_residual > 1e-3
    assert rep.flags["fixed_point_free_claim_consistent"] is True


def test_search_deterministic_and_thread_independent():
    m = build("ex46", {"L": 1.0}, d=16)
    a = displacement_search(m, multistart=6, seed=5, budget=3000)
    b = displacement_search(m, multistart=6, seed=5, budget=3000, workers=3)
    assert a.to_dict() == b.to_dict()


def test_afp_thm510_closed_form_and_bracket():
    m = build("thm510", d=32)
    seq = afp_thm510(m, 20)
    eta = m.internals["eta"]
    beta = m.internals["beta"]
    for n, r in enumerate(seq.residuals, start=1):
        assert r == eta * beta[n] == eta * 2.0 ** -(n + 2)
    for i, t in enumerate(seq.aux["t"]):
        assert beta[i] * eta <= t <= eta
        assert seq.aux["g_residual"][i] <= 1e-11
    assert np.all(np.diff(seq.residuals) < 0) and seq.residuals[-1] < 1e-6


def test_afp_thm510_errors():
    with pytest.raises(ValueError):
        afp_thm510(build("thm510", d=8), 8)
    with pytest.raises(ValueError):
        afp_thm510(build("ex44", d=8), 3)


def test_afp_mu_constant_collapses():
    m = build("constant", d=8)
    seq = afp_mu_schedule(m, inner_budget=200)
    assert all(r == 0 for r in seq.residuals)
    assert seq.aux["bound"][-1] == 0


def test_afp_mu_radial_decreasing():
    m = build("radial", d=8)
    seq = afp_mu_schedule(m, inner_budget=200)
    b = seq.aux["bound"]
    assert seq.aux["premise_delta_omega_le_1_minus_L"]
    assert all(y <= x for x, y in zip(b, b[1:]))


def test_afp_mu_c0shift_residuals_vanish():
    m = build("c0shift", d=16)
    seq = afp_mu_schedule(m, inner_budget=500)
    assert not seq.aux["premise_delta_omega_le_1_minus_L"]  # flagged, not enforced
    assert seq.aux["bound"][-1] < 1e-4
    assert seq.aux["bound"][-1] < seq.aux["bound"][0]


def test_afp_mu_schedule_validation():
    with pytest.raises(ValueError):
        afp_mu_schedule(build("constant", d=4), mu_schedule=[0.5, 0.4])


def test_constancy_constant_pass():
    c = constancy_certify(build("constant", d=8), catalog_modulus("zero-at-one"), samples=2000,
                          premise_pairs=20_000)
    assert c.passed and c.details["route"] == "T"


def test_constancy_positive_part_routes_through_retraction():
    m = build("constant", d=8, domain=DomainSpec.simplex(1.0, 8))
    c = constancy_certify(m, catalog_modulus("zero-at-one"), samples=2000, premise_pairs=20_000)
    assert c.passed and c.details["route"] == "T o R"


def test_constancy_identity_premise_fails():
    with pytest.raises(PremiseError) as e:
        constancy_certify(build("identity", d=8), catalog_modulus("zero-at-one"), premise_pairs=5000)
    assert e.value.certificate is not None and not e.value.certificate.passed


def test_constancy_requires_zero_at_one():
    with pytest.raises(PremiseError):
        constancy_certify(build("constant", d=8), catalog_modulus("sqrt2"))


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=4, max_size=4))
def test_constancy_any_constant(c):
    p = np.array(c)
    m = MapInstance("user", None, DomainSpec.ball(1.0, "l2", 4), 0.0, catalog_modulus("zero"), {},
                    fn=lambda X: np.repeat(p[None, :], len(X), axis=0))
    assert constancy_certify(m, catalog_modulus("zero-at-one", c=0.5), samples=500, premise_pairs=2000).passed


def test_diametral_examples():
    two = diametral_profile([[0.0, 0.0], [3.0, 4.0]])
    assert two.diameter == 5.0 and two.non_diametral == []
    h = math.sqrt(3) / 2
    tri = diametral_profile([[0, 0], [1, 0], [0.5, h], [0.5, h / 3]])
    assert tri.diameter == pytest.approx(1.0)
    assert tri.non_diametral == [3]
    # oracle: centroid to vertex distance is 1/sqrt(3)
    assert tri.radii[3] == pytest.approx(1 / math.sqrt(3))
    same = diametral_profile([[1.0, 2.0]] * 3)
    assert same.diameter == 0.0
    with pytest.raises(ValueError):
        diametral_profile([[1.0]])


def test_history_csv():
    assert history_csv([0.5, 0.25]) == "iter,residual\n0,0.5\n1,0.25\n"


def test_averaged_residual_identity_on_probes():
    S = build("ex46", {"L": 1.0}, d=8)
    T = krasnoselskii_average(S, 0.3)
    x = S.domain.sample(1000, seed=4)
    assert np.allclose(T.residuals(x), 0.3 * S.residuals(x), rtol=1e-12)
