import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from properdisc.levigeom import (
    ThresholdError,
    critical_residuals,
    critical_system_solve,
    critical_system_solve_many,
    levi_chart,
    levi_form,
    levi_polynomial,
    lifting_radius,
    rho_cone,
    sample_positive,
    sublevel_component,
)

coord = st.floats(-3, 3, allow_nan=False)


def test_rho_values():
    assert rho_cone(0.5, np.array([1, 0])) == 1
    assert rho_cone(0.3, np.zeros(2)) == 0
    assert rho_cone(1.0, np.array([1j, 0])) == -1


def test_chart_coefficients():
    ch = levi_chart(0.5, np.array([1, 0]))
    np.testing.assert_allclose(ch.linCoeffs, (2, 0))
    assert ch.quadCoeff == 0.75 and ch.leviScalar == 0.25


def test_chart_rejects_origin():
    with pytest.raises(ValueError):
        levi_chart(0.5, np.zeros(2))


@pytest.mark.parametrize("chart", ["auto", "iso", "u", "v"])
def test_chart_base_point(chart):
    z = np.array([1.0 + 0.3j, -0.4 + 0.2j])
    ch = levi_chart(0.5, z, chart)
    assert np.linalg.norm(ch.w(np.array([ch.u0]))[0]) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([-1.0, 0.0, 0.5, 0.9]), coord, coord, coord, coord, coord, coord,
       st.sampled_from(["auto", "iso"]))
def test_levi_identity(c, a, b, p, q, ur, ui, chart):
    z = np.array([a + 1j * b, p + 1j * q])
    assume(rho_cone(c, z) > 1e-2 and np.linalg.norm(z) > 1e-1)
    ch = levi_chart(c, z, chart)
    u = np.array([ch.u0 + 0.5 * (ur + 1j * ui)])
    assume(np.all(np.abs(u - ch.poles) > 1e-2) if ch.poles.size else True)
    w = ch.w(u)[0]
    assume(np.linalg.norm(w) < 1e3)
    scale = 1 + np.linalg.norm(z) ** 2 + np.linalg.norm(w) ** 2
    lhs = rho_cone(c, z + w) - rho_cone(c, z)
    assert abs(lhs - levi_form(c, w)) <= 1e-10 * scale
    assert abs(levi_polynomial(c, z, w)) <= 1e-10 * scale


def test_c1_flat_on_quadric():
    z = np.array([0.7 + 0.1j, 0.2 - 0.5j])
    ch = levi_chart(1.0, z)
    for u in ch.u0 + np.array([0.1, 0.3j, -0.2 + 0.1j]):
        w = ch.w(np.array([u]))[0]
        assert abs(rho_cone(1.0, z + w) - rho_cone(1.0, z)) < 1e-12


def test_dw_matches_difference():
    z = np.array([1.2 - 0.3j, 0.4 + 0.9j])
    for name in ("u", "v", "iso+", "iso-"):
        ch = levi_chart(0.5, z, name)
        u = ch.u0 + 0.13 + 0.07j
        d = (ch.w(np.array([u + 1e-6])) - ch.w(np.array([u - 1e-6])))[0] / 2e-6
        np.testing.assert_allclose(ch.dw(np.array([u]))[0], d, rtol=1e-6, atol=1e-8)


def test_sublevel_component_basic():
    ch = levi_chart(0.5, np.array([1.0, 0.0]), "v")
    assert ch.u0 == 0
    dom = sublevel_component(ch, 0.1)
    assert dom.contains(np.array([ch.u0]))[0]
    R = np.sqrt(2 * 0.1 / 0.5)
    err = np.abs(np.linalg.norm(ch.w(dom.boundary), axis=-1) - R)
    assert np.max(err) <= 1e-8


def test_sublevel_threshold_error():
    z = np.array([1.0, 0.0])
    thr = critical_system_solve(0.5, z).threshold
    with pytest.raises(ThresholdError):
        sublevel_component(levi_chart(0.5, z), 1.01 * thr)


def test_oracle_residuals():
    z = np.array([1.0, 0.0])
    s = critical_system_solve(0.5, z)
    assert len(s.solutions) > 0
    for w in s.solutions:
        e1, e2 = critical_residuals(0.5, z, w)
        assert abs(e1) <= 1e-10 and abs(e2) <= 1e-10
        assert abs(levi_polynomial(0.5, z, w)) <= 1e-10


def test_oracle_homogeneity():
    z = np.array([0.8 + 0.3j, -0.2 + 0.6j])
    a = critical_system_solve(0.5, z)
    b = critical_system_solve(0.5, 2.5 * z)
    assert len(a.solutions) == len(b.solutions)
    for w in a.solutions:
        assert np.min(np.linalg.norm(b.solutions - 2.5 * w, axis=1)) < 1e-8


def test_oracle_min_norm_bound():
    Z = sample_positive(0.5, 100, 11)
    sets = critical_system_solve_many(0.5, Z)
    ratios = [s.minNorm / np.linalg.norm(z) for z, s in zip(Z, sets)]
    assert min(ratios) > 0


def test_lifting_radius():
    a5 = lifting_radius(0.5)
    a99 = lifting_radius(0.99)
    assert a5.a > 0 and not a5.flagged
    assert a99.a < a5.a


def test_lifting_radius_certifies_fresh_batch():
    a = lifting_radius(0.5).a
    Z = sample_positive(0.5, 100, 1234)
    for z, s in zip(Z, critical_system_solve_many(0.5, Z)):
        w = s.min_solution
        assert rho_cone(0.5, z + w) - rho_cone(0.5, z) > a * rho_cone(0.5, z)


def test_sample_positive_range():
    Z = sample_positive(0.5, 50, 3)
    r = rho_cone(0.5, Z)
    assert np.all((r >= 0.5 - 1e-9) & (r <= 10 + 1e-9))
