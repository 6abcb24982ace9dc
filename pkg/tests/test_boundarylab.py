import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from properdisc.boundarylab import (
    characteristic_curve,
    chordal,
    cluster_sample,
    fatou_scan,
    fixed_pair,
    in_stolz,
    leading_lines,
    nevanlinna_T,
    newton_roots,
    proper_pair,
    q_residual_on_lines,
    range_density,
)

cplx = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)


# --- characteristic ---------------------------------------------------------


def test_T_constant():
    assert nevanlinna_T(lambda z: 3 + 0 * z, 0.5).value == pytest.approx(np.log(3))
    assert nevanlinna_T(lambda z: 0.5 + 0 * z, 0.5).value == 0


def test_T_exp():
    # oracle: (1/2π)∫ max(r cos θ, 0) dθ = r/π
    v = nevanlinna_T(np.exp, 0.7, n_theta=4096)
    assert v.value == pytest.approx(0.7 / np.pi, abs=1e-6)


def test_T_pole_oracle():
    r = 0.8
    ref = quad(lambda t: max(0.0, -np.log(abs(1 - r * np.exp(1j * t)))), 0, 2 * np.pi, limit=200)[0] / (2 * np.pi)
    # log⁺ has a kink, so the rule converges only algebraically here
    v = nevanlinna_T(lambda z: 1 / (1 - z), r, n_theta=2048)
    assert v.value == pytest.approx(ref, abs=1e-6) and v.delta < 1e-6


def test_T_radius_range():
    with pytest.raises(ValueError):
        nevanlinna_T(np.exp, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=8), cplx, st.floats(0.05, 0.95))
def test_T_scalar_multiple(coeffs, c, r):
    f = lambda z: np.polyval(coeffs, z)  # noqa: E731
    lhs = nevanlinna_T(lambda z: c * f(z), r).value
    rhs = nevanlinna_T(f, r).value + max(0.0, np.log(abs(c))) if c != 0 else 0.0
    assert lhs <= rhs + np.log(2) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=10))
def test_T_monotone(coeffs):
    f = lambda z: np.polyval(coeffs, z)  # noqa: E731
    assert characteristic_curve(f, np.linspace(0.05, 0.95, 10)).monotone()


# --- cluster sets -----------------------------------------------------------


def test_cluster_radial_identity():
    d = np.array([0.5, 0.9, 0.99])
    rec = cluster_sample(lambda z: z, 0.0, "radial", d)
    np.testing.assert_allclose(rec.values, d)
    assert rec.stats["n"] == 3


def test_cluster_angular_membership():
    rec = cluster_sample(lambda z: z, 1.0, "angular", [0.9, 0.95, 0.99], 0.5)
    assert rec.stats["n"] > 0
    assert np.all(in_stolz(rec.points, 1.0, 0.5))


def test_cluster_unrestricted_reproducible():
    a = cluster_sample(np.exp, 0.3, "unrestricted", [0.9, 0.99], 0.2, seed=4)
    b = cluster_sample(np.exp, 0.3, "unrestricted", [0.9, 0.99], 0.2, seed=4)
    np.testing.assert_array_equal(a.points, b.points)
    assert np.all(np.abs(a.points) < 1)


def test_cluster_errors():
    with pytest.raises(ValueError):
        cluster_sample(np.exp, 0.0, "radial", [0.9, 0.5])
    with pytest.raises(ValueError):
        cluster_sample(np.exp, 0.0, "radial", [0.5, 1.0])
    with pytest.raises(ValueError):
        cluster_sample(np.exp, 0.0, "angular", [0.5], 1.5)


# --- Fatou ------------------------------------------------------------------


def test_chordal_infinity():
    assert chordal(np.inf, np.inf) == 0
    assert chordal(0, np.inf) == pytest.approx(2)
    assert chordal(1, -1) == pytest.approx(2)


def test_fatou_identity():
    ladder = 1 - 2.0 ** -np.arange(1, 12)
    sc = fatou_scan(lambda z: z, np.linspace(0, 2 * np.pi, 32, endpoint=False), ladder, 1e-2)
    assert sc.fraction == 1


def test_fatou_singular_inner_off_axis():
    f = lambda z: np.exp(-(1 + z) / (1 - z))  # noqa: E731
    ladder = 1 - 2.0 ** -np.arange(1, 31)
    th = np.linspace(0.5, 2 * np.pi - 0.5, 16)
    assert fatou_scan(f, th, ladder, 1e-3).fraction == 1


def test_fatou_infinite_tol():
    sc = fatou_scan(lambda z: 1 / (1 - z), [0.0, 1.0], [0.5, 0.9], np.inf)
    assert sc.fraction == 1


# --- range density ----------------------------------------------------------


def test_range_identity_hit():
    rep = range_density([0, 1], 0.0, 0.1, [0.99])
    assert rep.counts[0] == 1
    assert rep.roots[0][0] == pytest.approx(0.99)


def test_range_far_target_misses():
    assert range_density([0, 1, 0.5], 0.0, 0.1, [50.0]).counts[0] == 0


def test_range_rejects_constant():
    with pytest.raises(ValueError):
        range_density([3.0], 0.0, 0.1, [0])


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=2, max_size=12), cplx, st.floats(0.01, 0.5))
def test_range_refinement_monotone(g, a, rad):
    g = list(g[:-1]) + [g[-1] + 1]
    small = range_density(g, 0.0, rad, [a]).counts[0]
    big = range_density(g, 0.0, 2 * rad, [a]).counts[0]
    assert small <= big


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2 ** 31 - 1))
def test_companion_matches_newton_oracle(deg, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    a = np.sort_complex(np.roots(c[::-1]))
    b = newton_roots(c)
    assert len(b) == deg
    for r in a:
        assert np.min(np.abs(b - r)) <= 1e-8 * (1 + abs(r))


# --- proper pairs -----------------------------------------------------------


def test_leading_lines():
    L = leading_lines({(2, 0): 1})
    assert len(L) == 2 and all(abs(v[0]) < 1e-15 for v in L)
    L = leading_lines({(1, 1): 1, (0, 0): 3})
    assert len(L) == 2
    with pytest.raises(ValueError):
        leading_lines({(0, 0): 5})


def test_proper_pair_square():
    pp = proper_pair({(2, 0): 1})
    assert pp.ok, pp.checks
    assert abs(pp.Q[1]) > 1e-6


def test_proper_pair_product():
    pp = proper_pair({(1, 1): 1})
    assert pp.ok, pp.checks
    assert fixed_pair({(1, 1): 1}, (1, 1)).ok


def test_fixed_pair_vanishing():
    pp = fixed_pair({(1, 1): 1}, (1, 0))
    assert not pp.ok
    assert q_residual_on_lines(pp) == 0


def test_proper_pair_seeded():
    a = proper_pair({(2, 0): 1, (0, 1): 1}, seed=3)
    b = proper_pair({(2, 0): 1, (0, 1): 1}, seed=3)
    assert a.Q == b.Q
