import numpy as np
import pytest

from properdisc.corepoly import PolyMap, circle_nodes
from properdisc.levigeom import rho_cone
from properdisc.liftengine import (
    DiscFamilySamples,
    LiftError,
    approx_disc_family,
    family_from_callable,
    lift_step_cone,
    lift_step_levi,
    push_boundary,
    radii_ladder,
    verification_size,
)


def mono(Z, W):
    return np.stack([W, 0 * W], -1)


def conj_mono(Z, W):
    return np.stack([np.conj(Z) * W, 0 * W], -1)


def test_family_must_be_centred():
    with pytest.raises(ValueError):
        DiscFamilySamples(circle_nodes(4), np.ones((4, 3, 2)))


def test_certificate_flag_is_conjunction():
    fam = family_from_callable(mono, 16, 32, 1.0)
    ap = approx_disc_family(fam, 0.1, 0.5)
    assert ap.cert.passed == all(ch.passed for ch in ap.cert.checks)


def test_monomial_family():
    fam = family_from_callable(mono, 16, 32, 1.0)
    ap = approx_disc_family(fam, 0.1, 0.5)
    assert ap.cert.passed
    assert ap.K > np.log(0.1) / np.log(0.5)
    expect = np.zeros((ap.K + 1, 2), complex)
    expect[ap.K, 0] = 1
    np.testing.assert_allclose(ap.h.trimmed(1e-12).coeffs, expect, atol=1e-12)
    assert 0.5 ** ap.K < 0.1


def test_conjugate_family():
    fam = family_from_callable(conj_mono, 32, 32, 1.0)
    ap = approx_disc_family(fam, 0.1, 0.5)
    assert ap.cert.passed
    h = ap.h.trimmed(1e-12)
    assert h.degree == ap.K - 1
    assert abs(h.coeffs[-1, 0] - 1) < 1e-12
    assert np.max(np.abs(h.coeffs[:-1])) < 1e-12


def test_eps_must_be_positive():
    fam = family_from_callable(mono, 8, 16, 1.0)
    with pytest.raises(LiftError):
        approx_disc_family(fam, 0.0, 0.5)


def test_push_exact_level():
    fam = family_from_callable(mono, 16, 32, 1.0)
    rho = lambda z: np.abs(z[..., 0]) ** 2  # noqa: E731
    res = push_boundary(PolyMap.constant([0, 0]), fam, rho, -0.1, 1.0, 0.1, 0.5)
    assert res.cert.passed
    g = res.g.trimmed(1e-12)
    assert g.degree == res.approx.K
    vals = rho(g.sample_circle(1.0, 512))
    assert np.max(np.abs(vals - 1)) < 1e-12
    # structural: g - h is the (polynomial) g0 itself
    np.testing.assert_allclose((res.g - res.h).trimmed(1e-14).coeffs, [[0, 0]], atol=1e-14)


def test_push_hypothesis_b():
    # level 1/4 on T, but the family dips to 0 on |w|² = 1/2
    fam = family_from_callable(mono, 16, 32, 1.0)
    rho = lambda z: (np.abs(z[..., 0]) ** 2 - 0.5) ** 2  # noqa: E731
    with pytest.raises(LiftError) as e:
        push_boundary(PolyMap.constant([0, 0]), fam, rho, 0.01, 0.25, 0.1, 0.5)
    assert e.value.where == "(b)"


def test_push_hypothesis_a():
    fam = family_from_callable(mono, 16, 32, 1.0)
    rho = lambda z: z[..., 0].real  # noqa: E731
    with pytest.raises(LiftError) as e:
        push_boundary(PolyMap.constant([0, 0]), fam, rho, -2.0, 1.0, 0.1, 0.5)
    assert e.value.where == "(a)"


def test_radii_ladder_covers_annulus():
    r = radii_ladder(0.5, 8)
    assert r.min() == 0.5 and r.max() == 1.0
    assert np.all(np.diff(r) > 0)


def test_verification_size():
    assert verification_size(0) == 512
    assert verification_size(1000) == 4096


def test_levi_lift_example():
    g0 = PolyMap.from_components([2, 0.3], [0])
    C = lambda zeta: 0.2 * rho_cone(0.5, g0(zeta))  # noqa: E731
    res = lift_step_levi(g0, 0.5, C, 0.1, 0.5)
    assert res.cert.passed, [ch for ch in res.cert.checks if not ch.passed]
    nv = verification_size(res.g.degree)
    assert np.max(np.linalg.norm((res.g - g0).sample_circle(0.5, nv), axis=1)) < 0.1


def test_levi_lift_preconditions():
    g0 = PolyMap.from_components([2, 0.3], [0])
    with pytest.raises(LiftError) as e:
        lift_step_levi(g0, 0.5, lambda z: -np.ones(np.shape(z)), 0.1, 0.5)
    assert e.value.where == "C"
    through0 = PolyMap.from_components([1, 1], [0])
    with pytest.raises(LiftError) as e:
        lift_step_levi(through0, 0.5, lambda z: np.ones(np.shape(z)), 0.1, 0.5)
    assert e.value.where == "critical"


def test_cone_lift_example():
    h = PolyMap.constant([2, 0])
    res = lift_step_cone(h, 0.5, 0.1, 0.5)
    p = res.cert.params
    assert p["m_h"] == pytest.approx(4.0)
    assert res.cert.passed, [ch for ch in res.cert.checks if not ch.passed]
    assert p["m_g"] >= (1 + p["a"]) * 4 - p["eps_cert"]
    assert np.max(np.linalg.norm((res.g - h).sample_circle(0.5, 1024), axis=1)) < 0.1


def test_cone_lift_needs_positive_m():
    with pytest.raises(LiftError) as e:
        lift_step_cone(PolyMap.constant([1j, 0]), 0.5, 0.1, 0.5, a=0.5)
    assert e.value.where == "m(h)"
