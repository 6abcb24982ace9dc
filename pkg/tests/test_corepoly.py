import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from properdisc.corepoly import (
    BoundaryGrid,
    LaurentCoeffs,
    PlanarDomain,
    PolyMap,
    check_lt,
    circle_nodes,
    eval_and_sample,
    eval_circle_coeffs,
    riemann_map,
    sample_family,
    taylor_truncate,
    trig_approx,
    winding_number,
)

cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def horner(c, z):
    out = np.zeros_like(z)
    for ck in c[::-1]:
        out = out * z + ck
    return out


# --- PolyMap ----------------------------------------------------------------


def test_polymap_rejects_nonfinite():
    with pytest.raises(ValueError):
        PolyMap([[1, np.nan]])


def test_degree_and_constant():
    assert PolyMap.constant([1, 2]).degree == 0
    assert PolyMap.from_components([0, 0, 3], [1]).degree == 2


def test_eval_point():
    P = PolyMap.from_components([1], [0, 1])
    np.testing.assert_allclose(P(np.array([1j])), [[1, 1j]])


def test_eighth_roots():
    g = eval_and_sample(PolyMap.from_components([0, 1], [0]), [1.0], 8)[0]
    np.testing.assert_allclose(g.values[:, 0], np.exp(2j * np.pi * np.arange(8) / 8), atol=1e-15)


def test_sample_count():
    grids = eval_and_sample(PolyMap.from_components([0, 1], [1]), [0.5, 1.0], 4)
    assert sum(len(g.values) for g in grids) == 8


def test_non_pow2_rejected():
    with pytest.raises(ValueError):
        eval_and_sample(PolyMap.constant([1, 1]), [1.0], 6)
    with pytest.raises(ValueError):
        BoundaryGrid(6, 1.0, np.zeros(6))


@settings(max_examples=40, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=40), st.floats(0.1, 1.0), st.sampled_from([4, 16, 64]))
def test_folded_fft_matches_horner(coeffs, r, n):
    c = np.array(coeffs)
    z = circle_nodes(n, r)
    got = eval_circle_coeffs(c, r, n)
    np.testing.assert_allclose(got, horner(c, z), atol=1e-9 * max(1, np.abs(c).sum()))


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=8), st.lists(cplx, min_size=1, max_size=8))
def test_addition_is_pointwise(a, b):
    P = PolyMap.from_components(a, b)
    Q = PolyMap.from_components(b, a)
    z = circle_nodes(16, 0.7)
    np.testing.assert_allclose((P + Q)(z), P(z) + Q(z), atol=1e-9)
    np.testing.assert_allclose((P - Q)(z), P(z) - Q(z), atol=1e-9)


# --- Laurent / Taylor -------------------------------------------------------


def test_laurent_monomial():
    z = circle_nodes(64)
    fit = trig_approx(BoundaryGrid(64, 1.0, 1 / z), 1, 4, 1e-12)
    c = fit.laurent
    assert abs(c.coefficient(-1) - 1) < 1e-12
    others = np.delete(c.coeffs, 0)
    assert np.max(np.abs(others)) <= 1e-12


def test_laurent_constant():
    fit = trig_approx(BoundaryGrid(32, 1.0, np.full(32, 3.0 + 0j)), 2, 3, 1e-12)
    assert abs(fit.laurent.coefficient(0) - 3) < 1e-12
    assert fit.sup_error <= 1e-12


def test_laurent_geometric_series():
    # oracle: 1/(2 - ζ) = Σ 2^{-(k+1)} ζ^k on |ζ| = 1
    f = lambda z: 1 / (2 - z)  # noqa: E731
    z = circle_nodes(256)
    fit = trig_approx(BoundaryGrid(256, 1.0, f(z)), 0, 20, 1e-5, func=f)
    k = np.arange(21)
    np.testing.assert_allclose(fit.laurent.coeffs, 2.0 ** -(k + 1), atol=1e-10)
    assert fit.sup_error <= 1e-5
    assert fit.ok


def test_laurent_band_too_wide():
    with pytest.raises(ValueError):
        trig_approx(BoundaryGrid(8, 1.0, np.zeros(8)), 3, 3, 1e-3)


def test_laurent_eval_negative_powers():
    c = LaurentCoeffs(2, np.array([1.0, 0, 0, 0, 2.0]))
    z = np.array([0.5 + 0.5j])
    np.testing.assert_allclose(c(z), z ** -2 + 2 * z ** 2)


def test_taylor_monomial():
    nodes = circle_nodes(8)
    s = sample_family(lambda Z, W: np.stack([W, 0 * W], -1), nodes, 32, 0.95)
    tc = taylor_truncate(s, 8, 0.95)
    np.testing.assert_allclose(tc.coeffs[:, 1, 0], 1, atol=1e-12)
    assert np.max(np.abs(tc.coeffs[:, 2:, :])) < 1e-12


def test_taylor_node_dependent():
    nodes = circle_nodes(8)
    s = sample_family(lambda Z, W: np.stack([np.conj(Z) * W ** 2, 0 * W], -1), nodes, 32, 0.95)
    tc = taylor_truncate(s, 6, 0.95)
    np.testing.assert_allclose(tc.coeffs[:, 2, 0], np.conj(nodes), atol=1e-12)


def test_taylor_sine():
    # oracle: sin w = w - w³/6 + w⁵/120 - ...
    nodes = circle_nodes(4)
    s = sample_family(lambda Z, W: np.stack([np.sin(W), 0 * W], -1), nodes, 64, 0.95)
    tc = taylor_truncate(s, 10, 0.95)
    a = tc.coeffs[0, :, 0]
    assert abs(a[1] - 1) < 1e-10 and abs(a[2]) < 1e-10 and abs(a[3] + 1 / 6) < 1e-10


def test_taylor_requires_centering():
    nodes = circle_nodes(4)
    s = sample_family(lambda Z, W: np.stack([1 + W, 0 * W], -1), nodes, 16, 0.9)
    with pytest.raises(ValueError, match="vanish"):
        taylor_truncate(s, 4, 0.9)


# --- planar domains and Riemann maps ----------------------------------------


def test_domain_validation():
    with pytest.raises(ValueError):
        PlanarDomain(np.array([0, 1, 1 + 1j, 0.0 + 0j, 1j]), 0.5 + 0.5j)  # self-touching
    with pytest.raises(ValueError):
        PlanarDomain(circle_nodes(64), 3.0)


def test_winding():
    assert abs(winding_number(circle_nodes(128), 0.1) - 1) < 1e-12
    assert abs(winding_number(circle_nodes(128), 2.0)) < 1e-12


def test_riemann_unit_disc():
    m = riemann_map(PlanarDomain.disc(0, 1, 4096), tol=1e-6)
    assert m.ok
    c = m.coeffs
    assert abs(abs(c[1]) - 1) < 1e-5
    assert np.max(np.abs(np.delete(c, 1))) < 1e-5


def test_riemann_affine():
    m = riemann_map(PlanarDomain.disc(1, 2, 4096), tol=1e-5)
    assert m.ok
    assert abs(m.coeffs[0] - 1) < 1e-5
    assert abs(abs(m.coeffs[1]) - 2) < 1e-4
    assert np.max(np.abs(m.coeffs[2:])) < 1e-4


def test_riemann_square_certifies():
    sq = np.concatenate([np.linspace(-1, 1, 64, endpoint=False) - 1j,
                         1 + 1j * np.linspace(-1, 1, 64, endpoint=False),
                         np.linspace(1, -1, 64, endpoint=False) + 1j,
                         -1 + 1j * np.linspace(1, -1, 64, endpoint=False)])
    m = riemann_map(PlanarDomain(sq, 0.0), tol=5e-3)
    assert m.ok
    names = {ch.name for ch in m.checks}
    assert {"boundary_distance_rel", "center_error", "winding_number", "min_abs_derivative"} <= names


def test_check_semantics():
    assert check_lt("x", 1.0, 2.0).passed
    assert not check_lt("x", np.nan, 2.0).passed
