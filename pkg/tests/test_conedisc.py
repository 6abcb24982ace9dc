import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from properdisc.conedisc import (
    ClearanceError,
    build_proper_cone_disc,
    cross_critical_level,
    falsify_c_ge_1,
    flow,
    stage_eps,
    stage_levels,
)
from properdisc.corepoly import PolyMap
from properdisc.levigeom import rho_cone


def test_levels_and_eps():
    assert stage_levels(1.0, 0.2, 4)[3] == pytest.approx(1.728, abs=1e-12)
    assert stage_eps(0.1, 3)[2] == pytest.approx(0.025, abs=1e-15)


def test_flow_identity_and_closed_form():
    z = np.array([1 + 1j, 0])
    np.testing.assert_allclose(flow(0.5, z, 0.0), z)
    # oracle: ẋ = 2x, ẏ = -2cy  =>  x e^{2t} + i y e^{-2ct}
    np.testing.assert_allclose(flow(0.5, z, 1.0), [np.e ** 2 + 1j * np.e ** -1, 0], rtol=1e-14)


def test_flow_increases_rho():
    z = np.array([1, 3j])
    t = np.linspace(0, 2, 41)
    vals = [rho_cone(0.5, flow(0.5, z, s)) for s in t]
    assert np.all(np.diff(vals) > 0)


def test_cross_critical_level_example():
    f0 = PolyMap.from_components([0.1, 0.2], [0])
    T = f0.sample_circle(1.0, 512)
    assert np.min(rho_cone(0.5, T)) < 0
    res = cross_critical_level(f0, 0.5, 0.05, 0.5)
    assert res.ok, res.checks
    assert np.min(rho_cone(0.5, res.f1[-1])) > 0.05
    assert np.isfinite(res.params.defectNorm)
    # on T, f1 is the flow of f0 for the schedule's boundary time
    np.testing.assert_allclose(res.f1[-1], flow(0.5, res.f0[-1], res.params.schedule[-1]), rtol=1e-14)


def test_cross_constant_schedule():
    f0 = PolyMap.constant([0.3, 0.4j])
    res = cross_critical_level(f0, 0.5, 1.0, 0.5)
    A = res.params.schedule[-1]
    assert np.ptp(A) == 0
    np.testing.assert_allclose(res.f1[-1], flow(0.5, res.f0[-1], A[0]))
    inner = res.radii <= 0.5
    np.testing.assert_array_equal(res.f1[inner], res.f0[inner])


def test_cross_clearance_error():
    f0 = PolyMap.from_components([-1, 1], [0])       # vanishes at ζ = 1, a node
    with pytest.raises(ClearanceError):
        cross_critical_level(f0, 0.5, 0.1, 0.5)


def test_builder_rejects_c_ge_1():
    with pytest.raises(ValueError):
        build_proper_cone_disc(PolyMap.constant([2, 0]), 1.2, 1.0, 0.1, 0.5, 2)


def test_builder_levels_stored():
    seq = build_proper_cone_disc(PolyMap.from_components([1.5, 0.2], [0]), 0.5, 1.0, 0.1, 0.5, 1, a=0.2)
    assert seq.stages[0].M == 1.0 and seq.stages[0].eps == 0.1
    assert seq.ok


@pytest.fixture(scope="module")
def two_stage():
    h = PolyMap.from_components([1.5, 0.2], [0])
    return build_proper_cone_disc(h, 0.5, 1.0, 0.1, 0.5, 2)


def test_two_stage_run(two_stage):
    seq = two_stage
    assert seq.ok, seq.failure
    a = seq.params["a"]
    for k, s in enumerate(seq.stages, start=1):
        assert s.M == pytest.approx((1 + a) ** (k - 1))
        assert s.eps == pytest.approx(0.1 / 2 ** (k - 1))
    r = [s.r for s in seq.stages]
    assert all(0 < x < 1 for x in r) and np.all(np.diff(r) > 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 30), st.integers(0, 2 ** 31 - 1), st.sampled_from([1.0, 1.5]))
def test_falsify_mean_value(deg, seed, c):
    rng = np.random.default_rng(seed)
    f = PolyMap(rng.normal(size=(deg + 1, 2)) + 1j * rng.normal(size=(deg + 1, 2)))
    rep = falsify_c_ge_1(f, c)
    assert rep.ok, [ch for ch in rep.checks if not ch.passed]


def test_falsify_rejects_c_below_1():
    with pytest.raises(ValueError):
        falsify_c_ge_1(PolyMap.constant([1, 0]), 0.5)
