"""Lifting primitives: one polynomial map from a family of centred discs,
boundary pushing, the Levi-disc lift for ρ_c and the calibrated cone lift.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .corepoly import (
    Check,
    PolyMap,
    check_ge,
    check_gt,
    check_le,
    check_lt,
    circle_nodes,
    eval_circle_coeffs,
    next_pow2,
    riemann_map,
    sample_family,
    taylor_truncate,
)
from .levigeom import (
    ThresholdError,
    critical_system_solve_many,
    levi_chart,
    lifting_radius,
    multiplier,
    rho_cone,
    sublevel_component,
)

log = logging.getLogger(__name__)

MAX_DEGREE = 2 ** 16


class LiftError(ValueError):
    """Raised for violated preconditions or hypotheses; ``where`` names the condition."""

    def __init__(self, msg: str, where: str = ""):
        super().__init__(msg)
        self.where = where


@dataclass(frozen=True)
class DiscFamilySamples:
    """Taylor data of a family of discs λ_ζ with λ_ζ(0) = 0 at nodes on T.

    ``coeffs[i, j]`` (shape (n, J+1, 2)) is the w^j coefficient of λ_{ζ_i};
    ``scale`` is the inner rescaling s, so the family actually pushed is
    w -> λ_ζ(s w).  ``nodes`` are ``circle_nodes(n)``.
    """

    nodes: np.ndarray
    coeffs: np.ndarray
    scale: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] != len(self.nodes) or c.shape[2] != 2:
            raise ValueError("coeffs must have shape (nodes, J+1, 2)")
        a0 = float(np.max(np.abs(c[:, 0]))) if c.size else 0.0
        if a0 > 1e-10:
            raise ValueError(f"family does not vanish at w = 0 (|a_0| = {a0:.3e})")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def pushed(self) -> np.ndarray:
        """Coefficients of w -> λ(ζ, s w)."""
        j = np.arange(self.coeffs.shape[1]).reshape(1, -1, 1)
        return self.coeffs * self.scale ** j

    def evaluate(self, w) -> np.ndarray:
        """λ(ζ_i, s w_i) for per-node arguments w (shape (n, ...))."""
        w = np.asarray(w, dtype=complex)
        b = self.pushed
        out = np.zeros(w.shape + (2,), dtype=complex)
        ww = w.reshape(w.shape[0], -1)
        acc = np.zeros(ww.shape + (2,), dtype=complex)
        for j in range(b.shape[1] - 1, -1, -1):
            acc = acc * ww[..., None] + b[:, j][:, None, :]
        out[...] = acc.reshape(out.shape)
        return out

    def shifted_base(self) -> "DiscFamilySamples":
        return self


def family_from_callable(lam: Callable, n: int, nW: int = 128, s: float = 0.95,
                         order: int | None = None) -> DiscFamilySamples:
    nodes = circle_nodes(n)
    vals = sample_family(lam, nodes, nW, s)
    tc = taylor_truncate(vals, order if order is not None else nW // 2, s)
    return DiscFamilySamples(nodes, tc.coeffs, s)


@dataclass(frozen=True)
class LiftCertificate:
    kind: str
    checks: tuple
    grids: dict
    params: dict

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def check(self, name: str) -> Check:
        for ch in self.checks:
            if ch.name == name:
                return ch
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "checks": [ch.as_dict() for ch in self.checks],
            "grids": {k: self.grids[k] for k in sorted(self.grids)},
            "params": {k: self.params[k] for k in sorted(self.params)},
        }


def radii_ladder(r: float, K: int, n_uniform: int = 8, n_edge: int = 24) -> np.ndarray:
    """Radii in [r, 1]: a uniform set plus a ladder 1 - x/K resolving the
    boundary layer where ζ^K changes from negligible to unimodular."""
    uni = np.linspace(r, 1.0, n_uniform)
    K = max(int(K), 1)
    edge = 1.0 - np.geomspace(0.02, 40.0, n_edge) / K
    edge = edge[(edge > r) & (edge < 1.0)]
    return np.unique(np.concatenate([uni, edge]))


def verification_size(degree: int, minimum: int = 512) -> int:
    return max(minimum, next_pow2(4 * (degree + 1)))


# --------------------------------------------------------------------------
# one polynomial map from a family of discs
# --------------------------------------------------------------------------


def _tail_band(F: np.ndarray, n: int, budget: float) -> tuple[int, int]:
    """Smallest (M, N) whose dropped DFT mass stays below ``budget``.

    F is the DFT (axis 0 = frequency index mod n) of every coefficient series;
    the sup over all series of the dropped absolute mass is bounded.
    """
    mag = np.abs(F).reshape(n, -1).max(axis=1)
    half = n // 2
    pos = mag[: half]                    # frequencies 0..half-1
    neg = mag[half:][::-1]               # frequencies -1..-half
    best = None
    cum_pos = np.cumsum(pos[::-1])[::-1]  # mass at frequencies >= k
    cum_neg = np.cumsum(neg[::-1])[::-1]  # mass at frequencies <= -(k+1)
    for N in range(half):
        tail_p = cum_pos[N + 1] if N + 1 < half else 0.0
        if tail_p > budget:
            continue
        rem = budget - tail_p
        M = 0
        while M < half and cum_neg[M] > rem:
            M += 1
        cand = (M + N, M, N)
        if best is None or cand < best:
            best = cand
        if M == 0:
            break
    if best is None:
        return half, half - 1
    return best[1], best[2]


@dataclass(frozen=True)
class DiscApproximation:
    h: PolyMap
    cert: LiftCertificate
    K: int
    M: int
    N: int
    J: int


def approx_disc_family(family: DiscFamilySamples, eps: float, r: float,
                       max_degree: int = MAX_DEGREE, K0: int | None = None,
                       fit_stride: int = 2) -> DiscApproximation:
    """h(ζ) = λ̃(ζ, ζ^K) from the family, with K doubled until certified.

    The family is fitted on every ``fit_stride``-th node and verified on all
    nodes, so the verification grid is the doubled fitting grid.
    """
    if not eps > 0:
        raise LiftError("eps must be positive", "eps")
    if not 0 < r < 1:
        raise LiftError("r must lie in (0, 1)", "r")
    b = family.pushed
    n_all = family.n
    n_fit = n_all // fit_stride
    fit = b[::fit_stride]
    # Taylor order: drop the w-tail whose sup over |w| <= 1 is below eps/8
    mag_j = np.abs(b).max(axis=(0, 2))
    tail = np.cumsum(mag_j[::-1])[::-1]
    J = int(np.argmax(np.append(tail, 0.0)[1:] <= eps / 8.0))
    J = max(J, 1)
    fitJ = fit[:, 1: J + 1]                       # (n_fit, J, 2)
    F = np.fft.fft(fitJ, axis=0) / n_fit
    M, N = _tail_band(F, n_fit, eps / (8.0 * J))
    resolved = n_fit > 2 * (M + N)
    idx = np.arange(-M, N + 1) % n_fit
    C = F[idx]                                    # (M+N+1, J, 2): freq m -> C[m+M, j-1]
    bound = np.abs(C).sum(axis=0).max(axis=1)     # sup of |a_j| per j
    # smallest K >= M with the coefficient bound of |h| on |ζ| = r below eps/2
    if K0 is None:
        K = max(M, 1)
        while True:
            m = np.arange(-M, N + 1)
            est = 0.0
            for j in range(1, J + 1):
                est += float(np.sum(np.abs(C[:, j - 1]).max(axis=1) * r ** (j * K + m)))
            if est < eps / 2 or J * K + N > max_degree:
                break
            K *= 2
    else:
        K = max(int(K0), M)
    best = None
    while True:
        deg = J * K + N
        coeffs = np.zeros((deg + 1, 2), dtype=complex)
        for j in range(1, J + 1):
            exps = j * K + np.arange(-M, N + 1)
            coeffs[exps] += C[:, j - 1]
        h = PolyMap(coeffs)
        checks, grids = _certify_family_push(h, family, eps, r, K)
        if not resolved:
            checks = checks + (check_lt("laurent_band_resolved", 2 * (M + N), n_fit),)
        cert = LiftCertificate(
            "approx_disc_family", checks, grids,
            {"eps": eps, "r": r, "K": K, "M": M, "N": N, "J": J, "degree": deg,
             "family_nodes": n_all, "fit_nodes": n_fit, "scale": family.scale})
        best = DiscApproximation(h, cert, K, M, N, J)
        if cert.passed or 2 * J * K + N > max_degree or not resolved:
            return best
        K *= 2


def _certify_family_push(h: PolyMap, family: DiscFamilySamples, eps: float, r: float, K: int):
    n = family.n
    nodes = family.nodes
    deg = h.degree
    # (i) on T: the candidate preimage ζ^K gives an upper bound for the distance
    hT = h.sample_circle(1.0, n)
    lamT = family.evaluate(nodes ** K)
    d1 = float(np.max(np.linalg.norm(hT - lamT, axis=1)))
    # (ii) on r <= t <= 1 along the node rays
    radii = radii_ladder(r, K)
    d2 = 0.0
    for t in radii:
        ht = h.sample_circle(t, n)
        wt = (t * nodes) ** K
        lt = family.evaluate(wt)
        d2 = max(d2, float(np.max(np.linalg.norm(ht - lt, axis=1))))
    # (iii) |h| < eps on |ζ| <= r (maximum principle: the circle suffices)
    nv = verification_size(deg)
    d3 = float(np.max(np.linalg.norm(h.sample_circle(r, nv), axis=1)))
    checks = (
        check_lt("(i) dist(h, λ_ζ(T)) on T", d1, eps),
        check_lt("(ii) dist(h(tζ), λ_ζ(Ū)) on r<=t<=1", d2, eps),
        check_lt("(iii) |h| on |ζ|<=r", d3, eps),
    )
    grids = {"family_nodes": n, "radii": len(radii), "inner_circle_nodes": nv}
    return checks, grids


# --------------------------------------------------------------------------
# pushing a boundary
# --------------------------------------------------------------------------


def _as_level(C, nodes_or_points, g0: PolyMap):
    if callable(C):
        return np.asarray(C(nodes_or_points), dtype=float)
    return np.full(np.shape(nodes_or_points), float(C))


@dataclass(frozen=True)
class PushResult:
    g: PolyMap
    g0_approx: PolyMap
    h: PolyMap
    cert: LiftCertificate
    approx: DiscApproximation


def push_boundary(g0: PolyMap, family: DiscFamilySamples, rho: Callable, C0, C1,
                  eps: float, r: float, band: float | None = None,
                  max_degree: int = MAX_DEGREE, n_radii_check: int = 8,
                  attempts: int = 6) -> PushResult:
    """g = g̃0 + h with h from ``approx_disc_family``.

    ``C0`` and ``C1`` may be constants or callables of ζ (levels that vary
    along the circle, as in the Levi lift).  Hypotheses (a) level band on
    w ∈ T, (b) ρ > C0 on w ∈ Ū, (c) ρ(g0) > C0 on r <= |ζ| <= 1 are checked on
    the input grids first; conclusions (i)-(iii) are certified on
    refinement grids of the result.
    """
    if not eps > 0:
        raise LiftError("eps must be positive", "eps")
    if band is None:
        band = eps / 2
    nodes = family.nodes
    n = family.n
    base = g0(nodes)
    nW = 256
    wT = circle_nodes(nW)
    discT = family.evaluate(np.broadcast_to(wT, (n, nW)))
    vals = rho(base[:, None, :] + discT)
    lvl1 = _as_level(C1, nodes, g0)
    dev_a = float(np.max(np.abs(vals - lvl1[:, None])))
    if dev_a > band:
        raise LiftError(f"hypothesis (a) fails: level deviation {dev_a:.3e} > band {band:.3e}", "(a)")
    lvl0 = _as_level(C0, nodes, g0)
    worst_b = np.inf
    for t in np.linspace(0.0, 1.0, n_radii_check + 1):
        vb = rho(base[:, None, :] + family.evaluate(np.broadcast_to(t * wT, (n, nW))))
        worst_b = min(worst_b, float(np.min(vb - lvl0[:, None])))
    if worst_b <= 0:
        raise LiftError(f"hypothesis (b) fails: min ρ(g0+λ) - C0 = {worst_b:.3e}", "(b)")
    worst_c = np.inf
    nv0 = verification_size(g0.degree)
    for t in radii_ladder(r, 1):
        z = circle_nodes(nv0, t)
        worst_c = min(worst_c, float(np.min(rho(g0.sample_circle(t, nv0)) - _as_level(C0, z, g0))))
    if worst_c <= 0:
        raise LiftError(f"hypothesis (c) fails: min ρ(g0) - C0 = {worst_c:.3e}", "(c)")

    g0_approx = g0  # already a polynomial: the approximation error is zero
    eps_h = eps
    res = None
    for _ in range(attempts):
        ap = approx_disc_family(family, eps_h, r, max_degree=max_degree)
        g = g0_approx + ap.h
        checks, grids = _certify_push(g, g0, ap, rho, C0, C1, eps, r)
        checks = (check_le("g0 approximation error", 0.0, eps / 2),) + checks + ap.cert.checks
        cert = LiftCertificate("push_boundary", checks, grids,
                               {"eps": eps, "eps_h": eps_h, "r": r, "band": band,
                                "hyp_a_dev": dev_a, "hyp_b_margin": worst_b,
                                "hyp_c_margin": worst_c, **{f"approx_{k}": v for k, v in ap.cert.params.items()}})
        res = PushResult(g, g0_approx, ap.h, cert, ap)
        if cert.passed:
            return res
        bad_approx = not all(ch.passed for ch in ap.cert.checks)
        if bad_approx and ap.cert.params["degree"] * 2 > max_degree:
            return res
        eps_h *= 0.5
    return res


def _certify_push(g, g0, ap, rho, C0, C1, eps, r):
    deg = g.degree
    nv = verification_size(deg)
    zT = circle_nodes(nv)
    rT = rho(g.sample_circle(1.0, nv))
    d1 = float(np.max(np.abs(rT - _as_level(C1, zT, g0))))
    worst2 = np.inf
    radii = radii_ladder(r, ap.K)
    for t in radii:
        z = circle_nodes(nv, t)
        worst2 = min(worst2, float(np.min(rho(g.sample_circle(t, nv)) - _as_level(C0, z, g0))))
    d3 = float(np.max(np.linalg.norm((g - g0).sample_circle(r, nv), axis=1)))
    checks = (
        check_lt("(i) |ρ(g) - C1| on T", d1, eps),
        check_gt("(ii) ρ(g) - C0 on r<=|ζ|<=1", worst2, 0.0),
        check_lt("(iii) |g - g0| on |ζ|<=r", d3, eps),
    )
    return checks, {"theta_nodes": nv, "radii": len(radii)}


# --------------------------------------------------------------------------
# Levi-disc lift and cone lift for ρ_c
# --------------------------------------------------------------------------


def _pole_clearance(chart, dom) -> float:
    poles = chart.poles
    if poles.size == 0:
        return np.inf
    gap = np.min(np.abs(dom.boundary[:, None] - poles[None, :]))
    return float(gap / dom.diameter)


def levi_disc(c: float, z, C: float, threshold: float | None = None,
              n_boundary: int = 256, rm_tol: float = 1e-3, panels: int = 256):
    """Centred parametrisation w -> λ(w) of B(z; C) with λ(0) = 0.

    Built as chart.w ∘ φ where φ is the certified Riemann map of the chart
    component.  The normalised λ does not depend on the chart, so the chart
    whose poles stay farthest from the component (relative to its size) is
    used.  λ is rotated so that λ'(0) is a positive multiple of the unit
    tangent (-h2, h1)/|h| of Λ_z, which keeps the family continuous in z.
    """
    best = None
    last_err = None
    for name in ("auto", "iso"):
        try:
            ch = levi_chart(c, z, chart=name)
            dom = sublevel_component(ch, C, n_boundary=n_boundary, threshold=threshold)
        except ThresholdError:
            raise
        except ValueError as e:
            last_err = e
            continue
        score = _pole_clearance(ch, dom)
        if best is None or score > best[0]:
            best = (score, ch, dom)
    if best is None:
        raise LiftError(f"no chart traces B(z; C): {last_err}", "chart")
    _, chart, dom = best
    phi = riemann_map(dom, tol=rm_tol, panels=panels, max_nodes=1024)
    if not phi.ok:
        raise LiftError("conformal certification failed for a Levi disc", "riemann_map")
    # pin φ(0) to the marked centre; the shift is the certified centre error
    c0 = phi.coeffs.copy()
    c0[0] = chart.u0
    phi = type(phi)(c0, phi.center, phi.checks, phi.ok, phi.interp_nodes)
    h1, h2 = chart.h
    t = np.array([-h2, h1]) / np.hypot(abs(h1), abs(h2))
    d0 = chart.dw(np.array([chart.u0]))[0] * phi.coeffs[1]
    alpha = np.vdot(t, d0)
    phi = phi.rotated(-np.angle(alpha))

    def lam(w):
        return chart.w(phi(w))

    return lam, chart, phi


def _levi_family(g0: PolyMap, c: float, Cfun: Callable, n: int, nW: int, shrink: float,
                 thresholds: np.ndarray | None = None, rm_tol: float = 1e-3):
    nodes = circle_nodes(n)
    Z = g0(nodes)
    Cv = shrink * np.asarray(Cfun(nodes), dtype=float)
    if thresholds is None:
        sets = critical_system_solve_many(c, Z)
        thresholds = np.array([s.threshold for s in sets])
    samples = np.empty((n, nW, 2), dtype=complex)
    w = circle_nodes(nW)
    for i in range(n):
        try:
            lam, _, _ = levi_disc(c, Z[i], Cv[i], threshold=thresholds[i], rm_tol=rm_tol)
        except ThresholdError as e:
            raise LiftError(f"node {i}: {e}", "threshold") from e
        samples[i] = lam(w)
    tc = taylor_truncate(samples, nW // 2, 1.0, tol=1e-9)
    return DiscFamilySamples(nodes, tc.coeffs, 1.0, {"C": Cv, "thresholds": thresholds})


@dataclass(frozen=True)
class LiftResult:
    g: PolyMap
    cert: LiftCertificate
    family: DiscFamilySamples | None = None
    push: PushResult | None = None


def family_size(g0: PolyMap, minimum: int = 64, factor: int = 8) -> int:
    return max(minimum, next_pow2(factor * (g0.degree + 1)))


def lift_step_levi(g0: PolyMap, c: float, C: Callable, eps: float, r: float,
                   shrink: float = 0.95, n_family: int | None = None, nW: int = 256,
                   max_degree: int = MAX_DEGREE, max_family: int = 2 ** 10,
                   rm_tol: float = 1e-3) -> LiftResult:
    """Lift ρ_c along g0(T) by (about) C(ζ) with Levi discs.

    The target actually used is the slightly decreased level shrink·C(ζ);
    conclusions: (i) |ρ(g) - ρ(g0) - shrink·C| < eps on T,
    (ii) ρ(g) > ρ(g0) - eps on Ū, (iii) |g - g0| < eps on |ζ| <= r.
    The family grid doubles while the Laurent band of the family is not
    resolved, up to ``max_family`` nodes.
    """
    if c >= 1:
        raise LiftError("lift_step_levi needs c < 1", "c")
    if not eps > 0:
        raise LiftError("eps must be positive", "eps")
    nv0 = verification_size(g0.degree)
    ring = g0.sample_circle(1.0, nv0)
    if np.min(np.linalg.norm(ring, axis=1)) <= 1e-12:
        raise LiftError("g0(T) passes through the critical point 0", "critical")
    if np.min(C(circle_nodes(nv0))) <= 0:
        raise LiftError("C must be positive on T", "C")
    rho = lambda z: rho_cone(c, z)  # noqa: E731
    base_rho = lambda zeta: rho_cone(c, g0(zeta))  # noqa: E731
    C1 = lambda zeta: base_rho(zeta) + shrink * np.asarray(C(zeta), dtype=float)  # noqa: E731
    C0 = lambda zeta: base_rho(zeta) - eps  # noqa: E731
    n = n_family or family_size(g0)
    if n > max_family:
        raise LiftError(f"family needs {n} nodes for a degree-{g0.degree} map; budget is {max_family}",
                        "family_budget")
    push = None
    fam = None
    while True:
        fam = _levi_family(g0, c, C, n, nW, shrink, rm_tol=rm_tol)
        try:
            push = push_boundary(g0, fam, rho, C0, C1, eps, r, band=eps / 4, max_degree=max_degree)
        except LiftError as e:
            if e.where == "(a)" and 2 * n <= max_family:
                n *= 2
                continue
            raise
        ap = push.approx
        if not ap.cert.passed and 2 * (ap.M + ap.N) >= ap.cert.params["fit_nodes"] and 2 * n <= max_family:
            n *= 2
            continue
        break
    g = push.g
    # the lower bound on the whole closed disc
    nv = verification_size(g.degree)
    worst = np.inf
    for t in np.unique(np.concatenate([np.linspace(0.0, 1.0, 9)[1:], radii_ladder(r, push.approx.K)])):
        z = circle_nodes(nv, t)
        worst = min(worst, float(np.min(rho(g.sample_circle(t, nv)) - base_rho(z) + eps)))
    z0 = rho(g(np.array([0.0]))) - rho(g0(np.array([0.0]))) + eps
    worst = min(worst, float(z0[0]))
    checks = tuple(
        Check("levi lift |ρ(g)-ρ(g0)-C̃| on T", ch.relation, ch.target, ch.achieved, ch.passed)
        if ch.name.startswith("(i) |ρ(g)") else ch for ch in push.cert.checks
    ) + (check_gt("levi lift ρ(g)-ρ(g0)+eps on Ū", worst, 0.0),)
    cert = LiftCertificate("lift_step_levi", checks, dict(push.cert.grids, family_nodes=n),
                           dict(push.cert.params, c=c, shrink=shrink))
    return LiftResult(g, cert, fam, push)


def m_value(c: float, g: PolyMap, n: int | None = None) -> float:
    n = n or verification_size(g.degree)
    return float(np.min(rho_cone(c, g.sample_circle(1.0, n))))


def lift_step_cone(h: PolyMap, c: float, eps: float, r: float, a: float | None = None,
                   shrink: float = 0.95, **kw) -> LiftResult:
    """Lift with C(ζ) = a(c)·ρ_c(h(ζ)); certifies m(g) >= (1+a) m(h) - eps_cert
    with eps_cert = eps + (1 - shrink)·a·m(h) (the slack of the decreased level)."""
    if c >= 1:
        raise LiftError("lift_step_cone needs c < 1", "c")
    mh = m_value(c, h)
    if mh <= 0:
        raise LiftError(f"m(h) = {mh:.3e} must be positive", "m(h)")
    if a is None:
        a = lifting_radius(c).a
    Cfun = lambda zeta: a * rho_cone(c, h(zeta))  # noqa: E731
    res = lift_step_levi(h, c, Cfun, eps, r, shrink=shrink, **kw)
    mg = m_value(c, res.g)
    eps_cert = eps + (1.0 - shrink) * a * mh
    checks = res.cert.checks + (check_ge("cone lift m(g) vs (1+a)m(h)-eps_cert", mg, (1 + a) * mh - eps_cert),)
    cert = LiftCertificate("lift_step_cone", checks, res.cert.grids,
                           dict(res.cert.params, a=a, m_h=mh, m_g=mg, eps_cert=eps_cert))
    return LiftResult(res.g, cert, res.family, res.push)
