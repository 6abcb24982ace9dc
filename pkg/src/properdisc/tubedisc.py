"""Discs for ρ = max(x1, x2): the model tube disc Γ_ε, discs through a point,
the tube lift step, the axis-avoiding builder and exponentiation to (C*)².
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .conedisc import Stage, StageSequence
from .corepoly import (
    Check,
    PlanarDomain,
    PolyMap,
    check_ge,
    check_gt,
    check_le,
    check_lt,
    circle_nodes,
    next_pow2,
    riemann_map,
    taylor_truncate,
)
from .liftengine import (
    MAX_DEGREE,
    DiscFamilySamples,
    LiftCertificate,
    LiftError,
    LiftResult,
    family_size,
    push_boundary,
    radii_ladder,
    verification_size,
)

log = logging.getLogger(__name__)


def rho_max(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.maximum(z[..., 0].real, z[..., 1].real)


# --------------------------------------------------------------------------
# the model disc Γ_ε
# --------------------------------------------------------------------------


def F_eps(eps: float, x1, x2):
    return x1 + x2 - eps * (x1 ** 2 + x2 ** 2) - 1.0 + eps


def G_eps(eps: float, x1, y1, x2):
    ratio = (1.0 - 2 * eps * x1) / (1.0 - 2 * eps * x2)
    return x1 + x2 - eps * (x1 ** 2 + x2 ** 2) + eps * y1 ** 2 * (1.0 + ratio ** 2) - 1.0 + eps


def dG_dx2(eps: float, x1, y1, x2):
    d = 1.0 - 2 * eps * x2
    return 1.0 - 2 * eps * x2 + 4 * eps ** 2 * y1 ** 2 * (1.0 - 2 * eps * x1) ** 2 / d ** 3


def dG_dx1(eps: float, x1, y1, x2):
    d = 1.0 - 2 * eps * x2
    return 1.0 - 2 * eps * x1 - 4 * eps ** 2 * y1 ** 2 * (1.0 - 2 * eps * x1) / d ** 2


def system_residual(eps: float, z1, z2) -> np.ndarray:
    """Max of the two real equations of the Γ_ε system, per point."""
    x1, y1, x2, y2 = z1.real, z1.imag, z2.real, z2.imag
    r1 = x1 + x2 - eps * (x1 ** 2 + x2 ** 2) + eps * (y1 ** 2 + y2 ** 2) - 1.0 + eps
    r2 = (1 - 2 * eps * x1) * y1 + (1 - 2 * eps * x2) * y2
    return np.maximum(np.abs(r1), np.abs(r2))


def a_eps(eps: float) -> float:
    """Positive root of 2 ε a² - 1 + ε = 0."""
    return float(np.sqrt((1.0 - eps) / (2.0 * eps)))


def h_eps(eps: float, x1):
    """γ_ε as a graph x2 = h_ε(x1) over [0, 1]."""
    x1 = np.asarray(x1, dtype=float)
    q = 1.0 - eps - x1 + eps * x1 ** 2
    return 2.0 * q / (1.0 + np.sqrt(1.0 - 4.0 * eps * q))


class InadmissibleEps(ValueError):
    pass


def _bisect(fun, lo, hi, iters=64):
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def xi_eps(eps: float, x1, y1, newton: int = 2) -> np.ndarray:
    """x2 = ξ_ε(x1, y1) in [0, 1] from G_ε = 0.

    The bracket [0, 1] is valid because ∂G_ε/∂x2 > 0 there; this is asserted
    at both endpoints before bisecting, followed by a Newton polish.
    """
    x1 = np.asarray(x1, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    x1, y1 = np.broadcast_arrays(x1, y1)
    zero, one = np.zeros_like(x1), np.ones_like(x1)
    if not (np.all(dG_dx2(eps, x1, y1, zero) > 0) and np.all(dG_dx2(eps, x1, y1, one) > 0)):
        raise InadmissibleEps(f"∂G/∂x2 is not positive on the bracket for ε = {eps}")
    g0 = G_eps(eps, x1, y1, zero)
    g1 = G_eps(eps, x1, y1, one)
    tol = 1e-12
    if np.any(g0 > tol) or np.any(g1 < -tol):
        raise ValueError("ξ_ε: root not bracketed in [0, 1] (point outside the closed disc)")
    x2 = _bisect(lambda t: G_eps(eps, x1, y1, t), zero, one)
    for _ in range(newton):
        step = G_eps(eps, x1, y1, x2) / dG_dx2(eps, x1, y1, x2)
        x2 = np.clip(x2 - step, 0.0, 1.0)
    return x2


def y2_eps(eps: float, x1, y1, x2):
    return -y1 * (1.0 - 2 * eps * x1) / (1.0 - 2 * eps * x2)


def graph_eps(eps: float, z1) -> np.ndarray:
    """z2 = f_ε(z1) = ξ_ε + i y2 for z1 in the closed disc D̄_ε."""
    z1 = np.asarray(z1, dtype=complex)
    x1 = np.clip(z1.real, 0.0, 1.0)
    x2 = xi_eps(eps, x1, z1.imag)
    return x2 + 1j * y2_eps(eps, x1, z1.imag, x2)


def graph_eps_analytic(eps: float, z1) -> np.ndarray:
    """The same branch of F_ε(z1, z2) = 0 by the quadratic formula; it extends
    holomorphically past D̄_ε and is cross-checked against ``graph_eps``."""
    z1 = np.asarray(z1, dtype=complex)
    q = 1.0 - eps - z1 + eps * z1 ** 2
    return 2.0 * q / (1.0 + np.sqrt(1.0 - 4.0 * eps * q))


def sigma_eps(eps: float, y1) -> np.ndarray:
    """x1 = g_ε(y1) on σ_ε, |y1| <= a_ε (bisection, ∂G/∂x1 > 0)."""
    y1 = np.asarray(y1, dtype=float)
    zero = np.zeros_like(y1)
    if not np.all(dG_dx1(eps, np.linspace(0, 1, 33)[:, None], y1[None, :], 0.0) > 0):
        raise InadmissibleEps(f"∂G/∂x1 is not positive along x2 = 0 for ε = {eps}")
    return _bisect(lambda t: G_eps(eps, t, y1, zero), zero, np.ones_like(y1))


@dataclass(frozen=True)
class ModelDisc:
    eps: float
    a: float
    curve_x1: np.ndarray
    curve_h: np.ndarray
    domain: PlanarDomain
    boundary_z1: np.ndarray
    boundary_z2: np.ndarray
    grid_z1: np.ndarray
    grid_z2: np.ndarray
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def graph(self, z1) -> np.ndarray:
        return graph_eps(self.eps, z1)


def _boundary_d_eps(eps: float, n: int):
    """Counter-clockwise polyline of ∂D_ε: σ_ε upward, then x1 = 0 downward.
    Parameters are cosine-spaced so samples cluster at the two corners."""
    a = a_eps(eps)
    n_s = n // 2
    n_l = n - n_s
    t = np.cos(np.pi * (np.arange(n_s) + 0.5) / n_s)[::-1]
    ys = a * t
    xs = sigma_eps(eps, ys)
    right = xs + 1j * ys
    t2 = np.cos(np.pi * np.arange(n_l) / n_l)
    left = 1j * a * t2
    return np.concatenate([right, left]), right, left


def model_disc(eps: float, n_boundary: int = 512, n_interior: int = 512, n_curve: int = 257) -> ModelDisc:
    if not 0 < eps < 0.5:
        raise InadmissibleEps("ε must lie in (0, 1/2)")
    a = a_eps(eps)
    bnd, right, left = _boundary_d_eps(eps, n_boundary)
    dom = PlanarDomain(bnd, complex(0.5 * sigma_eps(eps, np.array([0.0]))[0]))
    bz2 = graph_eps(eps, bnd)
    # interior: a tensor grid in (x1 / g_ε(y1), y1 / a) mapped into D_ε
    m = int(np.ceil(np.sqrt(n_interior)))
    u = (np.arange(m) + 0.5) / m
    v = -1.0 + 2.0 * (np.arange(m) + 0.5) / m
    yy = a * v
    gx = sigma_eps(eps, yy)
    Z1 = (u[:, None] * gx[None, :]) + 1j * yy[None, :]
    gz1 = Z1.ravel()[:n_interior]
    gz2 = graph_eps(eps, gz1)
    cx = np.linspace(0.0, 1.0, n_curve)
    ch = h_eps(eps, cx)
    res_b = float(np.max(system_residual(eps, bnd, bz2)))
    res_i = float(np.max(system_residual(eps, gz1, gz2)))
    # x-part of the boundary on k
    on_left = np.abs(left.real)
    off_k = max(float(np.max(on_left)), float(np.max(np.abs(bz2[: right.size].real))))
    y2 = bz2.imag ** 2 + bnd.imag ** 2
    xi_real = xi_eps(eps, cx, np.zeros_like(cx))
    checks = (
        check_le("system residual on boundary", res_b, 1e-9),
        check_le("system residual on interior", res_i, 1e-9),
        check_le("boundary x-part off k", off_k, 1e-8),
        check_le("|y|² - 1/ε on boundary", float(np.max(y2)) - 1.0 / eps, 1e-8),
        check_le("real trace vs γ_ε", float(np.max(np.abs(xi_real - ch))), 1e-9),
        check_le("|ξ(1,0)|", float(abs(xi_eps(eps, 1.0, 0.0))), 1e-10),
        check_le("|ξ(0,0) - 1|", float(abs(xi_eps(eps, 0.0, 0.0) - 1.0)), 1e-10),
        check_le("analytic branch vs ξ", float(np.max(np.abs(graph_eps_analytic(eps, gz1) - gz2))), 1e-9),
    )
    return ModelDisc(eps, a, cx, ch, dom, bnd, bz2, gz1, gz2, checks)


def largest_admissible_eps(grid=None) -> float:
    """Largest ε on a scan grid whose model disc certifies."""
    grid = np.linspace(0.02, 0.48, 24) if grid is None else grid
    best = 0.0
    for e in grid:
        try:
            if model_disc(float(e), 128, 64).ok:
                best = float(e)
        except (InadmissibleEps, ValueError):
            continue
    return best


# --------------------------------------------------------------------------
# discs through a point (chord triangle)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChordTriangle:
    z: tuple
    C0: float
    C1: float
    swapped: bool
    delta: float
    p: tuple
    q: tuple
    v: float
    eta: float
    L: np.ndarray
    corner: tuple
    eps: float
    model_point: tuple
    phi: object
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def model_to_c2(self, z1, z2) -> np.ndarray:
        O = np.array(self.corner)
        y = np.array(self.z).imag
        if self.swapped:
            y = y[::-1]
        m = np.stack([np.asarray(z1), np.asarray(z2)], axis=-1)
        out = O + 1j * y + m @ self.L.T
        return out[..., ::-1] if self.swapped else out

    def __call__(self, w) -> np.ndarray:
        """λ(z, w)."""
        z1 = self.phi(np.asarray(w, dtype=complex))
        # φ may overshoot ∂D_ε by its certified distance, so use the branch
        # of the graph that continues holomorphically past the closed disc
        return self.model_to_c2(z1, graph_eps_analytic(self.eps, z1))


def _chord(x1, x2, C1, T):
    delta = 1.0 if 0.5 * (x1 + x2) >= T else (x1 - T) / (T - x2)
    q = np.array([x1 + delta * (x2 - C1), C1])
    p = np.array([C1, x2 - (C1 - x1) / delta])
    v = (x1 + delta * x2) / (1.0 + delta)
    return delta, p, q, v


def eps_by_bisection(s1: float, s2: float, tol: float = 1e-14) -> float:
    """ε with F_ε(s1, s2) = 0 by bisection on (0, 1/2)."""
    lo, hi = 1e-12, 0.5 - 1e-12
    f = lambda e: F_eps(e, s1, s2)  # noqa: E731
    if f(lo) * f(hi) > 0:
        raise ValueError("model point is not on any γ_ε with 0 < ε < 1/2")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def disc_through_point(z, C0: float, C1: float, tol: float = 2e-2, eta_frac: float = 0.05,
                       n_boundary: int = 512, panels: int = 1600, rm_tol: float = 5e-3,
                       max_nodes: int = 2 ** 16, verify_nodes: int = 512) -> ChordTriangle:
    z = np.asarray(z, dtype=complex).reshape(2)
    rz = float(rho_max(z))
    if not C0 < rz < C1:
        raise ValueError(f"need C0 < rho_max(z) < C1, got {C0} < {rz} < {C1}")
    x = z.real.copy()
    swapped = bool(x[0] < x[1])
    if swapped:
        x = x[::-1]
    x1, x2 = float(x[0]), float(x[1])
    T = 0.5 * (x1 + C0)
    delta, p, q, v = _chord(x1, x2, C1, T)
    O = np.array([C1, C1])
    nrm = np.array([1.0, delta]) / np.hypot(1.0, delta)
    eta = eta_frac * (C1 - rz)
    for _ in range(30):
        xt = x - eta * nrm
        _, pt, qt, vt = _chord(float(xt[0]), float(xt[1]), C1, T)
        # the enlarged chord keeps the same direction
        pt = np.array([C1, xt[1] - (C1 - xt[0]) / delta])
        qt = np.array([xt[0] + delta * (xt[1] - C1), C1])
        vt = (xt[0] + delta * xt[1]) / (1.0 + delta)
        if vt > C0:
            break
        eta *= 0.5
    L = np.column_stack([pt - O, qt - O])
    s = np.linalg.solve(L, x - O)
    s1, s2 = float(s[0]), float(s[1])
    if not (s1 > 0 and s2 > 0 and s1 + s2 < 1):
        raise ValueError("point is not interior to the enlarged triangle")
    eps = eps_by_bisection(s1, s2)
    eps_cf = (1 - s1 - s2) / (1 - s1 ** 2 - s2 ** 2)
    md = model_disc(eps, n_boundary, 64)
    dom = PlanarDomain(md.domain.boundary, complex(s1, 0.0))
    wT = circle_nodes(verify_nodes)

    def make(phi):
        c0 = phi.coeffs.copy()
        c0[0] = complex(s1, 0.0)
        phi = type(phi)(c0, phi.center, phi.checks, phi.ok, phi.interp_nodes)
        return ChordTriangle(tuple(complex(t) for t in z), float(C0), float(C1), swapped, float(delta),
                             tuple(pt), tuple(qt), float(vt), float(eta), L, tuple(O), float(eps),
                             (s1, s2), phi, ())

    def level_ok(phi):
        return float(np.max(np.abs(rho_max(make(phi)(wT)) - C1))) <= tol

    # corners of D_ε converge slowly; keep doubling until the level check holds
    phi = riemann_map(dom, tol=rm_tol, panels=panels, max_nodes=max_nodes,
                      verify_nodes=verify_nodes, accept=level_ok)
    tri = make(phi)
    bvals = rho_max(tri(wT))
    inner = min(float(np.min(rho_max(tri(circle_nodes(verify_nodes, t))))) for t in np.linspace(0, 1, 17)[1:])
    center = tri(np.array([0j]))[0]
    checks = (
        check_gt("chord diagonal value v - C0", float(vt) - C0, 0.0),
        check_le("|ε bisection - closed form|", abs(eps - eps_cf), 1e-10),
        check_le("model point on γ_ε (|F_ε|)", abs(float(F_eps(eps, s1, s2))), tol),
        check_gt("model disc certified", float(md.ok), 0.5),
        *phi.checks,
        check_le("|ρ(λ(z,w)) - C1| on T", float(np.max(np.abs(bvals - C1))), tol),
        check_gt("min ρ(λ(z,·)) - C0 on Ū", min(inner, float(rho_max(center))) - C0, 0.0),
        check_le("|λ(z,0) - z|", float(np.linalg.norm(center - z)), tol),
    )
    return ChordTriangle(*[getattr(tri, f) for f in (
        "z", "C0", "C1", "swapped", "delta", "p", "q", "v", "eta", "L", "corner", "eps",
        "model_point", "phi")], checks)


# --------------------------------------------------------------------------
# the tube lift step
# --------------------------------------------------------------------------


def _tube_family(g0: PolyMap, C0, C1, n: int, nW: int, s: float, tol: float,
                 center_tol: float = 1e-8, **kw) -> DiscFamilySamples:
    nodes = circle_nodes(n)
    Z = g0(nodes)
    w = circle_nodes(nW, s)
    samples = np.empty((n, nW, 2), dtype=complex)
    cache: dict = {}
    failures = []
    for i in range(n):
        key = (round(Z[i, 0].real, 14), round(Z[i, 0].imag, 14), round(Z[i, 1].real, 14), round(Z[i, 1].imag, 14))
        if key not in cache:
            tri = disc_through_point(Z[i], C0, C1, tol=tol, **kw)
            if not tri.ok:
                failures.append((i, [ch.name for ch in tri.checks if not ch.passed]))
            cache[key] = tri(w) - Z[i]
        samples[i] = cache[key]
    if failures:
        raise LiftError(f"disc_through_point failed at {len(failures)} nodes, first {failures[0]}", "node")
    try:
        tc = taylor_truncate(samples, nW // 2, s, tol=center_tol)
    except ValueError as e:
        raise LiftError(f"family Taylor data: {e}", "(a)") from e
    coeffs = tc.coeffs.copy()
    coeffs[:, 0] = 0.0
    return DiscFamilySamples(nodes, coeffs, s, {"distinct_discs": len(cache), "a0_max": tc.a0_max})


def lift_step_tube(g0: PolyMap, C0: float, C1: float, eps: float, r: float, s: float = 0.95,
                   nW: int = 256, n_family: int | None = None, band: float | None = None,
                   disc_tol: float | None = None, max_degree: int = MAX_DEGREE,
                   max_family: int = 2 ** 10, **kw) -> LiftResult:
    """Tube lift: g with |ρ(g) - C1| < eps on T, ρ(g) > C0 on r <= |ζ| <= 1 and
    |g - g0| < eps on |ζ| <= r, from discs through the points g0(ζ)."""
    if not C0 < C1:
        raise LiftError("need C0 < C1", "levels")
    n0 = verification_size(g0.degree)
    for t in radii_ladder(r, 1):
        v = rho_max(g0.sample_circle(t, n0))
        if not (np.all(v > C0) and np.all(v < C1)):
            raise LiftError(f"need C0 < ρ(g0) < C1 on r <= |ζ| <= 1 (radius {t:.4g})", "pre")
    n = n_family or family_size(g0)
    if n > max_family:
        raise LiftError(f"family needs {n} nodes; budget is {max_family}", "family_budget")
    band = eps / 2 if band is None else band
    # per-disc level tolerance: half the band, the rest is left for the push
    fam = _tube_family(g0, C0, C1, n, nW, s, band / 2 if disc_tol is None else disc_tol, **kw)
    push = push_boundary(g0, fam, rho_max, C0, C1, eps, r, band=band,
                         max_degree=max_degree)
    cert = LiftCertificate("lift_step_tube", push.cert.checks,
                           dict(push.cert.grids, family_nodes=n),
                           dict(push.cert.params, C0=C0, C1=C1, s=s,
                                distinct_discs=fam.meta["distinct_discs"],
                                decomposition="g = g0 + h"))
    return LiftResult(push.g, cert, fam, push)


# --------------------------------------------------------------------------
# zeros, the axis-avoiding builder and exponentiation
# --------------------------------------------------------------------------


def factor_zeros(h: PolyMap, r: float, margin: float = 1e-8, n_verify: int = 1024):
    """Divide each component by ∏(ζ - z_i) over its roots with |z_i| < r."""
    comps = []
    roots_out = []
    for j in range(2):
        c = np.trim_zeros(h.component(j), "b")
        if c.size == 0 or np.all(c == 0):
            raise ValueError(f"component {j + 1} is identically zero")
        roots = np.roots(c[::-1]) if c.size > 1 else np.array([], dtype=complex)
        absr = np.abs(roots)
        if np.any((absr >= r - margin) & (absr <= 1 + margin)):
            raise ValueError(f"component {j + 1} has a root on the annulus r <= |ζ| <= 1")
        inside = roots[absr < r]
        q = c.astype(complex)
        for z0 in inside:
            # synthetic division by (ζ - z0)
            out = np.zeros(q.size - 1, dtype=complex)
            acc = 0j
            for k in range(q.size - 1, 0, -1):
                acc = q[k] + acc * z0
                out[k - 1] = acc
            q = out
        comps.append(q)
        roots_out.append(inside)
    H = PolyMap.from_components(comps[0], comps[1])
    n = max(n_verify, verification_size(H.degree))
    mins = [float(np.min(np.abs(H.sample_circle(t, n)[:, j]))) for j in range(2)
            for t in np.linspace(0, 1, 17)[1:]]
    mn = min(mins + [float(np.min(np.abs(H(np.array([0j])))))])
    if not mn > margin:
        raise ValueError(f"factored map still nearly vanishes (min modulus {mn:.3e})")
    return H, roots_out, mn


@dataclass(frozen=True)
class ExpDisc:
    g: PolyMap
    radii: np.ndarray
    n_theta: int
    u: np.ndarray             # (nr, nθ, 2) = Re g
    v: np.ndarray
    log_abs_f: np.ndarray     # log|f_j| computed from f in log-magnitude form
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def f(self, zeta) -> np.ndarray:
        return np.exp(self.g(zeta))


def exponentiate(g: PolyMap, radii=None, n_theta: int | None = None) -> ExpDisc:
    """f = (e^{g1}, e^{g2}) with |f_j| = e^{u_j} and ρ(g) = log max |f_j|."""
    radii = np.linspace(0.0, 1.0, 9) if radii is None else np.asarray(radii, dtype=float)
    n = n_theta or verification_size(g.degree)
    G = np.stack([g.sample_circle(t, n) for t in radii])
    u, v = G.real, G.imag
    with np.errstate(over="ignore", invalid="ignore"):
        absf = np.abs(np.exp(G))
    # where e^{u} overflows, log|f_j| is taken in log-magnitude form (= u_j)
    finite = np.isfinite(absf) & (absf > 0)
    logabs = np.where(finite, np.log(np.where(finite, absf, 1.0)), u)
    eu = np.exp(np.where(finite, u, 0.0))
    id_err = float(np.max(np.where(finite, np.abs(absf - eu) / np.maximum(1.0, absf), 0.0)))
    rm = float(np.max(np.abs(np.max(logabs, axis=-1) - rho_max(G))))
    checks = (
        check_le("| |f_j| - e^{u_j} | (relative above 1)", id_err, 1e-10),
        check_le("|log max|f_j| - max u_j|", rm, 1e-10),
        check_gt("u_j finite", float(np.all(np.isfinite(u))), 0.5),
    )
    return ExpDisc(g, radii, n, u, v, logabs, checks)


def tube_levels(M1: float, K: int, step: float = 1.0) -> list[float]:
    """M_0, M_1, ..., M_K with M_k = M_{k-1} + step."""
    return [M1 - step + step * k for k in range(K + 1)]


def tube_eps(K: int) -> list[float]:
    """ε_k = 2^{-k-1}, k = 1..K (their sum is below 1/2)."""
    return [2.0 ** (-k - 1) for k in range(1, K + 1)]


def _log_branch(hj: np.ndarray, n: int) -> np.ndarray:
    """Coefficients of a polynomial approximating log h_j on Ū.

    The argument is unwrapped along the T-grid from node 0 and the values are
    fitted by FFT; h_j has no zeros on Ū so log h_j is holomorphic there and
    the negative half of the spectrum must vanish.
    """
    zeta = circle_nodes(n)
    vals = np.polyval(hj[::-1], zeta)
    arg = np.unwrap(np.angle(vals))
    lv = np.log(np.abs(vals)) + 1j * arg
    c = np.fft.fft(lv) / n
    return c


def build_axis_avoiding_disc(h: PolyMap, r: float, K: int, eps_seq=None, M1: float | None = None,
                             max_degree: int = MAX_DEGREE, max_family: int = 2 ** 10,
                             time_budget: float | None = None, n_log: int = 256,
                             verify_nodes: int = 512, **kw):
    """Stages g_1 = log h, g_2, ..., g_K for ρ = max(x1, x2) with
    M_k = M_{k-1} + 1, followed by f = exp(g_K)."""
    t_start = time.monotonic()
    if K < 1:
        raise ValueError("K must be >= 1")
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    eps_seq = tube_eps(K) if eps_seq is None else list(eps_seq)
    if not sum(eps_seq) < 1:
        raise ValueError("need Σ ε_k < 1")
    H, roots, mn = factor_zeros(h, r)
    c1 = _log_branch(H.component(0), n_log)
    c2 = _log_branch(H.component(1), n_log)
    # log h_j is holomorphic on Ū, so its Fourier data has no negative band
    neg = max(float(np.max(np.abs(c1[n_log // 2:]))), float(np.max(np.abs(c2[n_log // 2:]))))
    g1 = PolyMap.from_components(c1[: n_log // 2], c2[: n_log // 2]).trimmed(1e-15)
    n0 = max(verify_nodes, verification_size(g1.degree))
    rho_ann = [rho_max(g1.sample_circle(t, n0)) for t in radii_ladder(r, 1)]
    lo = float(min(np.min(v) for v in rho_ann))
    hi = float(max(np.max(v) for v in rho_ann))
    if M1 is None:
        M1 = float(np.floor(hi) + 1.0)
    M0 = min(M1 - 1.0, float(np.floor(lo) - 1.0)) if lo <= M1 - 1.0 else M1 - 1.0
    Ms = [M0, M1]
    for k in range(2, K + 1):
        Ms.append(Ms[-1] + 1.0)
    params = {"K": K, "r1": r, "eps": eps_seq, "M": Ms, "log_negative_band": neg,
              "factored_roots": [len(x) for x in roots], "max_degree": max_degree,
              "max_family": max_family}
    first_checks = (
        check_le("log branch negative band", neg, 1e-10),
        check_gt(f"(a_1) ρ(g_1) - M_0 on r_1<=|ζ|<=1", lo - Ms[0], 0.0),
        check_lt(f"(a_1) ρ(g_1) - M_1 on r_1<=|ζ|<=1", hi - Ms[1], 0.0),
    )
    seq = StageSequence([Stage(1, g1, r, Ms[1], eps_seq[0], first_checks)], params)
    for k in range(2, K + 1):
        if time_budget is not None and time.monotonic() - t_start > time_budget:
            seq.partial, seq.failure = True, f"time budget exhausted before stage {k}"
            break
        prev = seq.stages[-1]
        e_prev = eps_seq[k - 2]
        C0, C1 = Ms[k - 2], 0.5 * (Ms[k - 1] + Ms[k])
        try:
            res = lift_step_tube(prev.g, C0, C1, min(e_prev, 0.5 * (Ms[k] - C1)), prev.r,
                                 max_degree=max_degree, max_family=max_family, **kw)
        except (LiftError, ValueError) as e:
            where = getattr(e, "where", "")
            seq.partial, seq.failure = True, f"stage {k}: {e} [{where}]"
            break
        g = res.g
        n = max(verify_nodes, verification_size(g.degree))
        # first radius 1 - (1 - r_{k-1}) 2^{-j}, j >= 2, where (a_k) holds
        rk = None
        Kh = int(res.cert.params.get("approx_K", 1))
        for j in range(2, 40):
            cand = 1.0 - (1.0 - prev.r) * 2.0 ** (-j)
            vals = [rho_max(g.sample_circle(t, n)) for t in radii_ladder(cand, Kh) if t >= cand]
            if all(np.all(v > Ms[k - 1]) and np.all(v < Ms[k]) for v in vals):
                rk = cand
                break
        checks = [check_gt(f"lift certificate (stage {k})", float(res.cert.passed), 0.5)]
        rk_used = rk if rk is not None else 1.0 - (1.0 - prev.r) / 4
        checks.append(check_lt(f"1 - r_{k} vs (1 - r_{k-1})/2", 1.0 - rk_used, 0.5 * (1.0 - prev.r)))
        ann = [rho_max(g.sample_circle(t, n)) for t in radii_ladder(rk_used, 1) if t >= rk_used]
        checks.append(check_gt(f"(a_{k}) ρ(g_{k}) - M_{k-1} on r_{k}<=|ζ|<=1",
                               float(min(np.min(v) for v in ann)) - Ms[k - 1], 0.0))
        checks.append(check_lt(f"(a_{k}) ρ(g_{k}) - M_{k} on r_{k}<=|ζ|<=1",
                               float(max(np.max(v) for v in ann)) - Ms[k], 0.0))
        annb = [rho_max(g.sample_circle(t, n)) for t in radii_ladder(prev.r, 1)]
        checks.append(check_gt(f"(b_{k}) ρ(g_{k}) - M_{k-2} on r_{k-1}<=|ζ|<=1",
                               float(min(np.min(v) for v in annb)) - Ms[k - 2], 0.0))
        sup = float(np.max(np.linalg.norm((g - prev.g).sample_circle(prev.r, n), axis=1)))
        checks.append(check_lt(f"(c_{k}) |g_{k} - g_{k-1}| on |ζ|<=r_{k-1}", sup, e_prev))
        st = Stage(k, g, rk_used, Ms[k], eps_seq[k - 1], tuple(checks), res.cert.as_dict())
        seq.stages.append(st)
        if not st.passed:
            seq.partial, seq.failure = True, f"stage {k} certificate failed"
            break
    gK = seq.final
    n = max(verify_nodes, verification_size(gK.degree))
    fin = []
    st = seq.stages
    for i in range(1, len(st)):
        lo_r = st[i - 1].r
        hi_r = st[i].r
        vals = [rho_max(gK.sample_circle(t, n)) for t in np.linspace(lo_r, hi_r, 9)]
        fin.append(check_gt(f"ρ(g_K) - M_{i - 1} + 1 on A_{i + 1}",
                            float(min(np.min(v) for v in vals)) - Ms[i - 1] + 1.0, 0.0))
    for i, s_ in enumerate(st[:-1]):
        tail = sum(eps_seq[i: len(st) - 1])
        fin.append(check_lt(f"sup_{{|ζ|<=r_{s_.k}}} |g_K - g_{s_.k}| vs Σ ε", float(
            np.max(np.linalg.norm((gK - s_.g).sample_circle(s_.r, n), axis=1))), max(tail, 1e-300)))
    radii = np.unique(np.concatenate([[0.0], [s_.r for s_ in st], np.linspace(0, 1, 9)]))
    ed = exponentiate(gK, radii, n)
    fin.extend(ed.checks)
    seq.final_checks = tuple(fin)
    seq.extra["elapsed_s"] = round(time.monotonic() - t_start, 3)
    if len(seq.stages) < K:
        seq.partial = True
    return seq, ed
