"""Geometry of ρ_c(z) = x1² + x2² - c (y1² + y2²) on C².

Levi polynomial and form, the quadric Λ_z = {Q_z = 0} with a rational
chart, sublevel components of |w| on Λ_z, the critical-point oracle and the
calibrated lifting radius a(c).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corepoly import PlanarDomain

log = logging.getLogger(__name__)

SINGULAR_CLIP = 1e-6
RESIDUAL_GATE = 1e-10


@dataclass(frozen=True)
class ConeFunction:
    c: float

    def __post_init__(self):
        if not np.isfinite(self.c):
            raise ValueError("c must be finite")

    def __call__(self, z) -> np.ndarray:
        return rho_cone(self.c, z)

    def multiplier(self, z) -> np.ndarray:
        return multiplier(self.c, z)

    @property
    def strongly_psh(self) -> bool:
        return self.c < 1


def rho_cone(c: float, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return np.sum(x * x, axis=-1) - c * np.sum(y * y, axis=-1)


def multiplier(c: float, z) -> np.ndarray:
    """h(x + iy) = x + i c y, applied componentwise."""
    z = np.asarray(z, dtype=complex)
    return z.real + 1j * c * z.imag


def levi_polynomial(c: float, z, w) -> np.ndarray:
    h = multiplier(c, z)
    w = np.asarray(w, dtype=complex)
    kappa = 0.5 * (1.0 + c)
    return 2.0 * np.sum(h * w, axis=-1) + kappa * np.sum(w * w, axis=-1)


def levi_form(c: float, w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    return 0.5 * (1.0 - c) * np.sum(np.abs(w) ** 2, axis=-1)


@dataclass(frozen=True)
class LeviChart:
    """Λ_z through a rational chart.

    chart "u":  w = t (1, u),  t = -2 (h1 + h2 u) / (κ (1 + u²))
    chart "v":  w = t (v, 1),  t = -2 (h1 v + h2) / (κ (1 + v²))
    chart "iso+" / "iso-":  w = t d(u), d(u) = (1 + u, ±i(u - 1)), d·d = 4u,
        t = -(h·d) / (2κu).  Both chart singularities (u = 0 and u = ∞) are
        the isotropic directions where w blows up, so bounded sublevel sets
        of |w| are bounded in u.  This is the default chart.
    When κ = 0 (c = -1) Λ_z is the line h·w = 0 and the parameter is affine.
    """

    c: float
    base: tuple
    rho: float
    linCoeffs: tuple
    quadCoeff: float
    leviScalar: float
    chart: str
    u0: complex

    @property
    def h(self) -> np.ndarray:
        return 0.5 * np.asarray(self.linCoeffs, dtype=complex)

    @property
    def linear(self) -> bool:
        return abs(self.quadCoeff) < 1e-14

    def w(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        h1, h2 = self.h
        k = self.quadCoeff
        if self.linear:
            # Λ_z is a line; param u moves along it with w(u0) = 0
            d = np.array([-h2, h1]) / np.hypot(abs(h1), abs(h2))
            return (u - self.u0)[..., None] * d
        if self.chart.startswith("iso"):
            d1, d2 = self._iso_dir(u)
            t = -(h1 * d1 + h2 * d2) / (2.0 * k * u)
            return np.stack([t * d1, t * d2], axis=-1)
        if self.chart == "u":
            t = -2.0 * (h1 + h2 * u) / (k * (1.0 + u * u))
            return np.stack([t, t * u], axis=-1)
        t = -2.0 * (h1 * u + h2) / (k * (1.0 + u * u))
        return np.stack([t * u, t], axis=-1)

    def dw(self, u) -> np.ndarray:
        """Derivative dw/du."""
        u = np.asarray(u, dtype=complex)
        h1, h2 = self.h
        k = self.quadCoeff
        if self.linear:
            d = np.array([-h2, h1]) / np.hypot(abs(h1), abs(h2))
            return np.ones_like(u)[..., None] * d
        if self.chart.startswith("iso"):
            d1, d2 = self._iso_dir(u)
            e2 = self._iso_sign * 1j
            num = -(h1 * d1 + h2 * d2)
            den = 2.0 * k * u
            t = num / den
            dt = (-(h1 + h2 * e2) * den - num * 2.0 * k) / den ** 2
            return np.stack([dt * d1 + t, dt * d2 + t * e2], axis=-1)
        if self.chart == "u":
            a, b = h1, h2
        else:
            a, b = h2, h1
        num = -2.0 * (a + b * u)
        den = k * (1.0 + u * u)
        t = num / den
        dt = (-2.0 * b * den - num * k * 2.0 * u) / den ** 2
        if self.chart == "u":
            return np.stack([dt, dt * u + t], axis=-1)
        return np.stack([dt * u + t, dt], axis=-1)

    @property
    def _iso_sign(self) -> float:
        return 1.0 if self.chart == "iso+" else -1.0

    def _iso_dir(self, u):
        return 1.0 + u, self._iso_sign * 1j * (u - 1.0)

    @property
    def poles(self) -> np.ndarray:
        """Finite chart parameters where w(u) is infinite."""
        if self.linear:
            return np.array([], dtype=complex)
        if self.chart.startswith("iso"):
            return np.array([0j])
        return np.array([1j, -1j])

    def Q(self, w) -> np.ndarray:
        return levi_polynomial(self.c, np.asarray(self.base), w)

    def sublevel_radius(self, C: float) -> float:
        return float(np.sqrt(2.0 * C / (1.0 - self.c)))


def levi_chart(c: float, z, chart: str = "auto") -> LeviChart:
    z = np.asarray(z, dtype=complex).reshape(2)
    if c < 1 and np.all(z == 0):
        raise ValueError("levi_chart: z = 0 is the critical point of ρ_c")
    h = multiplier(c, z)
    h1, h2 = complex(h[0]), complex(h[1])
    if abs(h1) == 0 and abs(h2) == 0:
        raise ValueError("levi_chart: gradient of ρ_c vanishes at z")
    if chart == "auto":
        chart = "v" if abs(h2) < abs(h1) else "u"
    elif chart == "iso":
        chart = "iso+" if abs(h1 + 1j * h2) >= abs(h1 - 1j * h2) else "iso-"
    if chart in ("iso+", "iso-"):
        sg = 1.0 if chart == "iso+" else -1.0
        den = h1 + sg * 1j * h2
        if den == 0:
            raise ValueError(f"chart {chart!r} needs h1 + {'i' if sg > 0 else '-i'} h2 != 0")
        u0 = (sg * 1j * h2 - h1) / den
    elif chart == "u":
        if h2 == 0:
            raise ValueError("chart 'u' needs h(z2) != 0")
        u0 = -h1 / h2
    elif chart == "v":
        if h1 == 0:
            raise ValueError("chart 'v' needs h(z1) != 0")
        u0 = -h2 / h1
    else:
        raise ValueError(f"unknown chart {chart!r}")
    kappa = 0.5 * (1.0 + c)
    if abs(kappa) < 1e-14:
        u0 = 0j
    return LeviChart(
        c=float(c),
        base=(complex(z[0]), complex(z[1])),
        rho=float(rho_cone(c, z)),
        linCoeffs=(2.0 * h1, 2.0 * h2),
        quadCoeff=kappa,
        leviScalar=0.5 * (1.0 - c),
        chart=chart,
        u0=complex(u0),
    )


# --------------------------------------------------------------------------
# critical-point oracle for |w|² restricted to Λ_z
# --------------------------------------------------------------------------


def critical_residuals(c: float, z, w) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the two complex critical-point equations at w."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    h = multiplier(c, z)
    h1, h2 = h[..., 0], h[..., 1]
    w1, w2 = w[..., 0], w[..., 1]
    e1 = (2 * np.conj(h2) * w1 - 2 * np.conj(h1) * w2
          + (1 + c) * (w1 * np.conj(w2) - np.conj(w1) * w2))
    e2 = 4 * h1 * w1 + 4 * h2 * w2 + (1 + c) * (w1 * w1 + w2 * w2)
    return e1, e2


def _newton_polish(c, h, w, iters=40, blowup=None):
    """Batched Newton on the 4 real equations; h and w have shape (n, 2).

    Rows leave the active set once the step is at roundoff level or the
    iterate escapes beyond ``blowup`` (per-row norms).
    """
    cc = 1.0 + c
    w = w.copy()
    active = np.arange(w.shape[0])
    for _ in range(iters):
        if active.size == 0:
            break
        ha, wa = h[active], w[active]
        h1, h2 = ha[:, 0], ha[:, 1]
        h1c, h2c = np.conj(h1), np.conj(h2)
        w1, w2 = wa[:, 0], wa[:, 1]
        e1 = 2 * h2c * w1 - 2 * h1c * w2 + cc * (w1 * np.conj(w2) - np.conj(w1) * w2)
        e2 = 4 * h1 * w1 + 4 * h2 * w2 + cc * (w1 * w1 + w2 * w2)
        F = np.stack([e1.real, e1.imag, e2.real, e2.imag], axis=1)
        # Wirtinger derivatives -> real Jacobian columns (a1, b1, a2, b2)
        d1w1, d1b1 = 2 * h2c + cc * np.conj(w2), -cc * w2
        d1w2, d1b2 = -2 * h1c - cc * np.conj(w1), cc * w1
        d2w1, d2w2 = 4 * h1 + 2 * cc * w1, 4 * h2 + 2 * cc * w2
        cols1 = [d1w1 + d1b1, 1j * (d1w1 - d1b1), d1w2 + d1b2, 1j * (d1w2 - d1b2)]
        cols2 = [d2w1, 1j * d2w1, d2w2, 1j * d2w2]
        J = np.empty((active.size, 4, 4))
        for k in range(4):
            J[:, 0, k] = cols1[k].real
            J[:, 1, k] = cols1[k].imag
            J[:, 2, k] = cols2[k].real
            J[:, 3, k] = cols2[k].imag
        try:
            step = np.linalg.solve(J, F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(Jk, Fk, rcond=None)[0] for Jk, Fk in zip(J, F)])
        wa = wa.copy()
        wa[:, 0] -= step[:, 0] + 1j * step[:, 1]
        wa[:, 1] -= step[:, 2] + 1j * step[:, 3]
        finite = np.all(np.isfinite(wa), axis=1)
        wa[~finite] = 0.0
        w[active] = wa
        size = np.linalg.norm(wa, axis=1)
        done = ~finite | (np.linalg.norm(step, axis=1) <= 1e-15 * (1.0 + size))
        if blowup is not None:
            done |= size > blowup[active]
        active = active[~done]
    return w


@dataclass(frozen=True)
class CriticalSolutionSet:
    c: float
    base: tuple
    solutions: np.ndarray
    residuals: np.ndarray
    minNorm: float
    dropped: int

    @property
    def min_solution(self):
        if self.solutions.shape[0] == 0:
            return None
        k = int(np.argmin(np.linalg.norm(self.solutions, axis=1)))
        return self.solutions[k]

    @property
    def threshold(self) -> float:
        """Level leviScalar·minNorm² of the lowest nonzero critical point."""
        return 0.5 * (1.0 - self.c) * self.minNorm ** 2


def _chart_starts(n_grid: int, rng: np.random.Generator, span: float = 1.5):
    g = np.linspace(-span, span, n_grid)
    U = (g[:, None] + 1j * g[None, :]).ravel()
    U = U + (rng.standard_normal(U.size) + 1j * rng.standard_normal(U.size)) * (span / n_grid) * 0.25
    return U


def critical_system_solve(c: float, z, n_grid: int = 32, ball: float = 4.0,
                          seed: int = 0, charts: tuple = ("u", "v")) -> CriticalSolutionSet:
    return critical_system_solve_many(c, np.asarray(z, dtype=complex).reshape(1, 2),
                                      n_grid=n_grid, ball=ball, seed=seed, charts=charts)[0]


def critical_system_solve_many(c: float, Z, n_grid: int = 32, ball: float = 4.0,
                               seed: int = 0, charts: tuple = ("u", "v")) -> list:
    """All critical points of |w|² on Λ_z with 0 < |w| <= ball·|z|, for each row of Z.

    Starts are a jittered 32x32 grid in each rational chart, mapped onto Λ_z;
    Newton polishing is run on the real 4x4 system; converged points are gated
    at residual 1e-10, deduplicated, and the trivial solution w = 0 removed.
    """
    if c >= 1:
        raise ValueError("critical_system_solve needs c < 1")
    Z = np.asarray(Z, dtype=complex).reshape(-1, 2)
    rhos = rho_cone(c, Z)
    if np.any(rhos <= 0):
        raise ValueError("critical_system_solve needs ρ_c(z) > 0")
    rng = np.random.default_rng(seed)
    U = _chart_starts(n_grid, rng)
    kappa = 0.5 * (1.0 + c)
    H = multiplier(c, Z)
    nZ = Z.shape[0]
    starts, owner = [], []
    for i in range(nZ):
        h1, h2 = H[i]
        for ch in charts:
            if kappa == 0:
                continue
            if ch == "u":
                t = -2.0 * (h1 + h2 * U) / (kappa * (1.0 + U * U))
                W = np.stack([t, t * U], axis=1)
            else:
                t = -2.0 * (h1 * U + h2) / (kappa * (1.0 + U * U))
                W = np.stack([t * U, t], axis=1)
            ok = (np.abs(1.0 + U * U) >= SINGULAR_CLIP) & np.all(np.isfinite(W), axis=1)
            ok &= np.linalg.norm(W, axis=1) <= 1.5 * ball * np.linalg.norm(Z[i])
            starts.append(W[ok])
            owner.append(np.full(int(ok.sum()), i))
    if starts:
        W0 = np.concatenate(starts)
        own = np.concatenate(owner)
    else:
        W0 = np.zeros((0, 2), complex)
        own = np.zeros(0, int)
    blow = 4.0 * ball * np.linalg.norm(Z, axis=1)[own]
    Wp = _newton_polish(c, H[own], W0, blowup=blow) if W0.size else W0
    e1, e2 = critical_residuals(c, Z[own], Wp)
    res = np.maximum(np.abs(e1), np.abs(e2))
    out = []
    for i in range(nZ):
        sel = own == i
        zi = Z[i]
        nz = np.linalg.norm(zi)
        Wi, Ri = Wp[sel], res[sel]
        conv = Ri <= RESIDUAL_GATE
        dropped = int((~conv).sum())
        if dropped:
            log.debug("critical_system_solve: %d starts did not converge", dropped)
        Wi, Ri = Wi[conv], Ri[conv]
        norms = np.linalg.norm(Wi, axis=1)
        keep = (norms > 1e-8 * nz) & (norms <= ball * nz)
        Wi, Ri, norms = Wi[keep], Ri[keep], norms[keep]
        # cluster on a rounded key, keep the smallest residual representative
        q = 1e-7 * (1 + nz)
        key = np.round(np.column_stack([Wi.real, Wi.imag]) / q).astype(np.int64)
        order = np.lexsort((Ri,) + tuple(key.T[::-1]))
        sols, rs = [], []
        for k in order:
            if all(np.linalg.norm(Wi[k] - s) > 10 * q for s in sols):
                sols.append(Wi[k])
                rs.append(Ri[k])
        sols = np.array(sols).reshape(-1, 2)
        e1s, e2s = critical_residuals(c, np.broadcast_to(zi, sols.shape), sols)
        resid = np.stack([np.abs(e1s), np.abs(e2s)], axis=1) if sols.size else np.zeros((0, 2))
        mn = float(np.min(np.linalg.norm(sols, axis=1))) if sols.size else float("inf")
        out.append(CriticalSolutionSet(float(c), (complex(zi[0]), complex(zi[1])), sols, resid, mn, dropped))
    return out


# --------------------------------------------------------------------------
# sublevel components and the lifting radius
# --------------------------------------------------------------------------


class ThresholdError(ValueError):
    def __init__(self, C: float, threshold: float):
        super().__init__(f"level C={C:.6g} is not below the critical threshold {threshold:.6g}")
        self.C = C
        self.threshold = threshold


def sublevel_component(chart: LeviChart, C: float, n_boundary: int = 256,
                       threshold: float | None = None, tol: float = 1e-8) -> PlanarDomain:
    """Component of {u : |w(u)| < √(2C/(1-c))} containing u0, as a polygon in u.

    The boundary is traced along rays from u0: the first sign change of
    |w|² - R² along each ray is located on a sample ladder and refined by
    bisection.  ``threshold`` (the oracle's lowest critical level) is computed
    when not supplied.
    """
    c = chart.c
    if c >= 1:
        raise ValueError("sublevel_component needs c < 1")
    if C <= 0:
        raise ValueError("C must be positive")
    if threshold is None:
        if chart.rho > 0:
            threshold = critical_system_solve(c, np.array(chart.base)).threshold
        else:
            threshold = float("inf")
    if C >= threshold:
        raise ThresholdError(C, threshold)
    R2 = 2.0 * C / (1.0 - c)
    u0 = chart.u0
    theta = 2 * np.pi * np.arange(n_boundary) / n_boundary
    dirs = np.exp(1j * theta)
    # distance to the chart singularities bounds the search along each ray
    dw0 = np.linalg.norm(chart.dw(np.array([u0]))[0])
    r_guess = np.sqrt(R2) / dw0
    ladder = r_guess * np.geomspace(1e-3, 64.0, 400)
    pts = u0 + ladder[None, :] * dirs[:, None]
    with np.errstate(all="ignore"):
        f = np.sum(np.abs(chart.w(pts)) ** 2, axis=-1) - R2
    # |w| blows up at a chart pole, so a non-finite sample is past the level
    hit = ~(f < 0)
    if not np.all(hit.any(axis=1)):
        raise ValueError("sublevel component is not bounded along every ray")
    first = np.argmax(hit, axis=1)
    if np.any(first == 0):
        raise ValueError("sublevel component degenerate near u0")
    lo = ladder[first - 1].copy()
    hi = ladder[first].copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = np.sum(np.abs(chart.w(u0 + mid * dirs)) ** 2, axis=-1) - R2
        up = fm >= 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    rb = 0.5 * (lo + hi)
    bnd = u0 + rb * dirs
    err = np.abs(np.linalg.norm(chart.w(bnd), axis=-1) - np.sqrt(R2))
    if np.max(err) > tol:
        raise ValueError(f"boundary trace misses the level (max error {np.max(err):.2e})")
    return PlanarDomain(bnd, u0)


def sample_positive(c: float, n: int, seed: int, rho_range=(0.5, 10.0)) -> np.ndarray:
    """n points with ρ_c uniform in rho_range; one child stream per point."""
    children = np.random.SeedSequence(seed).spawn(n)
    out = np.empty((n, 2), complex)
    for i, ss in enumerate(children):
        g = np.random.default_rng(ss)
        while True:
            v = g.standard_normal(4)
            z = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])
            r = rho_cone(c, z)
            if r > 1e-3 * np.dot(v, v):
                break
        target = g.uniform(*rho_range)
        out[i] = z * np.sqrt(target / r)
    return out


@dataclass(frozen=True)
class LiftingRadius:
    c: float
    a: float
    min_ratio: float
    safety: float
    batch: int
    seed: int
    flagged: bool

    def __float__(self) -> float:
        return self.a


def lifting_radius(c: float, batch: int = 64, seed: int = 7, safety: float = 0.5,
                   cap: float = 1.0, n_grid: int = 32) -> LiftingRadius:
    """a(c) = safety · min over a random batch of (ρ(z + w*) - ρ(z)) / ρ(z).

    w* is the smallest nonzero critical point found by the oracle.  When no
    batch point has a critical point in its search ball the configured cap is
    returned and the result is flagged.
    """
    if c >= 1:
        raise ValueError("lifting_radius needs c < 1")
    Z = sample_positive(c, batch, seed)
    sets = critical_system_solve_many(c, Z, n_grid=n_grid, seed=seed)
    ratios = []
    for z, s in zip(Z, sets):
        w = s.min_solution
        if w is None:
            continue
        ratios.append((rho_cone(c, z + w) - rho_cone(c, z)) / rho_cone(c, z))
    if not ratios:
        return LiftingRadius(float(c), float(cap), float("inf"), safety, batch, seed, True)
    m = float(np.min(ratios))
    return LiftingRadius(float(c), safety * m, m, safety, batch, seed, False)
