"""Boundary diagnostics for holomorphic discs: Nevanlinna characteristic,
cluster-set sampling, radial stabilisation, range density by root counting,
and proper pairs (P, Q) on C².
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corepoly import check_gt, check_le

# --------------------------------------------------------------------------
# Nevanlinna characteristic
# --------------------------------------------------------------------------


def _log_plus(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 1.0, np.log(np.where(x > 1.0, x, 1.0)), 0.0)


@dataclass(frozen=True)
class CharacteristicValue:
    r: float
    value: float
    n_theta: int
    converged: bool
    delta: float


def nevanlinna_T(f, r: float, n_theta: int = 1024, tol: float = 1e-10) -> CharacteristicValue:
    """T(r, f) by the trapezoidal rule, with a 2n comparison as convergence flag."""
    if not 0 <= r < 1:
        raise ValueError("r must lie in [0, 1)")

    def quad(n):
        zeta = r * np.exp(2j * np.pi * np.arange(n) / n)
        return float(np.mean(_log_plus(np.abs(f(zeta)))))

    a = quad(n_theta)
    b = quad(2 * n_theta)
    return CharacteristicValue(float(r), b, 2 * n_theta, abs(a - b) <= tol * max(1.0, abs(b)), abs(a - b))


@dataclass(frozen=True)
class CharacteristicCurve:
    radii: np.ndarray
    values: np.ndarray
    n_theta: int
    deltas: np.ndarray

    def monotone(self, slack: float = 2.0) -> bool:
        """Nondecreasing within ``slack`` times the quadrature tolerance."""
        tol = slack * np.maximum(self.deltas[1:], self.deltas[:-1]) + 1e-14
        return bool(np.all(np.diff(self.values) >= -tol))


def characteristic_curve(f, radii, n_theta: int = 1024) -> CharacteristicCurve:
    vals = [nevanlinna_T(f, float(r), n_theta) for r in radii]
    return CharacteristicCurve(np.asarray(radii, dtype=float), np.array([v.value for v in vals]),
                               2 * n_theta, np.array([v.delta for v in vals]))


# --------------------------------------------------------------------------
# cluster sets and radial stabilisation
# --------------------------------------------------------------------------


def in_stolz(zeta, theta0: float, alpha: float) -> np.ndarray:
    """Membership |Im(1 - ζ e^{-iθ})| < α |ζ - e^{iθ}| of the approach region."""
    zeta = np.asarray(zeta, dtype=complex)
    return np.abs((1.0 - zeta * np.exp(-1j * theta0)).imag) < alpha * np.abs(zeta - np.exp(1j * theta0))


@dataclass(frozen=True)
class ClusterRecord:
    theta0: float
    scheme: str
    param: float | None
    depths: np.ndarray
    points: np.ndarray
    values: np.ndarray
    stats: dict


def _scheme_points(theta0, scheme, depths, param, per_depth, rng):
    e = np.exp(1j * theta0)
    pts = []
    for d in depths:
        if scheme == "radial":
            pts.append(np.array([d * e]))
        elif scheme == "angular":
            # points on the circle |ζ| = d with |arg offset| inside the region
            k = np.arange(per_depth)
            off = (k - (per_depth - 1) / 2) / max(per_depth - 1, 1)
            cand = d * np.exp(1j * (theta0 + off * 4.0 * param * (1.0 - d)))
            pts.append(cand[in_stolz(cand, theta0, param)])
        elif scheme == "unrestricted":
            # uniform samples of the window |ζ - e^{iθ0}| < param intersected with |ζ| = d
            phi = rng.uniform(-1, 1, per_depth) * param
            pts.append(d * np.exp(1j * (theta0 + phi)))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    return np.concatenate(pts) if pts else np.array([], dtype=complex)


def cluster_sample(f, theta0: float, scheme: str, depths, param: float | None = None,
                   per_depth: int = 16, seed: int = 0) -> ClusterRecord:
    """Values of f along an approach scheme toward e^{iθ0}.

    scheme: "radial"; "angular" with param α in (0, 1); "unrestricted" with
    param the angular window half-width.
    """
    depths = np.asarray(depths, dtype=float)
    if depths.size == 0 or np.any(np.diff(depths) <= 0):
        raise ValueError("depths must be strictly increasing")
    if np.any(depths >= 1) or np.any(depths < 0):
        raise ValueError("scheme point escapes U")
    if scheme == "angular" and not (param is not None and 0 < param < 1):
        raise ValueError("angular scheme needs α in (0, 1)")
    if scheme == "unrestricted" and not (param is not None and param > 0):
        raise ValueError("unrestricted scheme needs a positive window")
    rng = np.random.default_rng(seed)
    pts = _scheme_points(theta0, scheme, depths, param, per_depth, rng)
    if np.any(np.abs(pts) >= 1):
        raise ValueError("scheme point escapes U")
    if scheme == "angular":
        assert np.all(in_stolz(pts, theta0, param))
    vals = np.asarray(f(pts))
    flat = vals.reshape(len(pts), -1)
    stats = {
        "n": int(len(pts)),
        "bbox_re": [float(np.min(flat.real)), float(np.max(flat.real))] if len(pts) else [],
        "bbox_im": [float(np.min(flat.imag)), float(np.max(flat.imag))] if len(pts) else [],
        "dispersion": float(np.max(np.std(flat, axis=0))) if len(pts) else 0.0,
    }
    return ClusterRecord(float(theta0), scheme, param, depths, pts, vals, stats)


def chordal(a, b) -> np.ndarray:
    """Chordal distance on the Riemann sphere; ∞ handled as the north pole."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ia, ib = ~np.isfinite(a), ~np.isfinite(b)
    aa = np.where(ia, 0, a)
    bb = np.where(ib, 0, b)
    d = 2 * np.abs(aa - bb) / np.sqrt((1 + np.abs(aa) ** 2) * (1 + np.abs(bb) ** 2))
    d = np.where(ia & ~ib, 2 / np.sqrt(1 + np.abs(bb) ** 2), d)
    d = np.where(ib & ~ia, 2 / np.sqrt(1 + np.abs(aa) ** 2), d)
    return np.where(ia & ib, 0.0, d)


@dataclass(frozen=True)
class FatouScan:
    thetas: np.ndarray
    ladder: np.ndarray
    values: np.ndarray          # (nθ, len(ladder))
    stabilized: np.ndarray
    fraction: float
    tol: float


def fatou_scan(f, thetas, ladder, tol: float) -> FatouScan:
    """Fraction of directions whose radial values stabilise along the ladder
    (successive chordal differences below ``tol``)."""
    ladder = np.asarray(ladder, dtype=float)
    if ladder.size < 2 or np.any(np.diff(ladder) <= 0) or ladder[-1] >= 1:
        raise ValueError("ladder must increase toward 1")
    thetas = np.asarray(thetas, dtype=float)
    Z = ladder[None, :] * np.exp(1j * thetas)[:, None]
    with np.errstate(all="ignore"):
        V = np.asarray(f(Z), dtype=complex)
    if np.isinf(tol):
        stab = np.ones(len(thetas), dtype=bool)
    else:
        d = chordal(V[:, 1:], V[:, :-1])
        stab = np.all(d[:, -max(1, d.shape[1] // 2):] < tol, axis=1)
    return FatouScan(thetas, ladder, V, stab, float(np.mean(stab)) if len(stab) else 1.0, float(tol))


# --------------------------------------------------------------------------
# range density by root counting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RangeReport:
    theta0: float
    radius: float
    targets: np.ndarray
    counts: np.ndarray
    roots: list
    nearest: np.ndarray
    degree: int


def _poly_roots(c: np.ndarray) -> np.ndarray:
    """Roots of Σ c_k ζ^k by companion-matrix eigenvalues."""
    c = np.trim_zeros(np.asarray(c, dtype=complex), "b")
    if c.size <= 1:
        return np.array([], dtype=complex)
    return np.roots(c[::-1])


def range_density(g, theta0: float, radius: float, targets) -> RangeReport:
    """Roots of g - α inside the window |ζ - e^{iθ0}| < radius within U.

    ``g`` is the coefficient vector of a nonconstant polynomial (ascending).
    """
    g = np.trim_zeros(np.asarray(g, dtype=complex), "b")
    if g.size < 2:
        raise ValueError("g must be a nonconstant polynomial")
    if not radius > 0:
        raise ValueError("window radius must be positive")
    targets = np.asarray(targets, dtype=complex).ravel()
    e = np.exp(1j * theta0)
    counts, roots, nearest = [], [], []
    for a in targets:
        c = g.copy()
        c[0] -= a
        rts = _poly_roots(c)
        inside = rts[(np.abs(rts - e) < radius) & (np.abs(rts) < 1)]
        counts.append(inside.size)
        roots.append(np.sort_complex(inside))
        nearest.append(float(np.min(np.abs(rts - e))) if rts.size else np.inf)
    return RangeReport(float(theta0), float(radius), targets, np.array(counts), roots,
                       np.array(nearest), g.size - 1)


def _newton(p, dp, z, iters, tol):
    for _ in range(iters):
        with np.errstate(all="ignore"):
            step = p(z) / dp(z)
        step = np.where(np.isfinite(step), step, 0)
        z = z - step
        if np.all(np.abs(step) <= tol * (1 + np.abs(z))):
            break
    return z


def _divide(q, r):
    """Synthetic division by (ζ - r); returns quotient and remainder."""
    quo = np.zeros(q.size - 1, dtype=complex)
    acc = 0j
    for k in range(q.size - 1, 0, -1):
        acc = q[k] + acc * r
        quo[k - 1] = acc
    return quo, q[0] + acc * r


def newton_roots(c, n_starts: int = 0, seed: int = 0, iters: int = 200, tol: float = 1e-14,
                 rounds: int = 20):
    """Independent oracle: multi-start Newton on the deflated polynomial.

    Each round starts Newton from rings between the Cauchy root bounds plus
    random points, keeps distinct converged roots and deflates them out in
    order of increasing modulus.  Roots are polished on the original
    polynomial at the end.  No eigenvalue solver involved.
    """
    c = np.trim_zeros(np.asarray(c, dtype=complex), "b")
    deg = c.size - 1
    if deg < 1:
        return np.array([], dtype=complex)
    P = np.polynomial.polynomial.Polynomial
    p0 = P(c)
    dp0 = p0.deriv()
    rng = np.random.default_rng(seed)
    out = []
    q = c.copy()
    for _ in range(rounds):
        m = q.size - 1
        if m < 1:
            break
        hi = 1 + float(np.max(np.abs(q[:-1] / q[-1])))
        lo = 1 / (1 + float(np.max(np.abs(q[1:] / q[0])))) if q[0] != 0 else 1e-3 * hi
        ns = n_starts or 4 * m
        ring = np.exp(2j * np.pi * (np.arange(2 * m) + rng.uniform()) / (2 * m))
        starts = np.concatenate(
            [rad * ring for rad in np.geomspace(lo, hi, 6)]
            + [hi * np.sqrt(rng.uniform(0, 1, ns)) * np.exp(2j * np.pi * rng.uniform(0, 1, ns))])
        pq = P(q)
        with np.errstate(all="ignore"):
            z = _newton(pq, pq.deriv(), starts, iters, tol)
            z = z[np.isfinite(z) & (np.abs(z) <= 2 * hi)]
        found = []
        for r in z[np.argsort(np.abs(z))]:
            scale = np.sum(np.abs(q) * max(1.0, abs(r)) ** np.arange(q.size))
            if abs(pq(r)) <= 1e-9 * scale and all(abs(r - s) > 1e-6 * (1 + abs(s)) for s in found):
                found.append(r)
        progress = False
        for r in found:
            # strip every copy of r (multiplicity) the current quotient admits
            while q.size > 1:
                quo, rem = _divide(q, r)
                if abs(rem) > 1e-8 * np.sum(np.abs(q) * max(1.0, abs(r)) ** np.arange(q.size)):
                    break
                out.append(r)
                q = quo
                progress = True
        if not progress:
            break
    with np.errstate(all="ignore"):
        out = _newton(p0, dp0, np.array(out, dtype=complex), 4, tol)
    return out


# --------------------------------------------------------------------------
# proper pairs (P, Q)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProperPair:
    P: dict
    Q: tuple
    lines: list
    t0: float
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.passed for ch in self.checks)


def _eval_poly2(P: dict, z1, z2):
    out = np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
    for (i, j), c in P.items():
        out = out + c * z1 ** i * z2 ** j
    return out


def leading_lines(P: dict) -> list:
    """Directions (a, b) of the linear factors of the leading homogeneous part."""
    P = {k: complex(v) for k, v in P.items() if v != 0}
    if not P or max(i + j for i, j in P) == 0:
        raise ValueError("P must be nonconstant")
    d = max(i + j for i, j in P)
    # P'(z1, z2) = Σ_{i+j=d} c_ij z1^i z2^j;  on z = (1, t):  Σ c_{d-j,j} t^j
    coef = np.array([P.get((d - j, j), 0j) for j in range(d + 1)])
    lines = []
    deg_t = int(np.max(np.nonzero(coef)[0]))
    roots = np.roots(coef[: deg_t + 1][::-1]) if deg_t > 0 else np.array([], dtype=complex)
    if deg_t > 0 and roots.size != deg_t:
        raise ValueError("factorisation failure")
    for t in roots:
        v = np.array([1.0, t], dtype=complex)
        lines.append(v / np.linalg.norm(v))
    # missing degree in t means the line z1 = 0 divides P' (multiplicity d - deg_t)
    for _ in range(d - deg_t):
        lines.append(np.array([0.0, 1.0], dtype=complex))
    return lines


def proper_pair(P: dict, seed: int = 0, t_grid=None, n_random: int = 8, max_tries: int = 100,
                vanish_tol: float = 1e-6) -> ProperPair:
    """A linear Q with (P, Q) proper, plus ray evidence.

    P is a dict {(i, j): coefficient} for Σ c_ij z1^i z2^j.  Q(z) = q1 z1 + q2 z2
    is drawn from unit-norm complex forms (fixed seed) until it vanishes on
    none of the factor lines of the leading homogeneous part.
    """
    lines = leading_lines(P)
    rng = np.random.default_rng(seed)
    q = None
    for _ in range(max_tries):
        cand = rng.normal(size=2) + 1j * rng.normal(size=2)
        cand /= np.linalg.norm(cand)
        if all(abs(cand @ v) > vanish_tol for v in lines):
            q = cand
            break
    if q is None:
        raise ValueError("no admissible linear form found")
    t_grid = np.geomspace(1.0, 1e4, 41) if t_grid is None else np.asarray(t_grid, dtype=float)
    dirs = list(lines)
    for _ in range(n_random):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        dirs.append(v / np.linalg.norm(v))
    t0 = 0.0
    mono = True
    for v in dirs:
        m = np.maximum(np.abs(_eval_poly2(P, t_grid * v[0], t_grid * v[1])), np.abs(t_grid * (q @ v)))
        inc = np.diff(m) > 0
        if not inc[-1]:
            mono = False
            continue
        # first index from which growth is monotone
        bad = np.nonzero(~inc)[0]
        start = bad[-1] + 1 if bad.size else 0
        t0 = max(t0, float(t_grid[start]))
        if m[-1] < 1e3 * max(1.0, m[start]) and t_grid[-1] / t_grid[start] > 10:
            mono = False
    min_q = min(abs(q @ v) for v in lines) if lines else 1.0
    checks = (
        check_gt("min |Q| on factor lines (unit directions)", float(min_q), vanish_tol),
        check_gt("max(|P|,|Q|) grows monotonically beyond t0", float(mono), 0.5),
    )
    return ProperPair(dict(P), (complex(q[0]), complex(q[1])), lines, t0, checks)


def fixed_pair(P: dict, q, t_grid=None) -> ProperPair:
    """Evidence for a user-chosen linear Q = q1 z1 + q2 z2."""
    lines = leading_lines(P)
    q = np.asarray(q, dtype=complex)
    t_grid = np.geomspace(1.0, 1e4, 41) if t_grid is None else np.asarray(t_grid, dtype=float)
    mono = True
    t0 = 0.0
    for v in lines + [np.array([1, 1j]) / np.sqrt(2), np.array([1, -2]) / np.sqrt(5)]:
        m = np.maximum(np.abs(_eval_poly2(P, t_grid * v[0], t_grid * v[1])), np.abs(t_grid * (q @ v)))
        inc = np.diff(m) > 0
        bad = np.nonzero(~inc)[0]
        start = bad[-1] + 1 if bad.size else 0
        if start >= len(t_grid) - 1:
            mono = False
        t0 = max(t0, float(t_grid[min(start, len(t_grid) - 1)]))
    min_q = min(abs(q @ v) for v in lines)
    checks = (
        check_gt("min |Q| on factor lines (unit directions)", float(min_q), 1e-12),
        check_gt("max(|P|,|Q|) grows monotonically beyond t0", float(mono), 0.5),
    )
    return ProperPair(dict(P), (complex(q[0]), complex(q[1])), lines, t0, checks)


def q_residual_on_lines(pair: ProperPair) -> float:
    """max over factor lines of |Q(v)| when Q vanishes identically there (0 if never)."""
    q = np.asarray(pair.Q)
    return float(min(abs(q @ v) for v in pair.lines)) if pair.lines else np.inf
