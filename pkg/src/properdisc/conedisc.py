"""Inductive construction of discs proper in the cone {ρ_c > 0} for c < 1,
the mean-value obstruction for c >= 1, and the gradient-flow crossing of the
critical level at the origin.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .corepoly import Check, PolyMap, check_ge, check_gt, check_le, check_lt, circle_nodes
from .levigeom import lifting_radius, rho_cone
from .liftengine import (
    MAX_DEGREE,
    LiftError,
    lift_step_cone,
    radii_ladder,
    verification_size,
)

log = logging.getLogger(__name__)


def stage_levels(M1: float, a: float, K: int) -> list[float]:
    """M_k = (1+a)^{k-1} M_1 for k = 1..K."""
    return [M1 * (1.0 + a) ** (k - 1) for k in range(1, K + 1)]


def stage_eps(eps: float, K: int) -> list[float]:
    """ε_k = ε / 2^{k-1} for k = 1..K."""
    return [eps / 2.0 ** (k - 1) for k in range(1, K + 1)]


@dataclass
class Stage:
    k: int
    g: PolyMap
    r: float
    M: float
    eps: float
    checks: tuple
    lift: dict | None = None

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "r": self.r,
            "M": self.M,
            "eps": self.eps,
            "degree": self.g.degree,
            "passed": self.passed,
            "checks": [ch.as_dict() for ch in self.checks],
            "lift": self.lift,
        }


@dataclass
class StageSequence:
    stages: list
    params: dict
    final_checks: tuple = ()
    partial: bool = False
    failure: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (not self.partial) and all(s.passed for s in self.stages) and all(
            ch.passed for ch in self.final_checks)

    @property
    def final(self) -> PolyMap:
        return self.stages[-1].g

    def as_dict(self) -> dict:
        return {
            "params": {k: self.params[k] for k in sorted(self.params)},
            "stages": [s.as_dict() for s in self.stages],
            "final_checks": [ch.as_dict() for ch in self.final_checks],
            "partial": self.partial,
            "failure": self.failure,
            "ok": self.ok,
            **{k: self.extra[k] for k in sorted(self.extra)},
        }


# --------------------------------------------------------------------------
# gradient flow of ρ_c and the crossing of the critical level
# --------------------------------------------------------------------------


def flow(c: float, z, t) -> np.ndarray:
    """Closed-form time-t map of ẋ = ∇ρ_c: x e^{2t} + i y e^{-2ct}."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    tt = t[..., None] if t.ndim and t.shape == z.shape[:-1] else t
    return z.real * np.exp(2.0 * tt) + 1j * z.imag * np.exp(-2.0 * c * tt)


@dataclass(frozen=True)
class FlowParams:
    c: float
    radii: np.ndarray
    theta: np.ndarray
    schedule: np.ndarray        # a(ζ) on the (radii, theta) grid
    inner: float
    defectNorm: float


@dataclass(frozen=True)
class CrossResult:
    radii: np.ndarray
    theta: np.ndarray
    f0: np.ndarray              # (nr, nθ, 2) samples
    f1: np.ndarray
    params: FlowParams
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.passed for ch in self.checks)


class ClearanceError(ValueError):
    def __init__(self, node: int, value: float, tol: float):
        super().__init__(f"boundary node {node} is within {value:.3e} of the stable manifold x = 0 (tol {tol:.1e})")
        self.node = node
        self.value = value


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _flow_time(c, z, target, t_max=50.0):
    """Smallest t with ρ_c(flow(z, t)) > target, per point (bisection)."""
    x2 = np.sum(z.real ** 2, axis=-1)
    y2 = np.sum(z.imag ** 2, axis=-1)
    val = lambda t: x2 * np.exp(4 * t) - c * y2 * np.exp(-4 * c * t)  # noqa: E731
    lo = np.zeros_like(x2)
    hi = np.full_like(x2, 0.25)
    while True:
        bad = val(hi) <= target
        if not bad.any() or hi.max() > t_max:
            break
        hi = np.where(bad, 2 * hi, hi)
    done = val(lo) > target
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        up = val(mid) > target
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return np.where(done, 0.0, hi)


def _dbar_defect(radii, theta, F):
    """sup |∂̄F| by centred differences on an interior polar grid."""
    if len(radii) < 3:
        return 0.0
    dr = radii[2:] - radii[:-2]
    dth = theta[1] - theta[0]
    Fr = (F[2:] - F[:-2]) / dr[:, None, None]
    Ft = (np.roll(F[1:-1], -1, axis=1) - np.roll(F[1:-1], 1, axis=1)) / (2 * dth)
    rr = radii[1:-1][:, None, None]
    eit = np.exp(1j * theta)[None, :, None]
    dbar = 0.5 * eit * (Fr + 1j * Ft / rr)
    return float(np.max(np.abs(dbar)))


def cross_critical_level(f0: PolyMap, c: float, target: float, r: float,
                         n_theta: int = 512, n_radii: int = 64, clearance: float = 1e-6) -> CrossResult:
    """Push the boundary of f0 above ``target`` along the gradient flow of ρ_c.

    f1(ζ) = θ_{a(ζ)}(f0(ζ)) with a(ζ) = A(θ)·smoothstep((|ζ|-r)/(1-r)), where
    A(θ) is found per boundary node by bisection.  f1 equals f0 on |ζ| <= r
    and is not holomorphic; the ∂̄ defect is measured and reported.
    """
    if not 0 < r < 1:
        raise ValueError("inner radius r must lie in (0, 1)")
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    radii = np.concatenate([np.linspace(0.0, r, n_radii // 2, endpoint=False),
                            np.linspace(r, 1.0, n_radii - n_radii // 2)])
    F0 = np.stack([f0.sample_circle(t, n_theta) for t in radii])
    xnorm = np.linalg.norm(F0[-1].real, axis=-1)
    i = int(np.argmin(xnorm))
    if xnorm[i] <= clearance:
        raise ClearanceError(i, float(xnorm[i]), clearance)
    if not np.all(np.isfinite(rho_cone(c, F0[-1]))):
        raise ValueError("ρ_c(f0) is not finite on T")
    # aim a hair above the target so the strict inequality survives rounding
    A = _flow_time(c, F0[-1], target + 1e-9 * max(1.0, abs(target)))
    prof = smoothstep((radii - r) / (1.0 - r))
    sched = prof[:, None] * A[None, :]
    F1 = flow(c, F0, sched)
    F1[radii <= r] = F0[radii <= r]
    defect = _dbar_defect(radii, theta, F1)
    vals = rho_cone(c, F1[-1])
    checks = (
        check_gt("ρ_c(f1) - M' on T", float(np.min(vals)) - target, 0.0),
        check_le("f1 - f0 on |ζ|<=r", float(np.max(np.abs(F1[radii <= r] - F0[radii <= r]))), 0.0),
        check_ge("schedule a >= 0", float(np.min(sched)), 0.0),
    )
    params = FlowParams(float(c), radii, theta, sched, float(r), defect)
    return CrossResult(radii, theta, F0, F1, params, checks)


# --------------------------------------------------------------------------
# the inductive builder
# --------------------------------------------------------------------------


def _annulus_min(c, g: PolyMap, lo: float, hi: float, n: int, extra_K: int = 1) -> float:
    radii = radii_ladder(lo, extra_K) if hi >= 1.0 else np.linspace(lo, hi, 9)
    radii = radii[(radii >= lo) & (radii <= hi)]
    if radii.size == 0:
        radii = np.array([hi])
    return float(min(np.min(rho_cone(c, g.sample_circle(t, n))) for t in radii))


def _disc_sup(g: PolyMap, r: float, n: int) -> float:
    """sup_{|ζ|<=r} |g| via the circle of radius r (maximum principle)."""
    return float(np.max(np.linalg.norm(g.sample_circle(r, n), axis=1)))


def choose_radius(c: float, g: PolyMap, M: float, k: int, r_prev: float, n: int, K_hint: int = 1):
    """First radius of the ladder 1 - 2^{-j}, j >= k, above r_prev whose
    annulus grid satisfies ρ_c(g) > M."""
    for j in range(k, 40):
        rr = 1.0 - 2.0 ** (-j)
        if rr <= r_prev:
            continue
        if _annulus_min(c, g, rr, 1.0, n, K_hint) > M:
            return rr
    return None


def build_proper_cone_disc(h: PolyMap, c: float, M: float, eps: float, r1: float, K: int,
                           a: float | None = None, seed: int = 7, max_degree: int = MAX_DEGREE,
                           max_family: int = 2 ** 10, time_budget: float | None = None,
                           verify_nodes: int = 512) -> StageSequence:
    """Certified stages g_1 = h, g_2, ..., g_K with (a_k), (b_k), (c_k).

    On any failure the partial sequence is returned with ``partial`` set.
    """
    if c >= 1:
        raise ValueError("c must be < 1 for the constructive builder")
    if not M > 0:
        raise ValueError("M must be positive; cross the critical level first")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < r1 < 1:
        raise ValueError("r1 must lie in (0, 1)")
    if K < 1:
        raise ValueError("K must be >= 1")
    t0 = time.monotonic()
    if a is None:
        a = lifting_radius(c, seed=seed).a
    Ms = stage_levels(M, a, K)
    Es = stage_eps(eps, K)
    params = {"c": c, "M1": M, "eps": eps, "r1": r1, "K": K, "a": a, "seed": seed,
              "max_degree": max_degree, "max_family": max_family}
    n0 = max(verify_nodes, verification_size(h.degree))
    m_h = _annulus_min(c, h, r1, 1.0, n0)
    if not m_h > M:
        raise ValueError(f"ρ_c(h) must exceed M on the annulus r1 <= |ζ| <= 1 (min {m_h:.4g})")
    first = Stage(1, h, r1, Ms[0], Es[0], (check_gt("(a_1) ρ(g_1) - M_1 on r_1<=|ζ|<=1", m_h - Ms[0], 0.0),))
    seq = StageSequence([first], params)
    for k in range(2, K + 1):
        if time_budget is not None and time.monotonic() - t0 > time_budget:
            seq.partial, seq.failure = True, f"time budget exhausted before stage {k}"
            break
        prev = seq.stages[-1]
        try:
            res = lift_step_cone(prev.g, c, prev.eps, prev.r, a=a,
                                 max_degree=max_degree, max_family=max_family)
        except LiftError as e:
            seq.partial, seq.failure = True, f"stage {k}: {e} [{e.where}]"
            break
        g = res.g
        n = max(verify_nodes, verification_size(g.degree))
        K_hint = int(res.cert.params.get("approx_K", 1))
        rk = choose_radius(c, g, Ms[k - 1], k, prev.r, n, K_hint)
        checks = [check_gt(f"lift certificate (stage {k})", float(res.cert.passed), 0.5)]
        if rk is None:
            checks.append(check_gt(f"(a_{k}) radius found", 0.0, 0.5))
            rk_used = 1.0 - 2.0 ** (-k)
        else:
            rk_used = rk
        checks.append(check_ge(f"r_{k} >= 1 - 2^-{k}", rk_used, 1.0 - 2.0 ** (-k)))
        checks.append(check_gt(f"(a_{k}) ρ(g_{k}) - M_{k} on r_{k}<=|ζ|<=1",
                               _annulus_min(c, g, rk_used, 1.0, n, K_hint) - Ms[k - 1], 0.0))
        # (b_k) on the closed disc
        worst = np.inf
        for t in np.unique(np.concatenate([np.linspace(0, 1, 9)[1:], radii_ladder(prev.r, K_hint)])):
            worst = min(worst, float(np.min(rho_cone(c, g.sample_circle(t, n))
                                            - rho_cone(c, prev.g.sample_circle(t, n)))))
        val0 = float(rho_cone(c, g(np.array([0j])))[0] - rho_cone(c, prev.g(np.array([0j])))[0])
        worst = min(worst, val0)
        checks.append(check_gt(f"(b_{k}) ρ(g_{k}) - ρ(g_{k-1}) + ε_{k-1} on Ū", worst + prev.eps, 0.0))
        checks.append(check_lt(f"(c_{k}) |g_{k} - g_{k-1}| on |ζ|<=r_{k-1}",
                               _disc_sup(g - prev.g, prev.r, n), prev.eps))
        st = Stage(k, g, rk_used, Ms[k - 1], Es[k - 1], tuple(checks), res.cert.as_dict())
        seq.stages.append(st)
        log.info("stage %d: degree %d, passed %s", k, g.degree, st.passed)
        if not st.passed:
            seq.partial, seq.failure = True, f"stage {k} certificate failed"
            break
    seq.final_checks = _telescoping_checks(c, seq, eps, verify_nodes)
    seq.extra["elapsed_s"] = round(time.monotonic() - t0, 3)
    if len(seq.stages) < K and not seq.partial:
        seq.partial = True
    return seq


def _telescoping_checks(c, seq: StageSequence, eps: float, verify_nodes: int) -> tuple:
    st = seq.stages
    gK = st[-1].g
    n = max(verify_nodes, verification_size(gK.degree))
    h = st[0].g
    out = [check_lt("sup_{|ζ|<=r_1} |g_K - h|", _disc_sup(gK - h, st[0].r, n), eps)]
    for i, s in enumerate(st[:-1]):
        tail = sum(x.eps for x in st[i:-1])
        out.append(check_lt(f"sup_{{|ζ|<=r_{s.k}}} |g_K - g_{s.k}| vs Σ_(j>={s.k}) ε_j",
                            _disc_sup(gK - s.g, s.r, n), tail))
    for i, s in enumerate(st):
        hi = st[i + 1].r if i + 1 < len(st) else 1.0
        out.append(check_gt(f"ρ(g_K) - M_{s.k} + ε on r_{s.k}<=|ζ|<={hi:.6g}",
                            _annulus_min(c, gK, s.r, hi, n) - s.M + eps, 0.0))
    return tuple(out)


# --------------------------------------------------------------------------
# c >= 1: the mean-value obstruction
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FalsifyReport:
    c: float
    radii: tuple
    center: float
    means: tuple
    min_rho1: tuple
    min_rhoc: tuple
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.passed for ch in self.checks)


def falsify_c_ge_1(f: PolyMap, c: float, radii=(0.5, 0.9, 0.99), n: int = 1024,
                   tol: float = 1e-8) -> FalsifyReport:
    """ρ_1∘f = Re(f1² + f2²) is harmonic, so its circle means equal the centre
    value and its boundary minima cannot exceed it; ρ_c <= ρ_1 for c >= 1."""
    if c < 1:
        raise ValueError("falsify_c_ge_1 needs c >= 1")
    center = float(rho_cone(1.0, f(np.array([0j])))[0])
    means, m1, mc, checks = [], [], [], []
    for r in radii:
        n_r = max(n, verification_size(2 * f.degree))
        vals = f.sample_circle(r, n_r)
        r1 = rho_cone(1.0, vals)
        rc = rho_cone(c, vals)
        means.append(float(np.mean(r1)))
        m1.append(float(np.min(r1)))
        mc.append(float(np.min(rc)))
        checks.append(check_le(f"|mean ρ_1 - ρ_1(f(0))| at r={r}", abs(means[-1] - center), tol))
        checks.append(check_le(f"min ρ_1 - ρ_1(f(0)) at r={r}", m1[-1] - center, tol))
        checks.append(check_le(f"min ρ_c - min ρ_1 at r={r}", mc[-1] - m1[-1], 0.0))
    return FalsifyReport(float(c), tuple(radii), center, tuple(means), tuple(m1), tuple(mc), tuple(checks))
