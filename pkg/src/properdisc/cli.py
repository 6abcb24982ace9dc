"""Command line front end: cone, tube, lift, diagnose, oracle.

Every run writes into ``--out`` a ``report.json`` (sorted keys, provenance
block), ``samples.csv`` (boundary/annulus samples of the final map) with a
``samples.provenance.json`` sidecar, and ``coeffs.json``.  Exit status is 0
when every certificate passes, 1 on a certificate failure (artifacts are
still written, flagged partial), 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .corepoly import PolyMap, circle_nodes

log = logging.getLogger("properdisc")

CSV_HEADER = "theta,r,re_f1,im_f1,re_f2,im_f2,rho"
# keys never echoed: they name where a run goes, not what it computes
_NOT_ECHOED = {"out", "config", "func", "verbose"}


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------


def parse_polymap(text: str) -> PolyMap:
    """"a0,a1,...;b0,b1,..." -> ζ ↦ (Σ a_k ζ^k, Σ b_k ζ^k); complex literals allowed."""
    parts = text.split(";")
    if len(parts) != 2:
        raise ConfigError("h", "expected two components separated by ';'")
    try:
        comps = [[complex(t.strip().replace(" ", "")) for t in p.split(",") if t.strip()] or [0j]
                 for p in parts]
    except ValueError as e:
        raise ConfigError("h", str(e)) from None
    return PolyMap.from_components(*comps)


def parse_poly2(text: str) -> dict:
    """"i,j:c;..." -> {(i, j): c} for Σ c z1^i z2^j."""
    out = {}
    try:
        for term in text.split(";"):
            if not term.strip():
                continue
            ij, c = term.split(":")
            i, j = (int(x) for x in ij.split(","))
            if i < 0 or j < 0:
                raise ValueError("negative exponent")
            out[(i, j)] = out.get((i, j), 0) + complex(c.strip())
    except ValueError as e:
        raise ConfigError("P", f"cannot parse {text!r}: {e}") from None
    return out


def read_config(path: str) -> list[str]:
    """key=value lines (``#`` comments) or a JSON object -> argv fragment."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        items = json.loads(text).items()
    else:
        items = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"line without '=': {line!r}")
            k, v = line.split("=", 1)
            items.append((k.strip(), v.strip()))
    cmd, argv = None, []
    for k, v in items:
        if k == "command":
            cmd = str(v)
            continue
        if isinstance(v, bool):
            if v:
                argv.append(f"--{k}")
            continue
        if isinstance(v, list):
            argv += [f"--{k}", ",".join(str(x) for x in v)]
        else:
            argv += [f"--{k}", str(v)]
    return ([cmd] if cmd else []) + argv


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe, deterministic: numpy -> python, non-finite floats -> strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def _fmt(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return f"{x:.14e}"


def samples_csv(theta, r, F, rho) -> str:
    """Rows theta,r,re_f1,im_f1,re_f2,im_f2,rho with 15 significant digits."""
    lines = [CSV_HEADER]
    for t, rr, f, p in zip(theta, r, F, rho):
        lines.append(",".join(_fmt(v) for v in (t, rr, f[0].real, f[0].imag, f[1].real, f[1].imag, p)))
    return "\n".join(lines) + "\n"


def grid_samples(evalf, rho, radii, n_theta: int):
    """Evaluate on circle_nodes(n_theta, r) for each r."""
    th, rr, F, P = [], [], [], []
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    for r in radii:
        z = circle_nodes(n_theta, r)
        vals = evalf(z)
        th.append(theta)
        rr.append(np.full(n_theta, r))
        F.append(vals)
        P.append(rho(z, vals))
    return np.concatenate(th), np.concatenate(rr), np.concatenate(F), np.concatenate(P)


def provenance(args, partial: bool) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in _NOT_ECHOED}
    return {"config": cfg, "seed": getattr(args, "seed", None), "version": __version__,
            "command": args.command, "partial": bool(partial)}


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


@contextmanager
def out_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError("out", f"{out} is locked by another run ({lock})") from None
    try:
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def export(out: Path, args, report: dict, partial: bool, samples=None, coeffs: PolyMap | None = None):
    prov = provenance(args, partial)
    _write(out / "report.json", dump_json(dict(report, provenance=prov)))
    if samples is not None:
        _write(out / "samples.csv", samples_csv(*samples))
        _write(out / "samples.provenance.json", dump_json({"provenance": prov, "columns": CSV_HEADER.split(",")}))
    if coeffs is not None:
        _write(out / "coeffs.json", dump_json({
            "provenance": prov,
            "degree": coeffs.degree,
            "f1": [[c.real, c.imag] for c in coeffs.coeffs[:, 0]],
            "f2": [[c.real, c.imag] for c in coeffs.coeffs[:, 1]],
        }))


def load_coeffs(path: Path) -> PolyMap:
    d = json.loads(Path(path).read_text())
    f1 = [complex(a, b) for a, b in d["f1"]]
    f2 = [complex(a, b) for a, b in d["f2"]]
    return PolyMap.from_components(f1, f2)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _validate_common(args):
    if getattr(args, "c", None) is not None and args.command in ("cone", "lift", "oracle") and not args.c < 1:
        raise ConfigError("c", f"must be < 1 for constructive commands (got {args.c})")
    r1 = getattr(args, "r1", None)
    if r1 is not None and not 0 < r1 < 1:
        raise ConfigError("r1", f"must lie in (0, 1) (got {r1})")
    st = getattr(args, "stages", None)
    if st is not None and st < 1:
        raise ConfigError("stages", f"must be >= 1 (got {st})")
    eps = getattr(args, "eps", None)
    if eps is not None and not eps > 0:
        raise ConfigError("eps", f"must be positive (got {eps})")
    gt = getattr(args, "gridTheta", None)
    if gt is not None and gt < 1:
        raise ConfigError("gridTheta", f"must be >= 1 (got {gt})")
    gr = getattr(args, "gridRadii", None)
    if gr is not None:
        rs = _floats(gr)
        if not rs or any(not 0 <= r <= 1 for r in rs):
            raise ConfigError("gridRadii", f"radii must lie in [0, 1] (got {gr})")


def cmd_cone(args):
    from .conedisc import build_proper_cone_disc
    from .levigeom import rho_cone

    if not args.M > 0:
        raise ConfigError("M", f"must be positive (got {args.M})")
    h = parse_polymap(args.h)
    try:
        seq = build_proper_cone_disc(h, args.c, args.M, args.eps, args.r1, args.stages, a=args.a,
                                     seed=args.seed, max_family=args.max_family,
                                     verify_nodes=args.verify_nodes)
    except ValueError as e:
        raise ConfigError("h", str(e)) from None
    rep = seq.as_dict()
    rep.pop("elapsed_s", None)
    g = seq.final
    samples = grid_samples(g, lambda z, v: rho_cone(args.c, v), _floats(args.gridRadii), args.gridTheta)
    return rep, seq.ok, seq.partial, samples, g


def cmd_tube(args):
    from .tubedisc import build_axis_avoiding_disc, rho_max

    h = parse_polymap(args.h)
    try:
        seq, ed = build_axis_avoiding_disc(h, args.r1, args.stages, M1=args.M,
                                           max_family=args.max_family, verify_nodes=args.verify_nodes)
    except ValueError as e:
        raise ConfigError("h", str(e)) from None
    rep = seq.as_dict()
    rep.pop("elapsed_s", None)
    rep["exponentiate"] = {"checks": [ch.as_dict() for ch in ed.checks], "ok": ed.ok}
    g = seq.final

    def f(z):
        with np.errstate(over="ignore"):
            return np.exp(g(z))

    samples = grid_samples(f, lambda z, v: rho_max(g(z)), _floats(args.gridRadii), args.gridTheta)
    return rep, seq.ok and ed.ok, seq.partial, samples, g


def cmd_lift(args):
    from .levigeom import rho_cone
    from .liftengine import LiftError, lift_step_cone

    h = parse_polymap(args.h)
    try:
        res = lift_step_cone(h, args.c, args.eps, args.r, a=args.a, max_family=args.max_family)
    except LiftError as e:
        rep = {"lift": None, "failure": f"{e} [{e.where}]", "ok": False}
        samples = grid_samples(h, lambda z, v: rho_cone(args.c, v), _floats(args.gridRadii), args.gridTheta)
        return rep, False, True, samples, h
    rep = {"lift": res.cert.as_dict(), "degree": res.g.degree, "ok": res.cert.passed}
    samples = grid_samples(res.g, lambda z, v: rho_cone(args.c, v), _floats(args.gridRadii), args.gridTheta)
    return rep, res.cert.passed, False, samples, res.g


def cmd_oracle(args):
    from .levigeom import critical_residuals, critical_system_solve_many, lifting_radius, rho_cone, sample_positive

    lr = lifting_radius(args.c, batch=args.batch, seed=args.seed)
    Z = sample_positive(args.c, args.batch, args.seed + 1)
    sets = critical_system_solve_many(args.c, Z, seed=args.seed)
    worst_res, n_sol, lifted, missing = 0.0, 0, 0, 0
    for z, s in zip(Z, sets):
        n_sol += len(s.solutions)
        for w in s.solutions:
            r1, r2 = critical_residuals(args.c, z, w)
            worst_res = max(worst_res, float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))
        w = s.min_solution
        if w is None:
            missing += 1
            continue
        lifted += bool(rho_cone(args.c, z + w) >= (1 + lr.a) * rho_cone(args.c, z))
    ok = (lr.a > 0 and not lr.flagged and worst_res <= args.residual_tol
          and lifted == args.batch - missing and missing == 0)
    rep = {
        "a": lr.a, "min_ratio": lr.min_ratio, "safety": lr.safety, "flagged": lr.flagged,
        "batch": args.batch, "solutions": n_sol, "max_residual": worst_res,
        "lifted": lifted, "without_solution": missing, "ok": ok,
    }
    print(f"a({args.c}) = {lr.a:.6g}  (> 0: {lr.a > 0})")
    print(f"{args.batch} points, {n_sol} critical points, max residual {worst_res:.3e}, "
          f"lift ρ(z+w) >= (1+a)ρ(z) holds for {lifted}/{args.batch - missing}")
    return rep, ok, False, None, None


def cmd_diagnose(args):
    from . import boundarylab as bl

    if args.source:
        g = load_coeffs(Path(args.source) / "coeffs.json")
    else:
        g = parse_polymap(args.h)
    radii = _floats(args.radii)
    rep: dict = {"degree": g.degree, "components": {}}
    ok = True
    for j in range(2):
        cj = g.component(j)
        fj = lambda z, cj=cj: np.polynomial.polynomial.polyval(z, cj)  # noqa: E731
        curve = bl.characteristic_curve(fj, radii, args.gridTheta)
        scan = bl.fatou_scan(fj, 2 * np.pi * np.arange(args.directions) / args.directions,
                             1 - np.geomspace(0.1, 1e-3, 8), args.stab_tol)
        clus = bl.cluster_sample(fj, args.theta0, "unrestricted", 1 - np.geomspace(0.1, 1e-3, 8),
                                 param=args.window, seed=args.seed)
        entry = {
            "T": {"radii": curve.radii, "values": curve.values, "monotone": curve.monotone()},
            "fatou_fraction": scan.fraction,
            "cluster": clus.stats,
        }
        ok &= curve.monotone()
        if np.any(np.abs(cj[1:]) > 0):
            side = np.linspace(-args.target_span, args.target_span, args.targets)
            T = (side[:, None] + 1j * side[None, :]).ravel()
            rd = bl.range_density(cj, args.theta0, args.window, T)
            entry["range"] = {"hits": int(rd.counts.sum()), "targets": int(T.size),
                              "max_count": int(rd.counts.max()), "degree": rd.degree}
            ok &= bool(rd.counts.max() <= rd.degree)
        rep["components"][f"f{j + 1}"] = entry
    if args.P:
        pair = bl.proper_pair(parse_poly2(args.P), seed=args.seed)
        rep["proper_pair"] = {"Q": pair.Q, "t0": pair.t0, "lines": pair.lines,
                              "checks": [ch.as_dict() for ch in pair.checks], "ok": pair.ok}
        ok &= pair.ok
    rep["ok"] = bool(ok)
    rep["note"] = "stage-map diagnostics, not statements about the limit map"
    return rep, bool(ok), False, None, None


# --------------------------------------------------------------------------
# argument parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="properdisc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--config", help="key=value or JSON config file (flags override)")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, default=7)
        sp.add_argument("--verbose", action="store_true")

    def grid(sp):
        sp.add_argument("--gridTheta", type=int, default=512)
        sp.add_argument("--gridRadii", default="1.0", help="comma separated radii")

    sp = sub.add_parser("cone", help="proper disc in the cone {ρ_c > 0}")
    common(sp)
    grid(sp)
    sp.add_argument("--c", type=float, default=0.5)
    sp.add_argument("--M", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--r1", type=float, default=0.5)
    sp.add_argument("--stages", type=int, default=6)
    sp.add_argument("--a", type=float, default=None, help="lifting radius (calibrated if omitted)")
    sp.add_argument("--h", default="1.5,0.2;0")
    sp.add_argument("--max_family", type=int, default=2 ** 10)
    sp.add_argument("--verify_nodes", type=int, default=512)
    sp.set_defaults(func=cmd_cone)

    sp = sub.add_parser("tube", help="axis-avoiding disc for max(x1, x2)")
    common(sp)
    grid(sp)
    sp.add_argument("--r1", type=float, default=0.5)
    sp.add_argument("--stages", type=int, default=5)
    sp.add_argument("--M", type=float, default=None)
    sp.add_argument("--h", default="1;1")
    sp.add_argument("--max_family", type=int, default=2 ** 10)
    sp.add_argument("--verify_nodes", type=int, default=512)
    sp.set_defaults(func=cmd_tube)

    sp = sub.add_parser("lift", help="one cone lifting step")
    common(sp)
    grid(sp)
    sp.add_argument("--c", type=float, default=0.5)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--r", type=float, default=0.5)
    sp.add_argument("--a", type=float, default=None)
    sp.add_argument("--h", default="1.5,0.2;0")
    sp.add_argument("--max_family", type=int, default=2 ** 10)
    sp.set_defaults(func=cmd_lift)

    sp = sub.add_parser("diagnose", help="boundary diagnostics of a disc map")
    common(sp)
    sp.add_argument("--source", help="run directory holding coeffs.json")
    sp.add_argument("--h", default="0,1;0")
    sp.add_argument("--gridTheta", type=int, default=1024)
    sp.add_argument("--radii", default="0.1,0.3,0.5,0.7,0.9,0.95,0.99")
    sp.add_argument("--directions", type=int, default=64)
    sp.add_argument("--stab_tol", type=float, default=1e-2)
    sp.add_argument("--theta0", type=float, default=0.0)
    sp.add_argument("--window", type=float, default=0.1)
    sp.add_argument("--targets", type=int, default=11)
    sp.add_argument("--target_span", type=float, default=2.0)
    sp.add_argument("--P", default=None, help="polynomial on C² as 'i,j:c;...'")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("oracle", help="critical-point oracle and lifting radius a(c)")
    common(sp)
    sp.add_argument("--c", type=float, default=0.5)
    sp.add_argument("--batch", type=int, default=100)
    sp.add_argument("--residual_tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_oracle)
    return p


def _expand_config(argv: list[str]) -> list[str]:
    """Splice a --config file in front of the remaining flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("config", "missing path")
    frag = read_config(argv[i + 1])
    rest = argv[:i] + argv[i + 2:]
    has_cmd = bool(rest) and not rest[0].startswith("-")
    if frag and not frag[0].startswith("-"):
        cmd, frag = frag[0], frag[1:]
        if not has_cmd:
            rest = [cmd] + rest
    if not rest:
        raise ConfigError("command", "no command given")
    return rest[:1] + frag + rest[1:]


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"properdisc: error: {e}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate_common(args)
        if args.out:
            out = Path(args.out)
            with out_lock(out):
                rep, ok, partial, samples, g = args.func(args)
                export(out, args, rep, partial or not ok, samples, g)
        else:
            rep, ok, partial, samples, g = args.func(args)
            if args.command != "oracle":
                sys.stdout.write(dump_json(dict(rep, provenance=provenance(args, partial or not ok))))
    except ConfigError as e:
        print(f"properdisc: error: {e}", file=sys.stderr)
        return 2
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
