"""Command-line front end.

Exit codes: 0 ok, 1 assertion failure, 2 usage or config error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fock, hopf, modes, quatgeom, torsorcech
from .errors import (
    DegeneratePointError,
    DegenerateSolutionError,
    FockGerbeError,
    NonConvergedError,
    RefineError,
    SingularCError,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SUITES = ("clifford", "modes", "torsor", "cech", "geom", "all")


class ConfigError(Exception):
    pass


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


# -- check suites ----------------------------------------------------------------------

def _suite_clifford(rng, pairs: int = 200) -> list:
    out = []
    for n, Q, D in ((2, 1, 3), (4, 0, 2), (4, 1, 4)):
        mb = modes.ModeBasis(n, Q)
        fb = fock.FockBasis(modes.standard_lagrangian(mb), D)
        rows = fb.below_cap()
        worst = 0.0
        for _ in range(pairs):
            v, w = mb.random_real(rng), mb.random_real(rng)
            a, b = fock.clifford_matrix(v, fb), fock.clifford_matrix(w, fb)
            anti = (a @ b + b @ a)[:, rows]
            target = 2 * fock.real_inner(v, w) * np.eye(fb.dim)[:, rows]
            worst = max(worst, float(np.max(np.abs(anti - target))))
        out.append((f"anticommutator n={n} Q={Q} D={D}", worst <= 1e-9, worst))
        c = fb.creator_matrices[0]
        out.append((f"annihilator squares to zero n={n} Q={Q}", np.max(np.abs(c.T @ c.T)) == 0, 0.0))
    return out


def _suite_modes(rng) -> list:
    out = []
    mb = modes.ModeBasis(2, 2)
    L = modes.standard_lagrangian(mb)
    P = modes.projector_pl(L).matrix
    out.append(("projector idempotent", float(np.max(np.abs(P @ P - P))) <= 1e-12, 0.0))
    g = modes.random_orthogonal(mb, rng, 0.2)
    out.append(("random loop operator orthogonal", g.is_orthogonal, g.unitary_defect))
    c, a = modes.decompose_ca(g, L.J)
    d = float(np.max(np.abs(c.matrix + a.matrix - g.matrix)))
    out.append(("C + A = g", d <= 1e-12, d))
    z = modes.zg(g, L.J)
    sd = max(modes.sym_defects(z, L.J, mb).values())
    out.append(("Z_g in Sym", sd <= 1e-9, sd))
    w = modes.retract(z, L.J, mb)
    zw = modes.zg(w, L.J)
    d = float(np.max(np.abs(zw.matrix - z.matrix)))
    out.append(("Z of retract reproduces Z", d <= 1e-9, d))
    k = modes.LagrangianFrame(mb, g.matrix @ L.columns)
    conj = np.asarray(modes.canonical_conjugator(L.J, k.J))
    d = float(np.max(np.abs(conj @ L.J @ conj.conj().T - k.J)))
    out.append(("canonical conjugator maps J to K", d <= 1e-9, d))
    return out


def _suite_torsor(rng) -> list:
    out = []
    t = torsorcech.PhaseElement(np.exp(1j * rng.uniform(0, 6)), "T")
    z = np.exp(1j * rng.uniform(0, 6))
    d = abs(torsorcech.torsor_pair(t.act(z), t) - z)
    out.append(("pair(zt, t) = z", d <= 1e-12, d))
    d = abs(torsorcech.dual_pairing(torsorcech.torsor_dual(t), t) - 1)
    out.append(("t* (x) t -> 1", d <= 1e-12, d))
    tt = torsorcech.torsor_dual(torsorcech.torsor_dual(t))
    out.append(("double dual", tt.tag == t.tag and abs(tt.value - t.value) <= 1e-15, 0.0))
    return out


def _suite_cech(rng) -> list:
    out = []
    for cover in (torsorcech.circle_cover(4, 64), torsorcech.circle_cover(3, 64, 0.6)):
        for p in range(2):
            c = torsorcech.random_cochain(cover, p, rng)
            dd = torsorcech.cech_coboundary(torsorcech.cech_coboundary(c))
            out.append((f"dd = 1 arcs={len(cover.labels)} p={p}", dd.is_trivial(1e-12), dd.max_defect()))
    U = torsorcech.circle_cover(4, 64)
    h = torsorcech.random_cochain(U, 1, rng)
    g = torsorcech.suspension_forward(h)
    back = torsorcech.suspension_partial_inverse(g)
    d = back.distance(h)
    out.append(("suspension round trip", d <= 1e-10, d))
    return out


def _suite_geom(rng) -> list:
    out = []
    for _ in range(20):
        w = quatgeom.Quaternion(*rng.normal(size=4))
        p = quatgeom.stereo_north_inv(w)
        d = (quatgeom.stereo_north(p) - w).norm()
        out.append(("stereographic round trip", d <= 1e-10, d))
        x = rng.normal(size=4)
        x[1] = 0.0
        x /= np.linalg.norm(x)
        if x[0] > -0.999:
            r = quatgeom.eta_relation_residual(x, 16)
            out.append(("eta_{+i} = r eta_{-i}", r <= 1e-10, r))
    return out


_SUITES = {
    "clifford": _suite_clifford,
    "modes": _suite_modes,
    "torsor": _suite_torsor,
    "cech": _suite_cech,
    "geom": _suite_geom,
}


def cmd_check(args) -> int:
    names = list(_SUITES) if args.suite == "all" else [args.suite]
    rng = np.random.default_rng(args.seed)
    failures = []
    total = 0
    for name in names:
        for label, ok, value in _SUITES[name](rng):
            total += 1
            if not ok:
                failures.append({"suite": name, "check": label, "value": float(value)})
    _emit({"seed": args.seed, "suites": names, "checks": total, "failures": failures})
    return EXIT_OK if not failures else EXIT_FAIL


# -- implementer --------------------------------------------------------------------------

def load_loop(path) -> modes.FourierLoop:
    """JSON {"n": n, "coefficients": [{"k": k, "re": [[..]], "im": [[..]]}, ...]}."""
    d = _load_json(path)
    try:
        n = int(d["n"])
        coeffs = {}
        for e in d["coefficients"]:
            re = np.asarray(e["re"], dtype=float)
            im = np.asarray(e.get("im", np.zeros_like(re)), dtype=float)
            if re.shape != (n, n) or im.shape != (n, n):
                raise ConfigError(f"coefficient {e['k']} is not {n}x{n}")
            coeffs[int(e["k"])] = coeffs.get(int(e["k"]), 0) + re + 1j * im
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed loop file: {exc}") from exc
    loop = modes.FourierLoop(coeffs)
    s = quatgeom.loop_params(64)
    vals = loop.evaluate(s)
    if np.max(np.abs(vals.imag)) > 1e-9:
        raise ConfigError("loop is not real valued")
    v = vals.real
    if np.max(np.abs(np.swapaxes(v, 1, 2) @ v - np.eye(n))) > 1e-9 or np.min(np.linalg.det(v)) < 0:
        raise ConfigError("loop does not take values in SO(n)")
    return loop


def implementer_report(loop: modes.FourierLoop, cutoff: int, degree: int | None = None) -> dict:
    n = loop.n
    mb = modes.ModeBasis(n, cutoff)
    L = modes.standard_lagrangian(mb)
    if degree is not None and degree != L.dim:
        raise ConfigError(f"the intertwiner needs the full degree cap {L.dim}")
    m_op = modes.multiplication_operator(mb, loop)
    if m_op.is_orthogonal:
        g = m_op.matrix
        representative = "multiplication"
    else:
        kw = modes.window_lagrangian(mb, loop)
        cols = modes.aligned_frame(mb, kw.columns, L.columns)
        g = modes.orthogonal_from_frames(mb, L, cols).matrix
        representative = "window-frame"
    K = modes.LagrangianFrame(mb, g @ L.columns)
    bl, bk = fock.FockBasis(L), fock.FockBasis(K)
    t = fock.canonical_intertwiner(bl, bk)
    report = {
        "n": n,
        "cutoff": cutoff,
        "band": loop.band,
        "fock_dim": bl.dim,
        "representative": representative,
        "leakage": m_op.leakage,
        "hs_norm": modes.commutator_block_norm(mb, loop),
        "sigma_min": float(np.linalg.svd(L.columns.conj().T @ K.columns, compute_uv=False)[-1]),
        "intertwiner": {
            "phase": t.meta["phase"],
            "vacuum_overlap": [float(t.matrix[0, 0].real), float(t.matrix[0, 0].imag)],
            "residual": fock.intertwining_residual(t.matrix, bl, bk),
            "unitary_defect": t.unitary_defect,
        },
        "implementer": None,
    }
    try:
        U = fock.implementer(g, bl, tol=np.inf)
        lam = fock.lambda_g(g, bl, bl) if np.allclose(K.projector, L.projector, atol=1e-10) else None
        report["implementer"] = {
            "residual": U.meta["residual"],
            "vacuum_overlap": float(U.matrix[0, 0].real),
            "identity_defect": float(np.max(np.abs(U.matrix - np.eye(bl.dim)))),
            "lambda_defect": None if lam is None else float(np.max(np.abs(U.matrix - lam.matrix))),
        }
    except SingularCError as exc:
        report["implementer"] = {"error": str(exc), "sigma_min": exc.sigma_min}
    return report


def cmd_implementer(args) -> int:
    loop = load_loop(args.loop_file)
    report = implementer_report(loop, args.cutoff, args.degree)
    _emit(report, args.out)
    res = report["intertwiner"]["residual"]
    if res > 1e-8:
        return EXIT_NUMERIC
    return EXIT_OK


# -- dd and suspend -------------------------------------------------------------------------

def _cover_from_config(d: dict) -> torsorcech.IndexedCover:
    kind = d.get("type", "circle")
    if kind == "circle":
        return torsorcech.circle_cover(int(d.get("arcs", 4)), int(d.get("samples", 64)),
                                       float(d.get("overlap", 0.25)))
    if kind == "two-cap":
        return torsorcech.two_cap_cover(int(d.get("samples", 64)))
    if kind == "explicit":
        return torsorcech.IndexedCover.from_json(d)
    raise ConfigError(f"unknown cover type {kind!r}")


def dd_report(cfg: dict) -> dict:
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    cover = _cover_from_config(cfg.get("cover", {"type": "circle", "arcs": 3, "overlap": 0.6}))
    eta = {}
    for i in cover.labels:
        a = torsorcech.random_cochain(cover, 0, rng).angle((i,))
        eta[i] = torsorcech.PhaseElement(np.exp(1j * np.asarray(a)), ("R", i))
    sections = torsorcech.trivial_gerbe_sections(cover, eta)
    h = None
    if cfg.get("rescale", False):
        h = torsorcech.random_cochain(cover, 1, rng)
        sections = torsorcech.rescale_sections(cover, sections, h)
    g = torsorcech.dd_cocycle(cover, sections, torsorcech.contraction_mult,
                              torsorcech.trivial_gerbe_unit)
    dg = torsorcech.cech_coboundary(g)
    out = {
        "seed": int(cfg.get("seed", 0)),
        "cocycle": g.to_json(),
        "cocycle_residual": dg.max_defect(),
        "trivial_defect": g.max_defect(),
    }
    if h is not None:
        out["coboundary_distance"] = g.distance(torsorcech.cech_coboundary(h))
    return out


def cmd_dd(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    report = dd_report(cfg)
    _emit(report, args.out)
    ok = report["cocycle_residual"] <= 1e-10
    if "coboundary_distance" in report:
        ok = ok and report["coboundary_distance"] <= 1e-10
    else:
        ok = ok and report["trivial_defect"] <= 1e-10
    return EXIT_OK if ok else EXIT_FAIL


def suspend_report(cfg: dict) -> dict:
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    cover = _cover_from_config(cfg.get("cover", {"type": "two-cap", "samples": 64}))
    winding = int(cfg.get("winding", 1))
    h = torsorcech.random_cochain(cover, 1, rng, band=int(cfg.get("band", 2)))
    if cover.simplices(2):
        # with triple overlaps a random 1-cochain is not a cocycle; a coboundary is
        h = torsorcech.cech_coboundary(torsorcech.random_cochain(cover, 0, rng))
    entries = {}
    for s, a in h.entries.items():
        pts = cover.grid_points(s)
        if np.ndim(a) and cover.simplex_grid(s) is None:
            a = a + winding * 2 * np.pi * pts / cover.grid
        entries[s] = a
    h = torsorcech.CechCochain(cover, 1, entries)
    g = torsorcech.suspension_forward(h)
    back = torsorcech.suspension_partial_inverse(g)
    windings = {}
    for s in h.cover.simplices(1):
        if cover.simplex_grid(s) is None and cover.grid:
            windings["-".join(map(str, s))] = {
                "input": torsorcech.winding_degree(h.value(s)),
                "recovered": torsorcech.winding_degree(back.value(s)),
            }
    return {
        "seed": int(cfg.get("seed", 0)),
        "forward": g.to_json(),
        "recovered": back.to_json(),
        "round_trip_residual": back.distance(h),
        "forward_cocycle_residual": torsorcech.cech_coboundary(g).max_defect(),
        "windings": windings,
    }


def cmd_suspend(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    report = suspend_report(cfg)
    _emit(report, args.out)
    ok = report["round_trip_residual"] <= 1e-10 and report["forward_cocycle_residual"] <= 1e-10
    ok = ok and all(w["input"] == w["recovered"] for w in report["windings"].values())
    return EXIT_OK if ok else EXIT_FAIL


# -- hopf ------------------------------------------------------------------------------------

def cmd_hopf(args) -> int:
    d = _load_json(args.config) if args.config else {}
    if args.cutoff is not None:
        d["cutoff"] = args.cutoff
        d.pop("convergence_cutoffs", None)
    if args.samples is not None:
        d["equator_samples"] = args.samples
        d.pop("convergence_samples", None)
    if args.strict:
        d["strict"] = True
    if args.seed is not None:
        d["seed"] = args.seed
    try:
        cfg = hopf.ExperimentConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = args.out or cfg.out or "hopf_out"
    cutoffs = cfg.convergence_cutoffs or (cfg.cutoff,)
    samples = cfg.convergence_samples or (cfg.equator_samples,)
    result, table = hopf.convergence_table(cfg, cutoffs, samples)
    paths = hopf.emit_report(result, out)
    stable = hopf.degree_stable(table)
    _emit({"degree": result.degree, "c1": result.c1, "stable": stable, "convergence": table,
           "degenerate_points": len(result.degenerate_points), "files": paths})
    return EXIT_OK if stable else EXIT_FAIL


# -- entry point -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockgerbe", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run invariant suites")
    c.add_argument("--suite", choices=SUITES, default="all")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    i = sub.add_parser("implementer", help="intertwiner and implementer of an SO(n) loop")
    i.add_argument("loop_file")
    i.add_argument("--cutoff", type=int, default=1)
    i.add_argument("--degree", type=int, default=None)
    i.add_argument("--out", default=None)
    i.set_defaults(func=cmd_implementer)

    d = sub.add_parser("dd", help="Dixmier-Douady cocycle from local sections")
    d.add_argument("--config", default=None)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_dd)

    s = sub.add_parser("suspend", help="suspension chase of a 1-cocycle")
    s.add_argument("--config", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_suspend)

    h = sub.add_parser("hopf", help="Chern degree of the quaternionic experiment")
    h.add_argument("--config", default=None)
    h.add_argument("--samples", type=int, default=None)
    h.add_argument("--cutoff", type=int, default=None)
    h.add_argument("--seed", type=int, default=None)
    h.add_argument("--out", default=None)
    h.add_argument("--strict", action="store_true")
    h.set_defaults(func=cmd_hopf)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (NonConvergedError, RefineError, DegeneratePointError, DegenerateSolutionError,
            SingularCError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except FockGerbeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
