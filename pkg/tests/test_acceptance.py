"""Acceptance gate: eight criteria, each at its stated tolerance and time budget.

Every criterion prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.  Run directly with ``python tests/test_acceptance.py`` to
print the lines without pytest.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from fockgerbe import fock, hopf, modes, quatgeom, torsorcech

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def _report(num: int, name: str, ok: bool, detail: str, elapsed: float, budget: float) -> bool:
    ok = ok and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name} ({detail}; {elapsed:.1f}s of {budget:.0f}s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def _basis(n, Q, D=None):
    return fock.FockBasis(modes.standard_lagrangian(modes.ModeBasis(n, Q)), D)


def _frame(mb, cols):
    q, _ = np.linalg.qr(cols)
    return modes.LagrangianFrame(mb, q)


# -- 1 --------------------------------------------------------------------------------

def criterion_clifford(pairs: int = 1000) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (2, 4):
        for Q in (0, 1):
            mb = modes.ModeBasis(n, Q)
            L = modes.standard_lagrangian(mb)
            # D = 4 unless the exterior algebra is smaller than that
            b = fock.FockBasis(L, min(4, L.dim))
            rows = b.below_cap()
            v = mb.random_real(rng, pairs)
            w = mb.random_real(rng, pairs)
            pv = fock.clifford_matrices(v, b)
            pw = fock.clifford_matrices(w, b)
            anti = (pv @ pw + pw @ pv)[:, :, rows]
            ip = np.sum(v * np.conj(w), axis=0)
            target = 2 * ip[:, None, None] * np.eye(b.dim)[None, :, rows]
            worst = max(worst, float(np.max(np.abs(anti - target))))
    return _report(1, "Clifford anticommutator", worst <= 1e-9, f"max err {worst:.2e}, {4 * pairs} pairs",
                   time.perf_counter() - t0, 30)


# -- 2 --------------------------------------------------------------------------------

def criterion_fock_isometries(samples: int = 100) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_gram = worst_tau = worst_bound = 0.0
    for k in range(samples):
        b = _basis(4, 1) if k % 2 else _basis(2, 2)
        # Grammian: wedges of frame vectors built by creators are orthonormal
        c = b.creator_matrices
        cols = np.zeros((b.dim, b.dim), dtype=complex)
        for i, S in enumerate(b.subsets):
            v = b.vacuum().amps
            for s in reversed(S):
                v = c[s] @ v
            cols[:, i] = v
        worst_gram = max(worst_gram, float(np.max(np.abs(cols.conj().T @ cols - np.eye(b.dim)))))
        z1 = fock.random_lambda2(b, rng, rng.uniform(0.05, 1.0))
        z2 = fock.random_lambda2(b, rng, rng.uniform(0.05, 1.0))
        Z1, Z2 = fock.tau(z1), fock.tau(z2)
        fbar = b.frame.conj_columns
        hs = np.trace((Z2 @ fbar).conj().T @ (Z1 @ fbar))
        worst_tau = max(worst_tau, abs(z1.inner(z2) - hs),
                        float(np.max(np.abs(fock.tau_inverse(Z1, b).amps - z1.amps))))
        e, _ = fock.quad_exp(z1)
        worst_bound = max(worst_bound, e.norm() - np.exp(z1.norm() ** 2))
        # Grammian of random wedges against the determinant
        u = rng.normal(size=(b.m, 2)) + 1j * rng.normal(size=(b.m, 2))
        w = rng.normal(size=(b.m, 2)) + 1j * rng.normal(size=(b.m, 2))
        wu = np.tensordot(u[:, 0], c, axes=(0, 0)) @ np.tensordot(u[:, 1], c, axes=(0, 0)) @ b.vacuum().amps
        ww = np.tensordot(w[:, 0], c, axes=(0, 0)) @ np.tensordot(w[:, 1], c, axes=(0, 0)) @ b.vacuum().amps
        det = np.linalg.det(w.conj().T @ u)
        worst_gram = max(worst_gram, abs(np.vdot(ww, wu) - det) / max(1.0, abs(det)))
    ok = worst_gram <= 1e-9 and worst_tau <= 1e-9 and worst_bound <= 1e-9
    detail = f"gram {worst_gram:.1e}, tau {worst_tau:.1e}, exp bound excess {worst_bound:.1e}"
    return _report(2, "Fock isometries", ok, detail, time.perf_counter() - t0, 30)


# -- 3 --------------------------------------------------------------------------------

def criterion_implementers(count: int = 50) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_u = worst_t = 0.0
    nullities = set()
    for k in range(count):
        b = _basis(4, 1) if k % 2 else _basis(2, 1)
        mb = b.mode_basis
        g = modes.random_orthogonal(mb, rng, rng.uniform(0.02, 0.3), band=1)
        U = fock.implementer(g, b)
        B = fock.brute_force_implementer(g, b)
        worst_u = max(worst_u, float(np.max(np.abs(U.matrix - B.matrix))))
        K = fock.FockBasis(_frame(mb, g.matrix @ b.frame.columns))
        ns, _ = fock.sigma_vacuum(K, b.frame)
        nullities.add(ns.shape[1])
        t = fock.canonical_intertwiner(b, K)
        worst_t = max(worst_t, fock.intertwining_residual(t.matrix, b, K), U.meta["residual"])
    ok = worst_u <= 1e-8 and worst_t <= 1e-8 and nullities == {1}
    detail = f"oracle diff {worst_u:.1e}, residual {worst_t:.1e}, nullities {sorted(nullities)}"
    return _report(3, "implementer correctness", ok, detail, time.perf_counter() - t0, 300)


# -- 4 --------------------------------------------------------------------------------

def criterion_algebraic_laws(count: int = 30) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = {"lambda": 0.0, "phase": 0.0, "ca": 0.0, "retract": 0.0}
    for k in range(count):
        b = _basis(4, 1) if k % 2 else _basis(2, 1)
        mb = b.mode_basis
        g1 = modes.random_orthogonal(mb, rng, 0.25).matrix
        g2 = modes.random_orthogonal(mb, rng, 0.25).matrix
        k2 = fock.FockBasis(_frame(mb, g2 @ b.frame.columns))
        k12 = fock.FockBasis(_frame(mb, g1 @ g2 @ b.frame.columns))
        lhs = fock.lambda_g(g1, k2, k12).matrix @ fock.lambda_g(g2, b, k2).matrix
        worst["lambda"] = max(worst["lambda"], float(np.max(np.abs(lhs - fock.lambda_g(g1 @ g2, b, k12).matrix))))
        u1, u2 = fock.implementer(g1, b).matrix, fock.implementer(g2, b).matrix
        ratio = u1 @ u2 @ fock.implementer(g1 @ g2, b).matrix.conj().T
        z = ratio[0, 0]
        worst["phase"] = max(worst["phase"], abs(abs(z) - 1), float(np.max(np.abs(ratio - z * np.eye(b.dim)))))
        J = b.frame.J
        c, a = (np.asarray(x) for x in modes.decompose_ca(g1, J))
        eye = np.eye(mb.dim)
        ca = max(
            np.max(np.abs(c + a - g1)), np.max(np.abs(c @ J - J @ c)), np.max(np.abs(a @ J + J @ a)),
            np.max(np.abs(c.conj().T @ c + a.conj().T @ a - eye)),
            np.max(np.abs(c.conj().T @ a + a.conj().T @ c)),
        )
        worst["ca"] = max(worst["ca"], float(ca))
        zm = np.asarray(modes.zg(g1, J))
        w = np.asarray(modes.retract(zm, J, mb))
        worst["retract"] = max(worst["retract"], float(np.max(np.abs(np.asarray(modes.zg(w, J)) - zm))),
                               float(np.max(np.abs(w.conj().T @ w - eye))))
    ok = all(v <= 1e-9 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return _report(4, "algebraic laws", ok, detail, time.perf_counter() - t0, 120)


# -- 5 --------------------------------------------------------------------------------

def criterion_cech(count: int = 20) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = {"dd": 0.0, "trivial": 0.0, "rescale": 0.0, "suspension": 0.0}
    four = torsorcech.circle_cover(4, 128)
    wide = torsorcech.circle_cover(3, 96, 0.6)
    for _ in range(count):
        for cover in (four, wide):
            for p in (0, 1):
                c = torsorcech.random_cochain(cover, p, rng)
                dd = torsorcech.cech_coboundary(torsorcech.cech_coboundary(c))
                worst["dd"] = max(worst["dd"], dd.max_defect())
        eta = {i: torsorcech.PhaseElement(np.exp(1j * torsorcech.random_cochain(wide, 0, rng).angle((i,))),
                                          ("R", i)) for i in wide.labels}
        sections = torsorcech.trivial_gerbe_sections(wide, eta)
        g0 = torsorcech.dd_cocycle(wide, sections, torsorcech.contraction_mult, torsorcech.trivial_gerbe_unit)
        worst["trivial"] = max(worst["trivial"], g0.max_defect())
        h = torsorcech.random_cochain(wide, 1, rng)
        g1 = torsorcech.dd_cocycle(wide, torsorcech.rescale_sections(wide, sections, h),
                                   torsorcech.contraction_mult, torsorcech.trivial_gerbe_unit)
        worst["rescale"] = max(worst["rescale"], g1.distance(g0 * torsorcech.cech_coboundary(h)))
        h4 = torsorcech.random_cochain(four, 1, rng)
        back = torsorcech.suspension_partial_inverse(torsorcech.suspension_forward(h4))
        worst["suspension"] = max(worst["suspension"], back.distance(h4))
    ok = all(v <= 1e-12 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return _report(5, "Cech and Dixmier-Douady", ok, detail, time.perf_counter() - t0, 60)


# -- 6 --------------------------------------------------------------------------------

def criterion_stability(count: int = 20) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    mb = modes.ModeBasis(4, 1)
    L = modes.standard_lagrangian(mb)
    worst_iso = 0.0
    behaviours = set()
    leak = 0.0
    for _ in range(count):
        perm = rng.permutation(L.dim)
        f1 = modes.LagrangianFrame(mb, L.columns[:, np.sort(perm[:3])], check=False)
        f2 = modes.LagrangianFrame(mb, L.columns[:, np.sort(perm[3:])], check=False)
        b1, b2 = fock.FockBasis(f1), fock.FockBasis(f2)
        iso = fock.fock_sum_iso(b1, b2)
        worst_iso = max(worst_iso, iso.unitary_defect)
        v = mb.random_real(rng)
        lhs = iso.matrix @ fock.graded_tensor_action(v, b1, b2)
        rhs = fock.clifford_matrix(v, iso.codomain) @ iso.matrix
        worst_iso = max(worst_iso, float(np.max(np.abs(lhs - rhs))))
    finite = modes.ModeBasis(4, 0)
    Lf = modes.standard_lagrangian(finite)
    bl = fock.FockBasis(Lf)
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    for k in range(count):
        g = modes.random_orthogonal(finite, rng, 0.4).matrix
        if k % 2:
            g = flip @ g
        t = fock.canonical_intertwiner(bl, fock.FockBasis(_frame(finite, g @ Lf.columns)))
        behaviour = fock.parity_behaviour(t)
        behaviours.add((k % 2, behaviour))
        # size of the entries the dichotomy says vanish
        d, c = t.domain.parity_diag, t.codomain.parity_diag
        wrong = np.equal.outer(c, d) if behaviour == "reverses" else ~np.equal.outer(c, d)
        leak = max(leak, float(np.max(np.abs(t.matrix[wrong]), initial=0.0)))
    ok = worst_iso <= 1e-9 and behaviours == {(0, "preserves"), (1, "reverses")}
    detail = f"iso err {worst_iso:.1e}, parity {sorted(set(b for _, b in behaviours))}, mixing {leak:.1e}"
    return _report(6, "Fock sum stability and parity", ok, detail, time.perf_counter() - t0, 60)


# -- 7 --------------------------------------------------------------------------------

def criterion_geometry(count: int = 200) -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = {"beta": 0.0, "eta": 0.0, "charts": 0.0, "r(-1)": 0.0}
    for _ in range(count):
        x = rng.normal(size=4)
        x /= np.linalg.norm(x)
        ends = quatgeom.beta_values(x, np.array([0.0, np.pi, 2 * np.pi]))
        worst["beta"] = max(worst["beta"], float(np.max(np.abs(ends[0] - [1, 0, 0, 0, 0]))),
                            float(np.max(np.abs(ends[1] - np.append(x, 0.0)))),
                            float(np.max(np.abs(ends[2] - ends[0]))))
        y = rng.normal(size=3)
        y = np.array([y[0], 0.0, y[1], y[2]]) / np.linalg.norm(y)
        worst["eta"] = max(worst["eta"], quatgeom.eta_relation_residual(y, 64))
        w = quatgeom.Quaternion(*rng.normal(size=4))
        back = quatgeom.stereo_north(quatgeom.stereo_south_inv(w)).as_array()
        inv = w.inverse().as_array()
        worst["charts"] = max(worst["charts"], float(np.max(np.abs(back - inv))) / max(1.0, np.linalg.norm(inv)))
    s = quatgeom.loop_params(256)
    r = quatgeom.transition_values([-1.0, 0.0, 0.0, 0.0], s)
    worst["r(-1)"] = float(np.max(np.abs(r - np.stack([np.cos(s), -np.sin(s), 0 * s, 0 * s], axis=-1))))
    ok = all(v <= 1e-10 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return _report(7, "quaternionic geometry", ok, detail, time.perf_counter() - t0, 10)


# -- 8 --------------------------------------------------------------------------------

def criterion_hopf(out_dir: Path | None = None) -> bool:
    t0 = time.perf_counter()
    null = hopf.chern_of_q(hopf.ExperimentConfig(caps="same", equator_samples=64))
    twistor = hopf.chern_of_q(hopf.ExperimentConfig(family="twistor", equator_samples=64))
    main_cfg = hopf.ExperimentConfig(family="hopf", cutoff=4, equator_samples=256, meridian_steps=8)
    best, table = hopf.convergence_table(main_cfg, (4, 8), (256, 512))
    out_dir = Path(out_dir or tempfile.mkdtemp(prefix="hopf_acceptance_"))
    paths = hopf.emit_report(best, out_dir)
    summary = Path(paths["summary"]).read_text()
    degrees = sorted({row["degree"] for row in table})
    resid = max(max(r["max_intertwiner_residual"], r["max_vacuum_residual"]) for r in table)
    resid = max(resid, null.max_intertwiner_residual, twistor.max_intertwiner_residual)
    report_ok = bool(best.degenerate_points) and '"degenerate_points"' in summary
    ok = (null.degree == 0 and abs(twistor.degree) == 1 and len(degrees) == 1
          and resid <= 1e-8 and report_ok)
    detail = (f"null {null.degree}, twistor {twistor.degree}, main degrees {degrees} "
              f"(c1 = {best.c1}), max residual {resid:.1e}, degenerate points {len(best.degenerate_points)}")
    return _report(8, "Hopf experiment gate", ok, detail, time.perf_counter() - t0, 1800)


# -- pytest entry points ---------------------------------------------------------------

def test_criterion_1_clifford():
    assert criterion_clifford()


def test_criterion_2_fock_isometries():
    assert criterion_fock_isometries()


def test_criterion_3_implementers():
    assert criterion_implementers()


def test_criterion_4_algebraic_laws():
    assert criterion_algebraic_laws()


def test_criterion_5_cech():
    assert criterion_cech()


def test_criterion_6_stability():
    assert criterion_stability()


def test_criterion_7_geometry():
    assert criterion_geometry()


@pytest.mark.slow
def test_criterion_8_hopf(tmp_path):
    assert criterion_hopf(tmp_path)


if __name__ == "__main__":
    results = [criterion_clifford(), criterion_fock_isometries(), criterion_implementers(),
               criterion_algebraic_laws(), criterion_cech(), criterion_stability(),
               criterion_geometry(), criterion_hopf()]
    raise SystemExit(0 if all(results) else 1)
