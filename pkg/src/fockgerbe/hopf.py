"""Chern number of the vacuum-line bundle over S^2 built from the quaternionic transition loops.

For x on the great 2-sphere through 1, e1, e2 (inside S^2 = {pi_i = 0} of S^3),
the loop r(x) acts on H = L^2(S^1, C^4) by left quaternion multiplication,
giving K(x) = g(x) L.  The fibre of Q at x is the U(1)-torsor of intertwiners
F(L) -> F(K(x)), i.e. the unit vectors of the Sigma L-vacuum line in F(K(x)).
Both caps are trivialized by carrying that vacuum along meridians with
canonical intertwiners between neighbouring Lagrangians; the winding of the
ratio of the two trivializations on the equator is the degree reported.

Finite band makes a small exact model possible: with band b, the part of K
above frequency b coincides with L, so the Fock computation only needs the
modes |q| <= b.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegeneratePointError,
    DegenerateSolutionError,
    NonConvergedError,
    RefineError,
)
from .fock import (
    FockBasis,
    canonical_intertwiner,
    clifford_matrices,
    intertwining_residual,
    null_space,
)
from .modes import (
    FourierLoop,
    LagrangianFrame,
    ModeBasis,
    aligned_frame,
    commutator_block_norm,
    multiplication_operator,
    standard_lagrangian,
    window_lagrangian,
)
from .quatgeom import loop_params, qmul, so4_of_quat_array, transition_values
from .torsorcech import unwrapped_phase, winding_degree

C1_CONVENTION = (
    "degree = winding of h(phi) with xi_S = h xi_N on the equator, phi increasing from e1 "
    "toward e2, north cap at x = p; h^{-1} represents c1, so c1 = -degree"
)

FAMILIES = ("hopf", "constant", "twistor")


@dataclass
class ExperimentConfig:
    family: str = "hopf"
    n: int = 4
    cutoff: int = 4
    loop_samples: int = 8
    equator_samples: int = 256
    meridian_steps: int = 8
    degree_cap: int | None = None
    cond_bound: float = 1e8
    tol: float = 1e-8
    degenerate_tol: float = 1e-8
    epsilon: float = 0.0
    retry_epsilons: tuple = (0.01, -0.01, 0.02)
    caps: str = "independent"
    pole: tuple = (1.0, 0.0, 0.0, 0.0)
    e1: tuple = (0.0, 0.0, 1.0, 0.0)
    e2: tuple = (0.0, 0.0, 0.0, 1.0)
    strict: bool = False
    seed: int = 0
    threads: int | None = None
    convergence_cutoffs: tuple = ()
    convergence_samples: tuple = ()
    out: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.n != 4:
            raise ValueError("the quaternionic experiment needs fiber dimension 4")
        for name in ("loop_samples", "equator_samples"):
            v = getattr(self, name)
            if v < 8 or v & (v - 1):
                raise ValueError(f"{name} must be a power of two >= 8")
        if self.meridian_steps < 1:
            raise ValueError("meridian_steps must be positive")
        if self.caps not in ("independent", "same"):
            raise ValueError("caps must be 'independent' or 'same'")
        frame = np.array([self.pole, self.e1, self.e2], dtype=float)
        if np.max(np.abs(frame @ frame.T - np.eye(3))) > 1e-10:
            raise ValueError("pole, e1, e2 must be orthonormal quaternions")
        if np.max(np.abs(frame[:, 1])) > 1e-12:
            raise ValueError("pole, e1, e2 must have zero i-component")
        self.retry_epsilons = tuple(self.retry_epsilons)
        self.convergence_cutoffs = tuple(self.convergence_cutoffs)
        self.convergence_samples = tuple(self.convergence_samples)
        self.pole, self.e1, self.e2 = (tuple(map(float, v)) for v in (self.pole, self.e1, self.e2))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def sphere_point(self, theta: float, phi: float) -> np.ndarray:
        p, a, b = (np.asarray(v) for v in (self.pole, self.e1, self.e2))
        return np.cos(theta) * p + np.sin(theta) * (np.cos(phi) * a + np.sin(phi) * b)


# -- per-point Lagrangians -------------------------------------------------------------

ACTIVE_BASIS = {"hopf": ModeBasis(4, 1), "constant": ModeBasis(4, 1), "twistor": ModeBasis(4, 0)}


def transition_symbol(x, samples: int) -> FourierLoop:
    """sigma(s) = left multiplication by r(x)(s), as a Fourier loop of 4x4 matrices."""
    s = loop_params(samples)
    r = transition_values(x, s)
    return FourierLoop.from_samples(so4_of_quat_array(r), tol=1e-13)


def left_mult_matrix(w) -> np.ndarray:
    return so4_of_quat_array(np.asarray(w, dtype=float))


def twistor_quaternion(x) -> np.ndarray:
    """The unit imaginary quaternion obtained by sending the real axis of x to i."""
    x = np.asarray(x, dtype=float)
    return np.array([0.0, x[0], x[2], x[3]])


def twistor_rotation(w) -> np.ndarray:
    """u = (1 - w i)/|1 - w i|, with u i u^{-1} = w; at w = -i the choice u = j."""
    i = np.array([0.0, 1.0, 0.0, 0.0])
    v = np.array([1.0, 0.0, 0.0, 0.0]) - qmul(np.asarray(w, dtype=float), i)
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        return np.array([0.0, 0.0, 1.0, 0.0])
    return v / nv


@dataclass
class PointFrame:
    """Lagrangian K(x) on the active modes plus diagnostics."""

    x: np.ndarray
    frame: LagrangianFrame
    sigma_min: float
    hs_norm: float
    compression_residual: float


class Family:
    """Computes K(x) on the active modes for one experiment configuration."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.active = ACTIVE_BASIS[cfg.family]
        self.L = standard_lagrangian(self.active)
        if cfg.family != "twistor":
            self.window = ModeBasis(cfg.n, cfg.cutoff)
            # L above the active band: shared by every K(x)
            self.fixed = standard_lagrangian(self.window).columns[:, self.L.dim:]
            self.active_rows = self.window.window_indices(self.active)

    def symbol(self, x) -> FourierLoop:
        if self.cfg.family == "constant":
            return FourierLoop.constant(np.eye(4))
        if self.cfg.family == "twistor":
            return FourierLoop.constant(left_mult_matrix(twistor_rotation(twistor_quaternion(x))))
        return transition_symbol(x, self.cfg.loop_samples)

    def point(self, x) -> PointFrame:
        x = np.asarray(x, dtype=float)
        if self.cfg.family == "twistor":
            sigma = self.symbol(x)
            cols = sigma.coeffs[0] @ self.L.columns
            hs = commutator_block_norm(self.active, sigma)
            resid = 0.0
        else:
            sigma = self.symbol(x)
            kw = window_lagrangian(self.window, sigma)
            c = kw.columns
            c = c - self.fixed @ (self.fixed.conj().T @ c)
            u, s, _ = np.linalg.svd(c, full_matrices=False)
            m = self.L.dim
            cols_w = u[:, :m]
            outside = np.delete(np.arange(self.window.dim), self.active_rows)
            resid = float(max(np.linalg.norm(cols_w[outside]), s[m] if len(s) > m else 0.0))
            cols = cols_w[self.active_rows]
            hs = commutator_block_norm(self.window, sigma)
        cols = aligned_frame(self.active, cols, self.L.columns)
        frame = LagrangianFrame(self.active, cols)
        smin = float(np.linalg.svd(self.L.columns.conj().T @ cols, compute_uv=False)[-1])
        return PointFrame(x, frame, smin, hs, resid)


# -- vacuum transport ------------------------------------------------------------------

@dataclass
class StepRecord:
    fidelity: float
    vacuum_residual: float
    intertwiner_residual: float
    nullity: int


class VacuumSpace:
    """Sigma L-vacuum line in F(K) for one point."""

    def __init__(self, pf: PointFrame, L: LagrangianFrame):
        self.pf = pf
        self.basis = FockBasis(pf.frame)
        self.stack = clifford_matrices(L.conj_columns, self.basis).reshape(-1, self.basis.dim)
        ns, s = null_space(self.stack, 1e-8)
        self.nullity = ns.shape[1]
        self.vector = ns[:, 0] if self.nullity >= 1 else None

    def residual(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(self.stack @ v))


def initial_vacuum(space: VacuumSpace, thresh: float = 1e-6) -> tuple[np.ndarray, str]:
    """Vacuum with <xi, Omega_K> > 0, or the first significant amplitude made positive."""
    v = space.vector
    if abs(v[0]) > thresh:
        return v * (abs(v[0]) / v[0]), "canonical"
    k = int(np.argmax(np.abs(v) > thresh * np.max(np.abs(v))))
    return v * (abs(v[k]) / v[k]), "fallback"


def transport(spaces: list[VacuumSpace]) -> tuple[np.ndarray, list[StepRecord], str]:
    """Carry the vacuum from spaces[0] to spaces[-1] with canonical intertwiners."""
    if spaces[0].nullity != 1:
        raise DegenerateSolutionError(spaces[0].nullity)
    xi, mode = initial_vacuum(spaces[0])
    records = [StepRecord(1.0, spaces[0].residual(xi), 0.0, spaces[0].nullity)]
    for a, b in zip(spaces[:-1], spaces[1:]):
        if b.nullity != 1:
            raise DegenerateSolutionError(b.nullity)
        t = canonical_intertwiner(a.basis, b.basis)
        moved = t.matrix @ xi
        ov = np.vdot(b.vector, moved)
        xi = b.vector * (ov / abs(ov))
        records.append(StepRecord(float(abs(ov)), b.residual(xi),
                                  intertwining_residual(t.matrix, a.basis, b.basis), b.nullity))
    return xi, records, mode


# -- the experiment ---------------------------------------------------------------------

@dataclass
class EquatorPoint:
    index: int
    phi: float
    x: np.ndarray
    sigma_min: float
    hs_norm: float
    overlap: complex
    max_intertwiner_residual: float
    max_vacuum_residual: float
    min_fidelity: float
    nullity: int
    degenerate: bool


@dataclass
class ChernResult:
    degree: int | None
    c1: int | None
    points: list
    phase: np.ndarray
    degenerate_points: list
    epsilon: float
    config: ExperimentConfig
    pole_phase: dict
    max_intertwiner_residual: float
    max_vacuum_residual: float
    min_fidelity: float
    max_compression_residual: float
    convergence: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "degree": self.degree,
            "c1": self.c1,
            "c1_convention": C1_CONVENTION,
            "family": self.config.family,
            "cutoff": self.config.cutoff,
            "equator_samples": self.config.equator_samples,
            "epsilon": self.epsilon,
            "seed": self.config.seed,
            "degenerate_points": self.degenerate_points,
            "pole_phase": self.pole_phase,
            "max_intertwiner_residual": self.max_intertwiner_residual,
            "max_vacuum_residual": self.max_vacuum_residual,
            "min_fidelity": self.min_fidelity,
            "max_compression_residual": self.max_compression_residual,
            "convergence": self.convergence,
            "config": self.config.to_dict(),
        }


def _threads(cfg: ExperimentConfig) -> int:
    if cfg.threads:
        return max(1, int(cfg.threads))
    env = os.environ.get("FOCKGERBE_THREADS")
    return max(1, int(env)) if env else 1


def _meridian_thetas(cfg: ExperimentConfig, theta_eq: float, north: bool) -> np.ndarray:
    k = np.arange(cfg.meridian_steps + 1) / cfg.meridian_steps
    return theta_eq * k if north else np.pi - (np.pi - theta_eq) * k


def _meridian(fam: Family, cfg: ExperimentConfig, phi: float, theta_eq: float,
              pole_space: VacuumSpace, eq_space: VacuumSpace, north: bool):
    thetas = _meridian_thetas(cfg, theta_eq, north)
    spaces = [pole_space]
    for th in thetas[1:-1]:
        spaces.append(VacuumSpace(fam.point(cfg.sphere_point(th, phi)), fam.L))
    spaces.append(eq_space)
    xi, records, mode = transport(spaces)
    degenerate = [
        (float(thetas[i]), s.pf) for i, s in enumerate(spaces) if s.pf.sigma_min < cfg.degenerate_tol
    ]
    return xi, records, mode, degenerate


def _equator_point(fam: Family, cfg: ExperimentConfig, idx: int, theta_eq: float,
                   poles: tuple[VacuumSpace, VacuumSpace]):
    phi = 2 * np.pi * idx / cfg.equator_samples
    x = cfg.sphere_point(theta_eq, phi)
    eq = VacuumSpace(fam.point(x), fam.L)
    if eq.nullity != 1:
        raise DegenerateSolutionError(eq.nullity, f"equator point {idx} has nullity {eq.nullity}")
    xi_n, rec_n, mode_n, deg_n = _meridian(fam, cfg, phi, theta_eq, poles[0], eq, True)
    if cfg.caps == "same":
        xi_s, rec_s, mode_s, deg_s = xi_n, rec_n, mode_n, deg_n
    else:
        xi_s, rec_s, mode_s, deg_s = _meridian(fam, cfg, phi, theta_eq, poles[1], eq, False)
    records = rec_n + rec_s
    overlap = complex(np.vdot(xi_n, xi_s))  # xi_S = overlap * xi_N
    ep = EquatorPoint(
        index=idx, phi=phi, x=x, sigma_min=eq.pf.sigma_min, hs_norm=eq.pf.hs_norm,
        overlap=overlap,
        max_intertwiner_residual=max(r.intertwiner_residual for r in records),
        max_vacuum_residual=max(r.vacuum_residual for r in records),
        min_fidelity=min(r.fidelity for r in records),
        nullity=max(r.nullity for r in records),
        degenerate=eq.pf.sigma_min < cfg.degenerate_tol,
    )
    degenerate = [(th, phi, pf) for th, pf in deg_n + deg_s]
    comp = max(eq.pf.compression_residual, 0.0)
    return ep, degenerate, {"north": mode_n, "south": mode_s}, comp


def _run_once(cfg: ExperimentConfig, epsilon: float) -> ChernResult:
    fam = Family(cfg)
    theta_eq = np.pi / 2 + epsilon
    north = VacuumSpace(fam.point(cfg.sphere_point(0.0, 0.0)), fam.L)
    south = VacuumSpace(fam.point(cfg.sphere_point(np.pi, 0.0)), fam.L)
    work = lambda i: _equator_point(fam, cfg, i, theta_eq, (north, south))
    idx = range(cfg.equator_samples)
    nthreads = _threads(cfg)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            results = list(ex.map(work, idx))
    else:
        results = [work(i) for i in idx]
    results.sort(key=lambda r: r[0].index)
    points = [r[0] for r in results]
    h = np.array([p.overlap for p in points])
    phase = unwrapped_phase(h)
    seen = {}
    for _, degs, _, _ in results:
        for th, phi, pf in degs:
            key = tuple(np.round(pf.x, 12))
            # the poles are shared by every meridian; report them once
            seen.setdefault(key, {"theta": th, "phi": 0.0 if th in (0.0, np.pi) else phi,
                                  "x": [float(v) for v in pf.x], "sigma_min": pf.sigma_min})
    degenerate = [seen[k] for k in sorted(seen)]
    modes = results[0][2] if results else {"north": "canonical", "south": "canonical"}
    res = ChernResult(
        degree=None, c1=None, points=points, phase=phase, degenerate_points=degenerate,
        epsilon=epsilon, config=cfg, pole_phase=modes,
        max_intertwiner_residual=max(p.max_intertwiner_residual for p in points),
        max_vacuum_residual=max(p.max_vacuum_residual for p in points),
        min_fidelity=min(p.min_fidelity for p in points),
        max_compression_residual=max(r[3] for r in results),
    )
    if cfg.strict:
        if res.max_intertwiner_residual > cfg.tol or res.max_vacuum_residual > cfg.tol:
            raise NonConvergedError(
                f"residuals {res.max_intertwiner_residual:.2e}, {res.max_vacuum_residual:.2e} exceed {cfg.tol:.1e}"
            )
        if any(p.degenerate for p in points):
            raise DegeneratePointError([p.x.tolist() for p in points if p.degenerate])
    res.degree = winding_degree(h)
    res.c1 = -res.degree
    return res


def chern_of_q(cfg: ExperimentConfig) -> ChernResult:
    """Degree of the transition function of Q on the equator, retrying perturbed equators."""
    attempts = (cfg.epsilon,) + tuple(e for e in cfg.retry_epsilons if e != cfg.epsilon)
    last: Exception | None = None
    for eps in attempts:
        try:
            return _run_once(cfg, eps)
        except (DegenerateSolutionError, DegeneratePointError) as exc:
            last = exc
    if isinstance(last, DegenerateSolutionError):
        raise DegeneratePointError([], f"equator degenerate for every epsilon tried: {last}")
    raise last


def convergence_table(cfg: ExperimentConfig, cutoffs, samples) -> tuple[ChernResult, list]:
    """Run every (cutoff, samples) pair; returns the finest run and the table."""
    table = []
    best = None
    for q in cutoffs:
        for n in samples:
            sub = ExperimentConfig.from_dict({**cfg.to_dict(), "cutoff": q, "equator_samples": n})
            r = chern_of_q(sub)
            table.append({"cutoff": q, "equator_samples": n, "degree": r.degree, "epsilon": r.epsilon,
                          "max_intertwiner_residual": r.max_intertwiner_residual,
                          "max_vacuum_residual": r.max_vacuum_residual})
            best = r
    best.convergence = table
    return best, table


def degree_stable(table: list) -> bool:
    return len({row["degree"] for row in table}) == 1


# -- fibre data at a single point ----------------------------------------------------------

@dataclass
class FiberGerbeData:
    x: np.ndarray
    symbol: FourierLoop
    window: ModeBasis
    g_window: np.ndarray
    L: LagrangianFrame
    K: LagrangianFrame
    intertwiner: np.ndarray
    phase_mode: str
    overlap: complex
    residual: float
    nullity: int
    hs_norm: float
    sigma_min: float


def fiber_transition(x, cfg: ExperimentConfig | None = None) -> FiberGerbeData:
    """Operator g(x), Lagrangians L, K(x) and the canonical intertwiner F(L) -> F(K(x))."""
    cfg = cfg or ExperimentConfig()
    fam = Family(cfg)
    pf = fam.point(x)
    sym = fam.symbol(x)
    window = fam.window if cfg.family != "twistor" else fam.active
    g = multiplication_operator(window, sym).matrix
    bl = FockBasis(fam.L)
    bk = FockBasis(pf.frame)
    t = canonical_intertwiner(bl, bk)
    return FiberGerbeData(
        x=np.asarray(x, dtype=float), symbol=sym, window=window, g_window=g, L=fam.L, K=pf.frame,
        intertwiner=t.matrix, phase_mode=t.meta["phase"], overlap=complex(t.matrix[0, 0]),
        residual=intertwining_residual(t.matrix, bl, bk), nullity=t.meta["nullity"],
        hs_norm=pf.hs_norm, sigma_min=pf.sigma_min,
    )


# -- reports -------------------------------------------------------------------------------

CSV_HEADER = [
    "index", "phi", "x0", "x1", "x2", "x3", "sigma_min", "hs_norm", "vacuum_overlap",
    "phase_unwrapped", "max_intertwiner_residual", "max_vacuum_residual", "min_fidelity",
    "nullity", "degenerate",
]


def _fmt(v: float) -> str:
    return f"{float(v):.12e}"


def points_csv(result: ChernResult | None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    if result is not None:
        for p, ph in zip(result.points, result.phase):
            w.writerow([p.index, _fmt(p.phi), *(_fmt(v) for v in p.x), _fmt(p.sigma_min),
                        _fmt(p.hs_norm), _fmt(abs(p.overlap)), _fmt(ph),
                        _fmt(p.max_intertwiner_residual), _fmt(p.max_vacuum_residual),
                        _fmt(p.min_fidelity), p.nullity, int(p.degenerate)])
    return buf.getvalue()


def phase_table(result: ChernResult) -> str:
    lines = ["# phi phase_unwrapped"]
    lines += [f"{_fmt(p.phi)} {_fmt(ph)}" for p, ph in zip(result.points, result.phase)]
    return "\n".join(lines) + "\n"


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        return float(f"{float(o):.12e}")
    if isinstance(o, np.integer):
        return int(o)
    return o


def summary_json(result: ChernResult) -> str:
    return json.dumps(_jsonable(result.summary()), indent=2, sort_keys=True) + "\n"


def emit_report(result: ChernResult | None, out_dir, stem: str = "hopf") -> dict:
    """Write the per-point CSV, JSON summary and phase-vs-angle table."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{stem}_points.csv", "summary": out / f"{stem}_summary.json",
             "phase": out / f"{stem}_phase.txt"}
    paths["csv"].write_text(points_csv(result))
    if result is not None:
        paths["summary"].write_text(summary_json(result))
        paths["phase"].write_text(phase_table(result))
    return {k: str(v) for k, v in paths.items()}


__all__ = [
    "ExperimentConfig", "Family", "PointFrame", "VacuumSpace", "ChernResult", "EquatorPoint",
    "FiberGerbeData", "chern_of_q", "convergence_table", "degree_stable", "fiber_transition",
    "emit_report", "points_csv", "summary_json", "phase_table", "transition_symbol",
    "twistor_quaternion", "twistor_rotation", "C1_CONVENTION", "RefineError",
]
