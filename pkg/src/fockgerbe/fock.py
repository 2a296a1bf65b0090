"""Degree-capped exterior algebra over a Lagrangian frame and its Clifford action.

Basis vectors are wedge products l_S = l_{s1} ^ ... ^ l_{sk} (s1 < ... < sk)
of the frame columns, encoded as bitmasks and ordered by (degree, lexicographic).
With orthonormal frame columns the Grammian inner product is diagonal, so
amplitudes are stored densely and the inner product is the standard one.

The Fock representation is pi_L(v) = sqrt2 (P_L v ^ .) + sqrt2 (P_L v -| .),
extended complex-linearly to all of H.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np

from .errors import (
    DegenerateSolutionError,
    NonConvergedError,
    NonOrthogonalBlocksError,
    NonOrthogonalError,
)
from .modes import (
    LagrangianFrame,
    ModeBasis,
    TruncatedOperator,
    _mat,
    check_sym,
    zg,
)

SQRT2 = np.sqrt(2.0)
_MAX_MODES = 24


class FockBasis:
    """Subsets of frame indices with |S| <= D, sorted by (degree, lexicographic)."""

    def __init__(self, frame: LagrangianFrame, D: int | None = None):
        m = frame.dim
        if m > _MAX_MODES:
            raise ValueError(f"{m} modes is beyond the dense Fock limit of {_MAX_MODES}")
        D = m if D is None else int(D)
        if not 0 <= D <= m:
            raise ValueError(f"degree cap must lie in [0, {m}], got {D}")
        self.frame = frame
        self.m = m
        self.D = D
        subsets = [S for k in range(D + 1) for S in combinations(range(m), k)]
        self.subsets: tuple[tuple[int, ...], ...] = tuple(subsets)
        self.masks = np.array([sum(1 << s for s in S) for S in subsets], dtype=np.int64)
        self.degrees = np.array([len(S) for S in subsets], dtype=np.int64)
        self.mask_index = np.full(1 << m, -1, dtype=np.int64)
        self.mask_index[self.masks] = np.arange(len(subsets))

    @property
    def dim(self) -> int:
        return len(self.subsets)

    @property
    def mode_basis(self) -> ModeBasis:
        return self.frame.basis

    def __len__(self) -> int:
        return self.dim

    def index(self, S) -> int:
        mask = sum(1 << s for s in S)
        i = int(self.mask_index[mask]) if mask < len(self.mask_index) else -1
        if i < 0 or len(set(S)) != len(tuple(S)):
            raise KeyError(S)
        return i

    @cached_property
    def parity_diag(self) -> np.ndarray:
        return np.where(self.degrees % 2 == 0, 1.0, -1.0)

    def expected_dim(self) -> int:
        return sum(comb(self.m, k) for k in range(self.D + 1))

    @cached_property
    def _creation_tables(self):
        """Per mode j: (source rows, target rows, signs, source rows pushed above the cap)."""
        tables = []
        for j in range(self.m):
            bit = 1 << j
            free = (self.masks & bit) == 0
            src = np.nonzero(free)[0]
            tgt_mask = self.masks[src] | bit
            sign = np.where(np.bitwise_count(self.masks[src] & (bit - 1)) % 2 == 0, 1.0, -1.0)
            tgt = self.mask_index[tgt_mask]
            kept = tgt >= 0
            tables.append((src[kept], tgt[kept], sign[kept], src[~kept]))
        return tables

    def create(self, j: int, amps: np.ndarray) -> np.ndarray:
        """l_j ^ amps (bare wedge, columns if 2-d), dropping mass above the cap."""
        src, tgt, sign, _ = self._creation_tables[j]
        out = np.zeros_like(amps, dtype=complex)
        out[tgt] = sign.reshape((-1,) + (1,) * (amps.ndim - 1)) * amps[src]
        return out

    def annihilate(self, j: int, amps: np.ndarray) -> np.ndarray:
        src, tgt, sign, _ = self._creation_tables[j]
        out = np.zeros_like(amps, dtype=complex)
        out[src] = sign.reshape((-1,) + (1,) * (amps.ndim - 1)) * amps[tgt]
        return out

    def truncated_mass(self, j: int, amps: np.ndarray) -> float:
        """Norm of the part of l_j ^ amps that falls above the degree cap."""
        _, _, _, lost = self._creation_tables[j]
        return float(np.linalg.norm(np.asarray(amps)[lost]))

    @cached_property
    def creator_matrices(self) -> np.ndarray:
        mats = np.zeros((self.m, self.dim, self.dim))
        for j, (src, tgt, sign, _) in enumerate(self._creation_tables):
            mats[j, tgt, src] = sign
        return mats

    def vacuum(self) -> "FockVector":
        amps = np.zeros(self.dim, dtype=complex)
        amps[0] = 1.0
        return FockVector(self, amps)

    def basis_vector(self, S) -> "FockVector":
        amps = np.zeros(self.dim, dtype=complex)
        amps[self.index(tuple(S))] = 1.0
        return FockVector(self, amps)

    def below_cap(self) -> np.ndarray:
        """Rows of degree <= D - 1, where one Clifford step stays exact."""
        return np.nonzero(self.degrees <= self.D - 1)[0]


@dataclass
class FockVector:
    basis: FockBasis
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (self.basis.dim,):
            raise ValueError("amplitude vector does not match the Fock basis")

    @classmethod
    def from_dict(cls, basis: FockBasis, amps: dict) -> "FockVector":
        v = np.zeros(basis.dim, dtype=complex)
        for S, a in amps.items():
            v[basis.index(tuple(S))] += a
        return cls(basis, v)

    def as_dict(self, tol: float = 0.0) -> dict:
        return {S: complex(a) for S, a in zip(self.basis.subsets, self.amps) if abs(a) > tol}

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def inner(self, other: "FockVector") -> complex:
        """<self, other>, linear in self."""
        return complex(np.vdot(other.amps, self.amps))

    def normalized(self) -> "FockVector":
        return FockVector(self.basis, self.amps / self.norm())

    def degree_part(self, k: int) -> "FockVector":
        return FockVector(self.basis, np.where(self.basis.degrees == k, self.amps, 0))

    def __add__(self, other: "FockVector") -> "FockVector":
        return FockVector(self.basis, self.amps + other.amps)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return FockVector(self.basis, self.amps - other.amps)

    def __mul__(self, c) -> "FockVector":
        return FockVector(self.basis, c * self.amps)

    __rmul__ = __mul__


@dataclass
class FockOperator:
    domain: object
    codomain: object
    matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)

    @property
    def unitary_defect(self) -> float:
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            return np.inf
        return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1])), initial=0.0))

    @property
    def is_unitary(self) -> bool:
        return self.unitary_defect <= 1e-9

    @property
    def H(self) -> "FockOperator":
        return FockOperator(self.codomain, self.domain, self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(other.domain, self.codomain, self.matrix @ other.matrix)
        if isinstance(other, FockVector):
            if not isinstance(self.codomain, FockBasis):
                raise TypeError("codomain is not a Fock basis")
            return FockVector(self.codomain, self.matrix @ other.amps)
        return self.matrix @ np.asarray(other)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.domain, self.codomain, self.matrix + other.matrix)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.domain, self.codomain, self.matrix - other.matrix)

    def __mul__(self, c) -> "FockOperator":
        return FockOperator(self.domain, self.codomain, c * self.matrix)

    __rmul__ = __mul__


# -- creators and the Clifford action -------------------------------------------

def creator(basis: FockBasis, j: int) -> FockOperator:
    if basis.D < 1:
        raise ValueError("creators need a degree cap of at least 1")
    return FockOperator(basis, basis, basis.creator_matrices[j])


def annihilator(basis: FockBasis, j: int) -> FockOperator:
    if basis.D < 1:
        raise ValueError("annihilators need a degree cap of at least 1")
    return FockOperator(basis, basis, basis.creator_matrices[j].T)


def clifford_coefficients(v: np.ndarray, basis: FockBasis) -> tuple[np.ndarray, np.ndarray]:
    """(alpha, beta) with pi_L(v) = sqrt2 sum_j alpha_j c_j + beta_j a_j."""
    frame = basis.frame
    v = np.asarray(v, dtype=complex)
    alpha = frame.columns.conj().T @ v
    beta = frame.columns.T @ v[frame.basis.conj_perm]
    return alpha, beta


def clifford_apply(v: np.ndarray, basis: FockBasis, amps: np.ndarray) -> np.ndarray:
    """pi_L(v) applied to amplitude vectors (or columns) without forming a matrix."""
    alpha, beta = clifford_coefficients(v, basis)
    out = np.zeros_like(amps, dtype=complex)
    for j in range(basis.m):
        if alpha[j] != 0:
            out += alpha[j] * basis.create(j, amps)
        if beta[j] != 0:
            out += beta[j] * basis.annihilate(j, amps)
    return SQRT2 * out


def clifford_matrix(v: np.ndarray, basis: FockBasis) -> np.ndarray:
    alpha, beta = clifford_coefficients(v, basis)
    c = basis.creator_matrices
    return SQRT2 * (np.tensordot(alpha, c, 1) + np.tensordot(beta, np.swapaxes(c, 1, 2), 1))


def clifford_matrices(vectors: np.ndarray, basis: FockBasis) -> np.ndarray:
    """Stack of pi_L(v) for the columns v of ``vectors``, shape (k, N, N)."""
    alpha, beta = clifford_coefficients(vectors, basis)
    c = basis.creator_matrices
    ct = np.swapaxes(c, 1, 2)
    return SQRT2 * (np.tensordot(alpha, c, axes=(0, 0)) + np.tensordot(beta, ct, axes=(0, 0)))


def clifford_rep(v: np.ndarray, basis: FockBasis) -> FockOperator:
    """pi_L(v); self-adjoint when v is real."""
    return FockOperator(basis, basis, clifford_matrix(v, basis))


def real_inner(v: np.ndarray, w: np.ndarray) -> complex:
    """Complex-bilinear extension (v, w) = sum v_i w_{sigma i} of the real inner product."""
    # for real v, w this equals <v, w>; it is the pairing the Clifford relations use
    return complex(np.sum(np.asarray(v) * np.conj(np.asarray(w))))


# -- Clifford words and Bogoliubov substitution ---------------------------------

@dataclass(frozen=True)
class CliffordWord:
    coeff: complex
    vectors: tuple

    @classmethod
    def of(cls, *vectors, coeff: complex = 1.0) -> "CliffordWord":
        return cls(complex(coeff), tuple(np.asarray(v, dtype=complex) for v in vectors))

    def __mul__(self, other: "CliffordWord") -> "CliffordWord":
        return CliffordWord(self.coeff * other.coeff, self.vectors + other.vectors)

    @property
    def degree(self) -> int:
        return len(self.vectors)


def word_rep(word: CliffordWord, basis: FockBasis) -> FockOperator:
    m = word.coeff * np.eye(basis.dim, dtype=complex)
    for v in word.vectors:
        m = m @ clifford_matrix(v, basis)
    return FockOperator(basis, basis, m)


def check_orthogonal(g, basis: ModeBasis, tol: float = 1e-9) -> np.ndarray:
    m = _mat(g)
    if m.shape != (basis.dim, basis.dim):
        raise NonOrthogonalError("operator shape does not match the mode basis")
    if np.max(np.abs(basis.sigma_op(m) - m)) > tol:
        raise NonOrthogonalError("operator does not commute with the real structure")
    if np.max(np.abs(m.conj().T @ m - np.eye(len(m)))) > tol:
        raise NonOrthogonalError("operator is not unitary")
    return m


def bogoliubov(word: CliffordWord, g, basis: ModeBasis | None = None) -> CliffordWord:
    """theta_g: replace every vector of the word by its image under g."""
    basis = basis or getattr(g, "basis", None)
    if basis is None:
        raise ValueError("a mode basis is needed to check orthogonality")
    m = check_orthogonal(g, basis)
    return CliffordWord(word.coeff, tuple(m @ v for v in word.vectors))


# -- Lambda_g, tau and quadratic exponentials ------------------------------------

def image_basis(g, basis: FockBasis) -> FockBasis:
    """Fock basis of gL with frame g l_j."""
    m = check_orthogonal(g, basis.mode_basis)
    return FockBasis(LagrangianFrame(basis.mode_basis, m @ basis.frame.columns), basis.D)


def minors_operator(u: np.ndarray, source: FockBasis, target: FockBasis) -> np.ndarray:
    """Matrix of the exterior power of the frame change u = target^H (image of source)."""
    out = np.zeros((target.dim, source.dim), dtype=complex)
    for k in range(min(source.D, target.D) + 1):
        cols = np.nonzero(source.degrees == k)[0]
        rows = np.nonzero(target.degrees == k)[0]
        if k == 0:
            out[rows[0], cols[0]] = 1.0
            continue
        S = np.array([source.subsets[c] for c in cols])
        T = np.array([target.subsets[r] for r in rows])
        sub = u[T[:, None, :, None], S[None, :, None, :]]
        out[np.ix_(rows, cols)] = np.linalg.det(sub)
    return out


def lambda_g(g, basis: FockBasis, target: FockBasis | None = None) -> FockOperator:
    """Lambda_g: l_S -> (g l_{s1}) ^ ... ^ (g l_{sk}), from F(L) to F(gL).

    Without a target the codomain uses the frame g l_j and the matrix is the
    identity; with a target frame spanning gL the matrix holds the minors of
    the frame change.
    """
    m = check_orthogonal(g, basis.mode_basis)
    if target is None:
        return FockOperator(basis, image_basis(m, basis), np.eye(basis.dim, dtype=complex))
    u = target.frame.columns.conj().T @ m @ basis.frame.columns
    if np.max(np.abs(u.conj().T @ u - np.eye(basis.m))) > 1e-9:
        raise ValueError("target frame does not span gL")
    return FockOperator(basis, target, minors_operator(u, basis, target))


def sym_lambda2(basis: FockBasis, Z) -> np.ndarray:
    """Antisymmetric matrix z_{jp} = <Z Sigma l_j, l_p>."""
    f = basis.frame.columns
    return (f.conj().T @ _mat(Z) @ basis.frame.conj_columns).T


def tau_inverse(Z, basis: FockBasis, check: bool = True) -> FockVector:
    """zeta = sqrt2 sum_{j<p} <Z Sigma l_j, l_p> l_j ^ l_p."""
    if basis.D < 2 and basis.m >= 2:
        raise ValueError("Lambda^2 needs a degree cap of at least 2")
    if check:
        check_sym(Z, basis.frame.J, basis.mode_basis)
    z = sym_lambda2(basis, Z)
    amps = np.zeros(basis.dim, dtype=complex)
    for j, p in combinations(range(basis.m), 2):
        amps[basis.index((j, p))] = SQRT2 * z[j, p]
    return FockVector(basis, amps)


def tau(zeta: FockVector) -> np.ndarray:
    """tau(zeta) = Z_zeta / sqrt2 as an operator on H, with <zeta, x^y> = <Z_zeta Sigma x, y>."""
    basis = zeta.basis
    f = basis.frame.columns
    fbar = basis.frame.conj_columns
    c = np.zeros((basis.m, basis.m), dtype=complex)
    for j, p in combinations(range(basis.m), 2):
        a = zeta.amps[basis.index((j, p))]
        c[j, p] = a
        c[p, j] = -a
    # Z_zeta fbar_j = sum_p c_{jp} l_p ; extended to L as Sigma Z Sigma
    on_sigma = f @ c.T @ fbar.conj().T
    on_l = basis.mode_basis.sigma_op(on_sigma)
    return (on_sigma + on_l) / SQRT2


def degree_two_operator(zeta: FockVector) -> np.ndarray:
    """Dense matrix of wedging with a pure degree-2 vector."""
    basis = zeta.basis
    w = np.zeros((basis.dim, basis.dim), dtype=complex)
    c = basis.creator_matrices
    for j, p in combinations(range(basis.m), 2):
        a = zeta.amps[basis.index((j, p))]
        if a != 0:
            w += a * (c[j] @ c[p])
    return w


def _wedge_two(zeta_coeffs: dict, basis: FockBasis, amps: np.ndarray) -> np.ndarray:
    out = np.zeros_like(amps)
    for (j, p), a in zeta_coeffs.items():
        out += a * basis.create(j, basis.create(p, amps))
    return out


def quad_exp(zeta: FockVector, D: int | None = None) -> tuple[FockVector, float]:
    """exp(zeta) = sum zeta^k / k! for pure degree-2 zeta.

    Returns the vector on a basis capped at D (default: zeta's basis cap) and
    the norm of the terms that the cap drops.  The series terminates at
    k = m // 2, so it is exact once D covers the full degree.
    """
    src = zeta.basis
    D = src.D if D is None else D
    if np.any(np.abs(zeta.amps[src.degrees != 2]) > 0):
        raise ValueError("quad_exp expects a pure degree-2 vector")
    coeffs = {
        (j, p): zeta.amps[src.index((j, p))]
        for j, p in combinations(range(src.m), 2)
        if zeta.amps[src.index((j, p))] != 0
    }
    full = FockBasis(src.frame, src.m) if src.D < src.m else src
    term = full.vacuum().amps
    total = term.copy()
    for k in range(1, src.m // 2 + 1):
        term = _wedge_two(coeffs, full, term) / k
        total = total + term
    target = FockBasis(src.frame, D) if D != src.D else src
    kept = full.degrees <= D
    tail = float(np.linalg.norm(total[~kept]))
    out = np.zeros(target.dim, dtype=complex)
    out[target.mask_index[full.masks[kept]]] = total[kept]
    return FockVector(target, out), tail


def vacuum_coefficients(g, basis: FockBasis) -> FockVector:
    """Degree-2 generator of the vacuum of pi_L o theta_g.

    The annihilated directions are g Sigma L = {u - Z_g u : u in Sigma L}, which
    forces zeta = sum_{c<b} <Z_g Sigma l_c, l_b> l_c ^ l_b.  This is
    tau^{-1}(Z_g) / sqrt2 in the normalization of ``tau_inverse``.
    """
    z = zg(g, basis.frame.J)
    return tau_inverse(z, basis, check=False) * (1.0 / SQRT2)


def vacuum_vector(g, basis: FockBasis) -> FockVector:
    """Unit L-vacuum for pi_L o theta_g, from the quadratic exponential of Z_g."""
    check_orthogonal(g, basis.mode_basis)
    zeta = vacuum_coefficients(g, basis)
    v, tail = quad_exp(zeta, basis.D)
    if tail > 1e-12:
        raise NonConvergedError(f"vacuum exceeds the degree cap (tail {tail:.2e})")
    return v.normalized()


def vacuum_residual(g, basis: FockBasis, vec: FockVector) -> float:
    """max_c ||pi_L(g Sigma l_c) vec||."""
    m = _mat(g)
    fbar = basis.frame.conj_columns
    return max(
        (float(np.linalg.norm(clifford_apply(m @ fbar[:, c], basis, vec.amps))) for c in range(basis.m)),
        default=0.0,
    )


# -- implementers -----------------------------------------------------------------

def _require_full(basis: FockBasis) -> None:
    if basis.D != basis.m:
        raise ValueError("implementers need the full exterior algebra (D = dim L)")


def build_from_vacuum(images: np.ndarray, basis: FockBasis, target: FockBasis,
                      vac: np.ndarray) -> np.ndarray:
    """Columns U l_S = pi_target(images[:, s]) U l_{S - s} / sqrt2, s = min S."""
    _require_full(basis)
    ops = clifford_matrices(images, target) / SQRT2
    u = np.zeros((target.dim, basis.dim), dtype=complex)
    u[:, 0] = vac
    for col in range(1, basis.dim):
        S = basis.subsets[col]
        u[:, col] = ops[S[0]] @ u[:, basis.index(S[1:])]
    return u


def implementer_residual(u: np.ndarray, g, basis: FockBasis, target: FockBasis | None = None) -> float:
    """max over mode vectors e_a of ||U pi_L(e_a) - pi_target(g e_a) U||_F."""
    target = target or basis
    m = _mat(g)
    eye = np.eye(basis.mode_basis.dim, dtype=complex)
    lhs = u @ clifford_matrices(eye, basis)
    rhs = clifford_matrices(m, target) @ u
    return float(np.max(np.linalg.norm(lhs - rhs, axis=(1, 2))))


def implementer(g, basis: FockBasis, tol: float = 1e-8) -> FockOperator:
    """U_g with U pi_L(v) U* = pi_L(g v) and <U Omega, Omega> > 0.

    Built from the quadratic-exponential vacuum Omega_g by
    U(l_S) = 2^{-k/2} pi_L(g l_{s1}) ... pi_L(g l_{sk}) Omega_g.
    """
    _require_full(basis)
    m = check_orthogonal(g, basis.mode_basis)
    vac = vacuum_vector(m, basis)
    u = build_from_vacuum(m @ basis.frame.columns, basis, basis, vac.amps)
    res = implementer_residual(u, m, basis)
    if res > tol:
        raise NonConvergedError(f"implementer residual {res:.2e} exceeds {tol:.1e}")
    return FockOperator(basis, basis, u, {"residual": res, "method": "vacuum"})


def _fix_phase(u: np.ndarray, thresh: float = 1e-6) -> tuple[np.ndarray, str]:
    v0 = u[0, 0]
    if abs(v0) > thresh:
        return u * (abs(v0) / v0), "canonical"
    col = u[:, 0]
    k = int(np.argmax(np.abs(col) > thresh * max(np.max(np.abs(col)), 1e-300)))
    return u * (abs(col[k]) / col[k]), "fallback"


def null_space(a: np.ndarray, rel_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal null-space basis of a and the full singular values."""
    n = a.shape[1]
    _, s, vh = np.linalg.svd(a, full_matrices=a.shape[0] < n)
    s_full = np.concatenate([s, np.zeros(max(0, n - len(s)))])
    scale = max(float(s[0]) if len(s) else 0.0, 1.0)
    mask = s_full[:n] <= rel_tol * scale
    return vh[mask].conj().T, s_full


def brute_force_implementer(g, basis: FockBasis, rel_tol: float = 1e-8,
                            max_dense: int = 32) -> FockOperator:
    """Solve U pi_L(e_a) - pi_L(g e_a) U = 0 directly.

    Small Fock spaces use the full Kronecker system; larger ones solve for
    the vacuum as the common null space of pi_L(g Sigma l_c) and rebuild U.
    Normalized to a unitary with <U Omega, Omega> > 0.
    """
    _require_full(basis)
    m = check_orthogonal(g, basis.mode_basis)
    N = basis.dim
    if N <= max_dense:
        eye = np.eye(N)
        gram = np.zeros((N * N, N * N), dtype=complex)
        for a in range(basis.mode_basis.dim):
            e = np.zeros(basis.mode_basis.dim, dtype=complex)
            e[a] = 1.0
            A = clifford_matrix(e, basis)
            B = clifford_matrix(m @ e, basis)
            K = np.kron(A.T, eye) - np.kron(eye, B)
            gram += K.conj().T @ K
        w, v = np.linalg.eigh(gram)
        scale = max(float(w[-1]), 1.0)
        null = np.nonzero(w <= rel_tol * scale)[0]
        if len(null) != 1:
            raise DegenerateSolutionError(len(null))
        u = v[:, null[0]].reshape((N, N), order="F")
        method = "kronecker"
    else:
        fbar = basis.frame.conj_columns
        stack = np.vstack([clifford_matrix(m @ fbar[:, c], basis) for c in range(basis.m)])
        ns, _ = null_space(stack, rel_tol)
        if ns.shape[1] != 1:
            raise DegenerateSolutionError(ns.shape[1])
        u = build_from_vacuum(m @ basis.frame.columns, basis, basis, ns[:, 0])
        method = "vacuum-null-space"
    u = u * (np.sqrt(N) / np.linalg.norm(u))
    u, phase = _fix_phase(u)
    res = implementer_residual(u, m, basis)
    return FockOperator(basis, basis, u, {"residual": res, "method": method, "phase": phase})


def intertwiner(basis_l: FockBasis, basis_k: FockBasis, g, U: FockOperator | None = None) -> FockOperator:
    """T = Lambda_g U_g^*: F(L) -> F(K) for K = gL."""
    lam = lambda_g(g, basis_l, basis_k)
    U = U if U is not None else implementer(g, basis_l)
    t = lam.matrix @ U.matrix.conj().T
    return FockOperator(basis_l, basis_k, t, {"phase": "implementer"})


def sigma_vacuum(basis_k: FockBasis, frame_l: LagrangianFrame, rel_tol: float = 1e-8):
    """Unit vector of F(K) killed by pi_K(Sigma l) for all l in L, with nullity and gap."""
    stack = clifford_matrices(frame_l.conj_columns, basis_k).reshape(-1, basis_k.dim)
    ns, s = null_space(stack, rel_tol)
    return ns, s


def canonical_intertwiner(basis_l: FockBasis, basis_k: FockBasis, rel_tol: float = 1e-8,
                          phase_thresh: float = 1e-6) -> FockOperator:
    """Intertwiner F(L) -> F(K) from the Sigma L-vacuum in F(K).

    Phase: <T Omega_L, Omega_K> > 0 when that overlap is above
    ``phase_thresh``, otherwise the first significant amplitude is made
    positive and the result is flagged as "fallback".
    """
    if basis_l.mode_basis != basis_k.mode_basis:
        raise ValueError("frames live in different mode spaces")
    ns, s = sigma_vacuum(basis_k, basis_l.frame, rel_tol)
    if ns.shape[1] != 1:
        raise DegenerateSolutionError(ns.shape[1])
    t = build_from_vacuum(basis_l.frame.columns, basis_l, basis_k, ns[:, 0])
    t, phase = _fix_phase(t, phase_thresh)
    return FockOperator(basis_l, basis_k, t, {"phase": phase, "nullity": 1})


def intertwining_residual(t: np.ndarray, basis_l: FockBasis, basis_k: FockBasis) -> float:
    """max_a ||T pi_L(e_a) - pi_K(e_a) T||_F."""
    return implementer_residual(t, np.eye(basis_l.mode_basis.dim), basis_l, basis_k)


# -- grading and Fock sums ------------------------------------------------------------

def parity_operator(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, basis, np.diag(basis.parity_diag).astype(complex))


def parity(w: FockVector, tol: float = 1e-10) -> str:
    """'even', 'odd' or 'mixed' by the support of the amplitudes."""
    even = np.linalg.norm(w.amps[w.basis.degrees % 2 == 0])
    odd = np.linalg.norm(w.amps[w.basis.degrees % 2 == 1])
    if odd <= tol:
        return "even"
    if even <= tol:
        return "odd"
    return "mixed"


def parity_behaviour(t: FockOperator, tol: float = 1e-10) -> str:
    """'preserves', 'reverses' or 'mixes' the Z2 grading."""
    d = t.domain.parity_diag
    c = t.codomain.parity_diag
    same = np.abs(t.matrix[np.equal.outer(c, d)])
    diff = np.abs(t.matrix[~np.equal.outer(c, d)])
    if np.max(diff, initial=0.0) <= tol:
        return "preserves"
    if np.max(same, initial=0.0) <= tol:
        return "reverses"
    return "mixes"


def sum_frame(b1: FockBasis, b2: FockBasis, tol: float = 1e-10) -> LagrangianFrame:
    """Frame (l_1.., l'_1..) of L1 + L2 after checking the blocks are orthogonal."""
    f1, f2 = b1.frame, b2.frame
    if f1.basis != f2.basis:
        raise NonOrthogonalBlocksError("frames live in different mode spaces")
    v1 = np.hstack([f1.columns, f1.conj_columns])
    v2 = np.hstack([f2.columns, f2.conj_columns])
    if np.max(np.abs(v1.conj().T @ v2)) > tol:
        raise NonOrthogonalBlocksError("V1 and V2 are not orthogonal")
    cols = np.hstack([f1.columns, f2.columns])
    return LagrangianFrame(f1.basis, cols, check=cols.shape[1] * 2 == f1.basis.dim)


def fock_sum_iso(b1: FockBasis, b2: FockBasis, target: FockBasis | None = None) -> FockOperator:
    """F(L1) (x) F(L2) -> F(L1 + L2), l_S (x) l'_T -> l_S ^ l'_T.

    The tensor index is i1 * dim F(L2) + i2; L1 modes precede L2 modes in the
    target frame, so each basis tensor maps to a basis wedge with sign +1.
    """
    frame = sum_frame(b1, b2)
    target = target or FockBasis(frame, b1.D + b2.D)
    out = np.zeros((target.dim, b1.dim * b2.dim), dtype=complex)
    shift = b1.m
    for i1, m1 in enumerate(b1.masks):
        for i2, m2 in enumerate(b2.masks):
            out[target.mask_index[int(m1) | (int(m2) << shift)], i1 * b2.dim + i2] = 1.0
    return FockOperator((b1, b2), target, out)


def graded_tensor_action(v: np.ndarray, b1: FockBasis, b2: FockBasis) -> np.ndarray:
    """phi(v1 + v2) = pi_1(v1) (x) 1 + Gamma_1 (x) pi_2(v2)."""
    p1 = clifford_matrix(v, b1)
    p2 = clifford_matrix(v, b2)
    return np.kron(p1, np.eye(b2.dim)) + np.kron(np.diag(b1.parity_diag), p2)


def random_unit_vector(basis: FockBasis, rng: np.random.Generator) -> FockVector:
    a = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return FockVector(basis, a / np.linalg.norm(a))


def random_lambda2(basis: FockBasis, rng: np.random.Generator, scale: float = 1.0) -> FockVector:
    amps = np.zeros(basis.dim, dtype=complex)
    k2 = basis.degrees == 2
    amps[k2] = scale * (rng.normal(size=k2.sum()) + 1j * rng.normal(size=k2.sum()))
    return FockVector(basis, amps)


def as_truncated(g, basis: ModeBasis) -> TruncatedOperator:
    return g if isinstance(g, TruncatedOperator) else TruncatedOperator(basis, g)
