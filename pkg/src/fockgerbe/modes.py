"""Finite Fourier-mode model of H = L^2(S^1, C^n).

The truncated space is C^n (x) span{e^{iqt} : |q| <= Q} with basis ordered
lexicographically in (q, a).  The real structure Sigma conjugates
coefficients and sends q to -q; real vectors (Sigma v = v) model V.

Inner products are linear in the first slot, <x, y> = sum_i x_i conj(y_i).
Operators are plain complex matrices wrapped in ``TruncatedOperator``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BandTooWideError,
    NotLagrangianError,
    NotSymError,
    SingularCError,
    TooFarError,
)
from .quatgeom import FourierCoefficients, fourier_of_loop

_TOL = 1e-10


@dataclass(frozen=True)
class ModeBasis:
    n: int
    Q: int

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError(f"fiber dimension must be even and >= 2, got {self.n}")
        if self.Q < 0:
            raise ValueError("cutoff must be >= 0")

    @property
    def dim(self) -> int:
        return self.n * (2 * self.Q + 1)

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(-self.Q, self.Q + 1)

    def index(self, q: int, a: int) -> int:
        if abs(q) > self.Q or not 0 <= a < self.n:
            raise IndexError((q, a))
        return (q + self.Q) * self.n + a

    @cached_property
    def mode_freq(self) -> np.ndarray:
        return np.repeat(self.freqs, self.n)

    @cached_property
    def conj_perm(self) -> np.ndarray:
        """Index permutation (q, a) -> (-q, a)."""
        q = self.mode_freq
        a = np.tile(np.arange(self.n), 2 * self.Q + 1)
        return (-q + self.Q) * self.n + a

    def sigma(self, v: np.ndarray) -> np.ndarray:
        """Apply Sigma to vectors (columns if 2-d)."""
        v = np.asarray(v)
        return np.conj(v[self.conj_perm])

    def sigma_op(self, a: np.ndarray) -> np.ndarray:
        """Sigma a Sigma for a complex-linear operator a."""
        p = self.conj_perm
        return np.conj(a[np.ix_(p, p)])

    def realify(self, w: np.ndarray) -> np.ndarray:
        """Real part (w + Sigma w) / 2 of a vector."""
        return 0.5 * (w + self.sigma(w))

    def random_real(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        shape = (self.dim,) if count is None else (self.dim, count)
        w = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return self.realify(w)

    def window_indices(self, inner: "ModeBasis") -> np.ndarray:
        """Positions of the modes of a smaller window inside this one."""
        if inner.n != self.n or inner.Q > self.Q:
            raise ValueError("inner window must share n and have smaller cutoff")
        off = (self.Q - inner.Q) * self.n
        return off + np.arange(inner.dim)


class TruncatedOperator:
    """Complex matrix on a ModeBasis, with real/orthogonal diagnostics."""

    def __init__(self, basis: ModeBasis, matrix, leakage: float = 0.0):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (basis.dim, basis.dim):
            raise ValueError(f"matrix shape {m.shape} does not match basis dim {basis.dim}")
        self.basis = basis
        self.matrix = m
        self.leakage = float(leakage)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, TruncatedOperator):
            return TruncatedOperator(self.basis, self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    @property
    def H(self) -> "TruncatedOperator":
        return TruncatedOperator(self.basis, self.matrix.conj().T)

    @cached_property
    def real_defect(self) -> float:
        return float(np.max(np.abs(self.basis.sigma_op(self.matrix) - self.matrix), initial=0.0))

    @cached_property
    def unitary_defect(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(len(m))), initial=0.0))

    @property
    def is_real(self) -> bool:
        return self.real_defect <= _TOL

    @property
    def is_orthogonal(self) -> bool:
        return self.is_real and self.unitary_defect <= _TOL and self.leakage < 1e-8


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, TruncatedOperator) else np.asarray(x, dtype=complex)


def _basis_of(*xs) -> ModeBasis | None:
    for x in xs:
        if isinstance(x, (TruncatedOperator, LagrangianFrame)):
            return x.basis
    return None


def _wrap(basis, m):
    return TruncatedOperator(basis, m) if basis is not None else m


class LagrangianFrame:
    """Orthonormal columns spanning a Lagrangian L (L perp = Sigma L)."""

    def __init__(self, basis: ModeBasis, columns, check: bool = True, tol: float = 1e-9):
        cols = np.asarray(columns, dtype=complex)
        if cols.ndim != 2 or cols.shape[0] != basis.dim:
            raise ValueError("columns must be a (dim H, dim L) array")
        self.basis = basis
        self.columns = cols
        if check:
            self.check(tol)

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @cached_property
    def conj_columns(self) -> np.ndarray:
        return self.basis.sigma(self.columns)

    def check(self, tol: float = 1e-9) -> None:
        f = self.columns
        if 2 * f.shape[1] != self.basis.dim:
            raise NotLagrangianError(f"dim L = {f.shape[1]} is not half of dim H = {self.basis.dim}")
        if np.max(np.abs(f.conj().T @ f - np.eye(f.shape[1])), initial=0.0) > tol:
            raise NotLagrangianError("frame columns are not orthonormal")
        if np.max(np.abs(f.conj().T @ self.conj_columns), initial=0.0) > tol:
            raise NotLagrangianError("L is not orthogonal to Sigma L")

    @cached_property
    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.conj().T

    @cached_property
    def J(self) -> np.ndarray:
        """Unitary structure: i on L, -i on Sigma L."""
        return 1j * (2.0 * self.projector - np.eye(self.basis.dim))

    def image(self, g) -> "LagrangianFrame":
        return LagrangianFrame(self.basis, _mat(g) @ self.columns)


def default_finite_lagrangian(n: int) -> np.ndarray:
    """span{(e_{2a} + i e_{2a+1}) / sqrt 2}, a Lagrangian of C^n."""
    lf = np.zeros((n, n // 2), dtype=complex)
    for a in range(n // 2):
        lf[2 * a, a] = 1.0 / np.sqrt(2.0)
        lf[2 * a + 1, a] = 1j / np.sqrt(2.0)
    return lf


def standard_lagrangian(basis: ModeBasis, L_finite=None) -> LagrangianFrame:
    """Constants in L_finite plus every fiber direction at positive frequency."""
    n = basis.n
    lf = default_finite_lagrangian(n) if L_finite is None else np.asarray(L_finite, dtype=complex)
    if lf.ndim == 1:
        lf = lf[:, None]
    if lf.shape != (n, n // 2):
        raise NotLagrangianError(f"L_finite must have shape ({n}, {n // 2}), got {lf.shape}")
    q, r = np.linalg.qr(lf)
    if np.min(np.abs(np.diag(r))) < 1e-12:
        raise NotLagrangianError("L_finite is rank deficient")
    if np.max(np.abs(q.T @ q)) > 1e-9:
        raise NotLagrangianError("L_finite meets its conjugate")
    cols = np.zeros((basis.dim, n * basis.Q + n // 2), dtype=complex)
    i0 = basis.index(0, 0)
    cols[i0:i0 + n, : n // 2] = q
    c = n // 2
    for qq in range(1, basis.Q + 1):
        for a in range(n):
            cols[basis.index(qq, a), c] = 1.0
            c += 1
    return LagrangianFrame(basis, cols)


def projector_pl(L: LagrangianFrame) -> TruncatedOperator:
    """P = (1 - iJ) / 2, the orthogonal projection onto L."""
    p = 0.5 * (np.eye(L.basis.dim) - 1j * L.J)
    return TruncatedOperator(L.basis, p)


# -- loops of matrices --------------------------------------------------------

@dataclass(frozen=True)
class FourierLoop:
    """Matrix-valued loop sigma(t) = sum_k coeffs[k] e^{ikt}."""

    coeffs: dict

    @classmethod
    def from_samples(cls, samples: np.ndarray, tol: float = 1e-13) -> "FourierLoop":
        fc = fourier_of_loop(np.asarray(samples))
        return cls(fc.as_dict(tol))

    @classmethod
    def from_fourier(cls, fc: FourierCoefficients, tol: float = 1e-13) -> "FourierLoop":
        return cls(fc.as_dict(tol))

    @classmethod
    def constant(cls, a) -> "FourierLoop":
        return cls({0: np.asarray(a, dtype=complex)})

    @property
    def n(self) -> int:
        return next(iter(self.coeffs.values())).shape[0]

    @property
    def band(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = 0
        for k, c in self.coeffs.items():
            out = out + np.exp(1j * k * t)[..., None, None] * c
        return out

    def product(self, other: "FourierLoop") -> "FourierLoop":
        out: dict[int, np.ndarray] = {}
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + c1 @ c2
        return FourierLoop(out)

    def transpose(self) -> "FourierLoop":
        # pointwise transpose of a real loop: coefficients transpose
        return FourierLoop({k: c.T for k, c in self.coeffs.items()})


def multiplication_operator(basis: ModeBasis, sigma: FourierLoop, strict: bool = False,
                            tol: float = 1e-8) -> TruncatedOperator:
    """Block (p, q) = sigma_{p-q}, Fourier mass escaping the window dropped."""
    n = basis.n
    if sigma.n != n:
        raise ValueError("loop fiber dimension does not match the basis")
    m = np.zeros((basis.dim, basis.dim), dtype=complex)
    leak2 = 0.0
    for q in basis.freqs:
        cq = slice(basis.index(q, 0), basis.index(q, 0) + n)
        for k, c in sigma.coeffs.items():
            p = q + k
            if abs(p) <= basis.Q:
                rp = basis.index(p, 0)
                m[rp:rp + n, cq] = c
            else:
                leak2 += float(np.sum(np.abs(c) ** 2))
    leakage = float(np.sqrt(leak2))
    if strict and leakage > tol:
        raise BandTooWideError(f"Fourier mass {leakage:.3e} escapes the cutoff Q={basis.Q}")
    return TruncatedOperator(basis, m, leakage=leakage)


def hs_commutator_norm(J, g) -> float:
    j, m = _mat(J), _mat(g)
    return float(np.linalg.norm(j @ m - m @ j))


def decompose_ca(g, J):
    """(C_g, A_g) = ((g - JgJ)/2, (g + JgJ)/2)."""
    m, j = _mat(g), _mat(J)
    jgj = j @ m @ j
    basis = _basis_of(g, J)
    return _wrap(basis, 0.5 * (m - jgj)), _wrap(basis, 0.5 * (m + jgj))


def zg(g, J, cond_bound: float = 1e8):
    """Z_g = -A_g C_g^{-1}."""
    c, a = decompose_ca(g, J)
    c, a = _mat(c), _mat(a)
    s = np.linalg.svd(c, compute_uv=False)
    smin = float(s[-1])
    cond = float(s[0] / smin) if smin > 0 else np.inf
    # ||C_g|| <= 1 for orthogonal g, so a small sigma_min is singular even when cond is not
    if smin == 0.0 or cond > cond_bound or smin < 1.0 / cond_bound:
        raise SingularCError(smin, cond)
    z = -np.linalg.solve(c.T, a.T).T
    return _wrap(_basis_of(g, J), z)


def sym_defects(z, J, basis: ModeBasis) -> dict:
    """Deviation from the three defining relations of Sym(Sigma L)."""
    zm, j = _mat(z), _mat(J)
    return {
        "sigma": float(np.max(np.abs(basis.sigma_op(zm) - zm), initial=0.0)),
        "skew": float(np.max(np.abs(zm.conj().T + zm), initial=0.0)),
        "anti_j": float(np.max(np.abs(j @ zm + zm @ j), initial=0.0)),
    }


def check_sym(z, J, basis: ModeBasis, tol: float = 1e-9) -> None:
    d = sym_defects(z, J, basis)
    bad = {k: v for k, v in d.items() if v > tol}
    if bad:
        raise NotSymError(f"operator is not in Sym(Sigma L): {bad}")


def inv_sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return (v / np.sqrt(w)) @ v.conj().T


def retract(z, J=None, basis: ModeBasis | None = None):
    """w = (1 - z)(1 + z*z)^{-1/2}, an orthogonal operator with Z_w = z."""
    zm = _mat(z)
    basis = basis or _basis_of(z, J)
    if J is not None and basis is not None:
        check_sym(zm, J, basis)
    eye = np.eye(len(zm))
    w = (eye - zm) @ inv_sqrt_psd(eye + zm.conj().T @ zm)
    return _wrap(basis, w)


def polar_unitary(x: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(x)
    return u @ vh


def canonical_conjugator(J, K, tol: float = 1e-9):
    """Unitary polar factor of 1 - KJ; conjugates J to K."""
    j, k = _mat(J), _mat(K)
    if np.linalg.norm(k - j, 2) >= 2.0 - tol:
        raise TooFarError("||K - J|| must be < 2")
    g = polar_unitary(np.eye(len(j)) - k @ j)
    return _wrap(_basis_of(J, K), g)


def orthogonal_from_frames(basis: ModeBasis, source: LagrangianFrame | np.ndarray,
                           target: LagrangianFrame | np.ndarray) -> TruncatedOperator:
    """Orthogonal g with g l_j = k_j and g Sigma l_j = Sigma k_j."""
    s = source.columns if isinstance(source, LagrangianFrame) else np.asarray(source)
    t = target.columns if isinstance(target, LagrangianFrame) else np.asarray(target)
    full_s = np.hstack([s, basis.sigma(s)])
    full_t = np.hstack([t, basis.sigma(t)])
    return TruncatedOperator(basis, full_t @ full_s.conj().T)


def random_so_generator(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(n, n)) * scale
    return x - x.T


def random_so_loop(n: int, band: int, rng: np.random.Generator, scale: float = 0.1) -> FourierLoop:
    """Band-limited loop in so(n): real antisymmetric coefficients with xi_{-k} = conj(xi_k)."""
    coeffs = {0: random_so_generator(n, rng, scale).astype(complex)}
    for k in range(1, band + 1):
        c = random_so_generator(n, rng, scale) + 1j * random_so_generator(n, rng, scale)
        coeffs[k] = c
        coeffs[-k] = np.conj(c)
    return FourierLoop(coeffs)


def random_orthogonal(basis: ModeBasis, rng: np.random.Generator, scale: float = 0.1,
                      band: int = 1) -> TruncatedOperator:
    """exp of a compressed band-limited so(n) multiplication operator; orthogonal on the window."""
    from scipy.linalg import expm

    xi = random_so_loop(basis.n, band, rng, scale)
    x = multiplication_operator(basis, xi).matrix
    return TruncatedOperator(basis, expm(x))


# -- exact finite window for band-limited loops ---------------------------------

def window_lagrangian(basis: ModeBasis, sigma: FourierLoop, L_finite=None,
                      rank_tol: float = 1e-9) -> LagrangianFrame:
    """K_W with gL = K_W + L_{>Q}, for the standard L and g = M_sigma orthogonal.

    Exact when the loop's band b satisfies b <= Q: the image of the standard
    Lagrangian agrees with it above frequency Q, and its part in the window is
    the range of P_W g restricted to L_{<= Q + b}.
    """
    b = sigma.band
    if b > basis.Q:
        raise BandTooWideError(f"band {b} exceeds cutoff {basis.Q}")
    big = ModeBasis(basis.n, basis.Q + b)
    lbig = standard_lagrangian(big, L_finite)
    g = multiplication_operator(big, sigma).matrix
    w = big.window_indices(basis)
    img = (g @ lbig.columns)[w, :]
    u, s, _ = np.linalg.svd(img, full_matrices=False)
    m = basis.dim // 2
    if s[m - 1] < rank_tol or (len(s) > m and s[m] > rank_tol):
        raise NotLagrangianError(
            f"window image has unexpected rank (s[m-1]={s[m - 1]:.2e}, s[m]={s[m] if len(s) > m else 0:.2e})"
        )
    return LagrangianFrame(basis, u[:, :m])


def fiber_structure(basis: ModeBasis, q: int, L_finite=None) -> np.ndarray:
    """Block of J at frequency q: i for q > 0, -i for q < 0, i(2P_f - 1) at q = 0."""
    n = basis.n
    if q > 0:
        return 1j * np.eye(n)
    if q < 0:
        return -1j * np.eye(n)
    lf = default_finite_lagrangian(n) if L_finite is None else np.asarray(L_finite, dtype=complex)
    qf, _ = np.linalg.qr(lf)
    return 1j * (2.0 * qf @ qf.conj().T - np.eye(n))


def commutator_block_norm(basis: ModeBasis, sigma: FourierLoop, L_finite=None) -> float:
    """||[J, M_sigma]||_2 on the window from blocks J_p sigma_{p-r} - sigma_{p-r} J_r."""
    total = 0.0
    js = {q: fiber_structure(basis, q, L_finite) for q in basis.freqs}
    for p in basis.freqs:
        for r in basis.freqs:
            c = sigma.coeffs.get(int(p - r))
            if c is None:
                continue
            total += float(np.sum(np.abs(js[p] @ c - c @ js[r]) ** 2))
    return float(np.sqrt(total))


def aligned_frame(basis: ModeBasis, columns: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Orthonormal frame of span(columns) closest to the reference frame."""
    u = columns.conj().T @ reference
    return columns @ polar_unitary(u)
