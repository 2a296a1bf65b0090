"""Quaternions and the explicit geometry of S^4, HP^1 and the suspension loops.

Quaternions are stored as (a, b, c, d) = a + b i + c j + d k.  Points of
S^4 are pairs (z, y) in H + R.  Loops are sampled on uniform power-of-two
grids s_k = 2 pi k / N of [0, 2 pi).

Arrays of quaternions use a trailing axis of length 4; the helpers
``qmul``, ``qconj`` and ``qnorm`` act on such arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    ChartHoleError,
    NonUnitError,
    PoleError,
    SampleCountError,
    ZeroQuaternionError,
)

_POLE_TOL = 1e-14
_UNIT_TOL = 1e-10
_S4_TOL = 1e-12


# -- array kernels -----------------------------------------------------------

def qmul(p, q):
    """Hamilton product of quaternion arrays with trailing axis 4."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm(q):
    return np.linalg.norm(np.asarray(q, dtype=float), axis=-1)


# -- value types ---------------------------------------------------------------

@dataclass(frozen=True)
class Quaternion:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        a, b, c, d = (float(t) for t in np.asarray(arr, dtype=float).reshape(4))
        return cls(a, b, c, d)

    @classmethod
    def from_complex_pair(cls, z1: complex, z2: complex) -> "Quaternion":
        # q = z1 + z2 j with z1 = a + b i, z2 = c + d i
        return cls(z1.real, z1.imag, z2.real, z2.imag)

    def to_complex_pair(self) -> tuple[complex, complex]:
        return complex(self.a, self.b), complex(self.c, self.d)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def conj(self) -> "Quaternion":
        return Quaternion(self.a, -self.b, -self.c, -self.d)

    def norm(self) -> float:
        return float(np.sqrt(self.a**2 + self.b**2 + self.c**2 + self.d**2))

    def norm2(self) -> float:
        return self.a**2 + self.b**2 + self.c**2 + self.d**2

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise ZeroQuaternionError("zero quaternion has no inverse")
        return self.conj() * (1.0 / n2)

    def __add__(self, other):
        other = _coerce(other)
        return Quaternion(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)

    __radd__ = __add__

    def __neg__(self):
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        if np.isscalar(other):
            s = float(other)
            return Quaternion(self.a * s, self.b * s, self.c * s, self.d * s)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / float(other))
        return NotImplemented

    def isclose(self, other, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.as_array() - _coerce(other).as_array())) <= tol)


def _coerce(x) -> Quaternion:
    if isinstance(x, Quaternion):
        return x
    if np.isscalar(x):
        return Quaternion(float(x))
    return Quaternion.from_array(x)


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def quat_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul(p.as_array(), q.as_array()))


@dataclass(frozen=True)
class S4Point:
    z: Quaternion
    y: float

    def __post_init__(self):
        r = self.z.norm2() + self.y**2
        if abs(r - 1.0) > _S4_TOL * 10:
            raise ValueError(f"not on S^4: |z|^2 + y^2 = {r!r}")

    def as_array(self) -> np.ndarray:
        return np.append(self.z.as_array(), self.y)

    @classmethod
    def from_array(cls, arr) -> "S4Point":
        arr = np.asarray(arr, dtype=float)
        return cls(Quaternion.from_array(arr[:4]), float(arr[4]))


NORTH = S4Point(Quaternion(), 1.0)
SOUTH = S4Point(Quaternion(), -1.0)


@dataclass(frozen=True)
class HP1Point:
    """Point [q0, q1] of HP^1 modulo right scaling, stored normalized.

    Normal form: unit norm in H^2 and the first coordinate that is not
    (numerically) zero is real and positive.
    """

    q0: Quaternion
    q1: Quaternion

    @classmethod
    def from_pair(cls, q0, q1, tol: float = 1e-12) -> "HP1Point":
        v = np.stack([_coerce(q0).as_array(), _coerce(q1).as_array()])
        return cls.from_array(v, tol)

    @classmethod
    def from_array(cls, v, tol: float = 1e-12) -> "HP1Point":
        v = np.asarray(v, dtype=float).reshape(2, 4)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            raise ZeroQuaternionError("[0, 0] is not a point of HP^1")
        v = v / nv
        lead = 0 if np.linalg.norm(v[0]) > tol else 1
        w = qconj(v[lead]) / np.linalg.norm(v[lead])
        v = qmul(v, w)
        v[lead, 1:] = 0.0
        return cls(Quaternion.from_array(v[0]), Quaternion.from_array(v[1]))

    def as_array(self) -> np.ndarray:
        return np.stack([self.q0.as_array(), self.q1.as_array()])

    def isclose(self, other: "HP1Point", tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.as_array() - other.as_array())) <= tol)


@dataclass(frozen=True)
class SampledLoop:
    """Loop sampled at s_k = 2 pi k / N, values of shape (N, *target_shape)."""

    values: np.ndarray
    kind: str = "R^d"
    fourier: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        check_sample_count(len(self.values))

    @property
    def samples(self) -> int:
        return len(self.values)

    @property
    def params(self) -> np.ndarray:
        return loop_params(self.samples)

    @property
    def target_shape(self) -> tuple:
        return tuple(np.shape(self.values)[1:])


def check_sample_count(n: int) -> None:
    if n < 8 or n & (n - 1):
        raise SampleCountError(f"sample count must be a power of two >= 8, got {n}")


def loop_params(samples: int) -> np.ndarray:
    check_sample_count(samples)
    return 2.0 * np.pi * np.arange(samples) / samples


# -- charts ---------------------------------------------------------------------

def stereo_north(p: S4Point) -> Quaternion:
    if 1.0 - p.y <= _POLE_TOL:
        raise PoleError("the north chart excludes N = (0, 1)")
    return p.z / (1.0 - p.y)


def stereo_south(p: S4Point) -> Quaternion:
    if 1.0 + p.y <= _POLE_TOL:
        raise PoleError("the south chart excludes S = (0, -1)")
    return p.z.conj() / (1.0 + p.y)


def stereo_north_inv(w: Quaternion) -> S4Point:
    n2 = w.norm2()
    return S4Point(w * (2.0 / (1.0 + n2)), (n2 - 1.0) / (n2 + 1.0))


def stereo_south_inv(w: Quaternion) -> S4Point:
    n2 = w.norm2()
    return S4Point(w.conj() * (2.0 / (1.0 + n2)), (1.0 - n2) / (1.0 + n2))


def theta_s4_to_hp1(p: S4Point) -> HP1Point:
    # use whichever chart keeps the representative farthest from zero
    if p.y <= 0.0:
        return HP1Point.from_pair(Quaternion(1.0 - p.y), p.z)
    return HP1Point.from_pair(p.z.conj(), Quaternion(1.0 + p.y))


def theta_tilde_north(zy: np.ndarray) -> np.ndarray:
    """Lift S^4 minus N into S^7: (z, y) -> (1 - y, z) / norm.  Shape (..., 5) -> (..., 2, 4)."""
    zy = np.asarray(zy, dtype=float)
    z, y = zy[..., :4], zy[..., 4]
    if np.any(1.0 - y <= _POLE_TOL):
        raise ChartHoleError("loop meets the north pole")
    first = np.zeros_like(z)
    first[..., 0] = 1.0 - y
    out = np.stack([first, z], axis=-2)
    return out / np.sqrt((1.0 - y) ** 2 + np.sum(z * z, axis=-1))[..., None, None]


def theta_tilde_south(zy: np.ndarray) -> np.ndarray:
    """Lift S^4 minus S into S^7: (z, y) -> (conj z, 1 + y) / norm."""
    zy = np.asarray(zy, dtype=float)
    z, y = zy[..., :4], zy[..., 4]
    if np.any(1.0 + y <= _POLE_TOL):
        raise ChartHoleError("loop meets the south pole")
    second = np.zeros_like(z)
    second[..., 0] = 1.0 + y
    out = np.stack([qconj(z), second], axis=-2)
    return out / np.sqrt((1.0 + y) ** 2 + np.sum(z * z, axis=-1))[..., None, None]


def hp1_project(pair: np.ndarray) -> HP1Point:
    return HP1Point.from_array(pair)


# -- suspension loops ---------------------------------------------------------

def _unit(x, what: str = "x") -> np.ndarray:
    xa = _coerce(x).as_array()
    if abs(np.linalg.norm(xa) - 1.0) > _UNIT_TOL:
        raise NonUnitError(f"{what} must be a unit quaternion (norm {np.linalg.norm(xa)!r})")
    return xa


def beta_values(x, s) -> np.ndarray:
    """beta_x(s) in H + R for a unit quaternion x; s scalar or array."""
    xa = _unit(x)
    s = np.asarray(s, dtype=float)
    one = np.array([1.0, 0.0, 0.0, 0.0])
    plus = (one + xa) / 2.0
    minus = (one - xa) / 2.0
    z = plus + np.cos(s)[..., None] * minus
    y = np.sin(s) * np.linalg.norm(minus)
    return np.concatenate([z, y[..., None]], axis=-1)


def beta_loop(x, samples: int) -> SampledLoop:
    return SampledLoop(beta_values(x, loop_params(samples)), kind="S4")


def rotate_r_s4_array(zy: np.ndarray) -> np.ndarray:
    """Quarter turn of the (i, R) plane: (i, 0) -> (0, 1) -> (-i, 0)."""
    zy = np.array(zy, dtype=float, copy=True)
    b = zy[..., 1].copy()
    zy[..., 1] = -zy[..., 4]
    zy[..., 4] = b
    return zy


def rotate_r_s4(p: S4Point) -> S4Point:
    return S4Point.from_array(rotate_r_s4_array(p.as_array()))


def rotated_beta_values(x, s) -> np.ndarray:
    return rotate_r_s4_array(beta_values(x, s))


def eta_section(x, side: Literal["+i", "-i"], samples: int) -> SampledLoop:
    """Frame-bundle section over the chart of `side`, as an S^7 valued loop (N, 2, 4)."""
    xa = _unit(x)
    vals = rotated_beta_values(xa, loop_params(samples))
    if side in ("+i", "i", 1, "+1"):
        if np.allclose(xa, I.as_array(), atol=1e-12):
            raise ChartHoleError("eta_{+i} is undefined at x = i")
        out = theta_tilde_north(vals)
    elif side in ("-i", -1, "-1"):
        if np.allclose(xa, -I.as_array(), atol=1e-12):
            raise ChartHoleError("eta_{-i} is undefined at x = -i")
        out = theta_tilde_south(vals)
    else:
        raise ValueError(f"side must be '+i' or '-i', got {side!r}")
    return SampledLoop(out, kind="S7")


def transition_values(x, s, on_sphere_tol: float = 1e-12) -> np.ndarray:
    """r(x)(s) = rho(pi_H(R(beta_x(s)))) as unit quaternions."""
    xa = _unit(x)
    v = rotated_beta_values(xa, s)[..., :4]
    n = qnorm(v)
    if abs(xa[1]) <= on_sphere_tol:
        # on the S^2 = {pi_i = 0} the projected loop is already unit
        return v
    if np.any(n <= 1e-14):
        raise ZeroQuaternionError("pi_H(R(beta_x(s))) vanishes at a sample")
    return v / n[..., None]


def transition_loop_r(x, samples: int) -> SampledLoop:
    return SampledLoop(transition_values(x, loop_params(samples)), kind="S3")


def eta_relation_residual(x, samples: int) -> float:
    """max |eta_{+i} - r * eta_{-i}| over samples (left multiplication)."""
    ep = eta_section(x, "+i", samples).values
    em = eta_section(x, "-i", samples).values
    r = transition_loop_r(x, samples).values
    return float(np.max(np.abs(ep - qmul(r[:, None, :], em))))


# -- SO(4) -------------------------------------------------------------------

def so4_of_quat_array(u: np.ndarray) -> np.ndarray:
    """Left-multiplication matrices of quaternion array u (..., 4) -> (..., 4, 4); no unit check."""
    u = np.asarray(u, dtype=float)
    a, b, c, d = np.moveaxis(u, -1, 0)
    rows = [
        [a, -b, -c, -d],
        [b, a, -d, c],
        [c, d, a, -b],
        [d, -c, b, a],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def so4_of_quat(u) -> np.ndarray:
    """4x4 real orthogonal matrix of left multiplication by the unit quaternion u."""
    return so4_of_quat_array(_unit(u, "u"))


# -- Fourier ------------------------------------------------------------------

@dataclass(frozen=True)
class FourierCoefficients:
    """Coefficients c_k with v(s) = sum_k c_k e^{i k s}; freqs are integers."""

    freqs: np.ndarray
    coeffs: np.ndarray

    def as_dict(self, tol: float = 0.0) -> dict[int, np.ndarray]:
        return {
            int(k): c
            for k, c in zip(self.freqs, self.coeffs)
            if np.max(np.abs(c), initial=0.0) > tol
        }

    def band(self, tol: float = 1e-12) -> int:
        nz = [abs(int(k)) for k, c in zip(self.freqs, self.coeffs) if np.max(np.abs(c)) > tol]
        return max(nz, default=0)

    def evaluate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        phase = np.exp(1j * np.multiply.outer(s, self.freqs))
        return np.tensordot(phase, self.coeffs, axes=(-1, 0))


def fourier_of_loop(loop: SampledLoop | np.ndarray) -> FourierCoefficients:
    values = loop.values if isinstance(loop, SampledLoop) else np.asarray(loop)
    n = len(values)
    check_sample_count(n)
    coeffs = np.fft.fft(values, axis=0) / n
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    order = np.argsort(freqs, kind="stable")
    return FourierCoefficients(freqs[order], coeffs[order])


def loop_from_fourier(fc: FourierCoefficients, samples: int) -> np.ndarray:
    return fc.evaluate(loop_params(samples))
