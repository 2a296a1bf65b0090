"""U(1)-torsors, alternating Cech cochains on finite covers, and the suspension chase.

U(1)-valued data is stored as an angle: a float for constant phases, or an
array of continuously unwrapped angles for a function sampled on a grid.
Products of phases are sums of angles, so coboundaries never cross a branch
cut and winding numbers can be read off directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Iterable

import numpy as np

from .errors import (
    GridMismatchError,
    InverseConventionError,
    NerveIncompleteError,
    RefineError,
    SupportShapeError,
    TagMismatchError,
)

_UNIT_TOL = 1e-10


# -- torsors -------------------------------------------------------------------

def dual_tag(tag):
    """Tag of the dual torsor; the dual of a dual is the original torsor."""
    if isinstance(tag, tuple) and len(tag) == 2 and tag[0] == "dual":
        return tag[1]
    return ("dual", tag)


@dataclass(frozen=True)
class PhaseElement:
    """Element of a U(1)-torsor, written as a unit complex number (or sampled function).

    ``tag`` names the torsor.  Values are only meaningful relative to other
    elements of the same torsor, through ``torsor_pair``.
    """

    value: complex | np.ndarray
    tag: Hashable

    def __post_init__(self):
        v = np.asarray(self.value, dtype=complex)
        if np.any(np.abs(np.abs(v) - 1.0) > _UNIT_TOL):
            raise ValueError("torsor elements must have unit modulus")
        object.__setattr__(self, "value", complex(v) if v.ndim == 0 else v)

    def act(self, z) -> "PhaseElement":
        """z . t for z in U(1)."""
        return PhaseElement(z * self.value, self.tag)


def _same_tag(t: PhaseElement, s: PhaseElement) -> None:
    if t.tag != s.tag:
        raise TagMismatchError(f"torsor tags differ: {t.tag!r} vs {s.tag!r}")


def torsor_pair(t: PhaseElement, s: PhaseElement):
    """The unique z with t = z s."""
    _same_tag(t, s)
    return t.value / s.value


def torsor_tensor(t: PhaseElement, s: PhaseElement) -> PhaseElement:
    return PhaseElement(t.value * s.value, ("tensor", t.tag, s.tag))


def torsor_dual(t: PhaseElement) -> PhaseElement:
    """t* in T*, with (z t)* = conj(z) t*."""
    return PhaseElement(np.conj(t.value), dual_tag(t.tag))


def dual_pairing(s_star: PhaseElement, t: PhaseElement):
    """s* (x) t -> z with t = z s."""
    if s_star.tag != dual_tag(t.tag):
        raise TagMismatchError(f"{s_star.tag!r} is not dual to {t.tag!r}")
    return t.value * s_star.value


def rep_tensor_torsor(w, t: PhaseElement, w2, u: PhaseElement) -> complex:
    """<w (x) t, w2 (x) u> = <w, w2> <t, u> in the tensor of a Fock space with a torsor."""
    _same_tag(t, u)
    if w.basis is not w2.basis:
        raise TagMismatchError("vectors live in different Fock spaces")
    return w.inner(w2) * t.value * np.conj(u.value)


def transfer_scalar(w, t: PhaseElement, z):
    """(z w) (x) t  ~  w (x) (z t): move a unit scalar across the tensor."""
    return w * (1.0 / z), t.act(z)


# -- covers ----------------------------------------------------------------------

def _key(simplex: Iterable) -> frozenset:
    return frozenset(simplex)


class IndexedCover:
    """Index set, nerve of nonempty intersections, and per-index sample supports.

    ``grid`` is the number of samples of a global parameter (a circle), or
    None for covers that only carry constant data.  ``supports[label]`` is a
    sorted array of grid indices covered by that set, or None for the whole grid.
    """

    def __init__(self, labels, nerve, supports=None, grid: int | None = None,
                 closed: bool = True):
        self.labels = tuple(labels)
        self._order = {l: i for i, l in enumerate(self.labels)}
        self.nerve = frozenset(_key(s) for s in nerve) | frozenset(_key([l]) for l in self.labels)
        self.grid = grid
        sup = dict(supports or {})
        self.supports = {
            l: (None if sup.get(l) is None else np.unique(np.asarray(sup[l], dtype=np.int64)))
            for l in self.labels
        }
        if closed:
            self.close()

    def close(self) -> None:
        """Add every face of every simplex, making the nerve closed under subtuples."""
        faces = set(self.nerve)
        for s in self.nerve:
            for k in range(1, len(s)):
                faces.update(frozenset(c) for c in combinations(s, k))
        self.nerve = frozenset(faces)

    def sort(self, simplex) -> tuple:
        return tuple(sorted(simplex, key=self._order.__getitem__))

    def simplices(self, p: int) -> list[tuple]:
        return sorted((self.sort(s) for s in self.nerve if len(s) == p + 1),
                      key=lambda t: [self._order[x] for x in t])

    def contains(self, simplex) -> bool:
        return _key(simplex) in self.nerve

    def simplex_grid(self, simplex) -> np.ndarray | None:
        """Grid indices of the intersection; None means the whole grid."""
        out = None
        for l in simplex:
            s = self.supports[l]
            if s is None:
                continue
            out = s if out is None else np.intersect1d(out, s)
        return out

    def grid_points(self, simplex) -> np.ndarray:
        g = self.simplex_grid(simplex)
        if g is None:
            if self.grid is None:
                return np.zeros(0, dtype=np.int64)
            return np.arange(self.grid)
        return g

    def restrict(self, data, source, target):
        """Restrict sampled data on ``source`` to the smaller set ``target``."""
        if np.ndim(data) == 0:
            return data
        src = self.grid_points(source)
        tgt = self.grid_points(target)
        if len(data) != len(src):
            raise GridMismatchError(f"data of length {len(data)} on a grid of {len(src)} points")
        pos = np.searchsorted(src, tgt)
        if np.any(pos >= len(src)) or np.any(src[np.minimum(pos, len(src) - 1)] != tgt):
            raise GridMismatchError("target grid is not contained in the source grid")
        return np.asarray(data)[pos]

    def subcover(self, exclude: Iterable) -> "IndexedCover":
        """Same index set, dropping simplices that meet the excluded labels."""
        ex = set(exclude)
        nerve = [s for s in self.nerve if not (s & ex)]
        return IndexedCover(self.labels, nerve, self.supports, self.grid, closed=False)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "nerve": [list(s) for s in sorted((self.sort(s) for s in self.nerve),
                                              key=lambda t: (len(t), [self._order[x] for x in t]))],
            "supports": [[l, None if s is None else s.tolist()] for l, s in self.supports.items()],
            "grid": self.grid,
        }

    @classmethod
    def from_json(cls, d: dict) -> "IndexedCover":
        return cls(d["labels"], d["nerve"], {l: s for l, s in d.get("supports", [])},
                   d.get("grid"), closed=False)


def circle_cover(k: int, samples: int, overlap: float = 0.25) -> IndexedCover:
    """k equal arcs around the circle, widened by ``overlap`` (in units of an arc) on each side.

    The nerve is read off the sample supports, so wide arcs produce triple overlaps.
    """
    if k < 3:
        raise ValueError("a cover of the circle by arcs needs at least three arcs")
    t = np.arange(samples) / samples
    supports = {}
    for i in range(k):
        centre = (i + 0.5) / k
        half = (0.5 + overlap) / k
        d = np.abs(((t - centre + 0.5) % 1.0) - 0.5)
        supports[i] = np.nonzero(d < half)[0]
    nerve = []
    for size in range(2, k + 1):
        for s in combinations(range(k), size):
            common = supports[s[0]]
            for j in s[1:]:
                common = np.intersect1d(common, supports[j])
            if len(common):
                nerve.append(s)
    return IndexedCover(range(k), nerve, supports, samples)


def two_cap_cover(samples: int, north="N", south="S") -> IndexedCover:
    """Two caps of S^2 meeting in a band around the equator; data on the overlap is a loop."""
    return IndexedCover((north, south), [(north, south)], {north: None, south: None}, samples)


# -- cochains ------------------------------------------------------------------

def _perm_sign(perm: list[int]) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def angles_of(values) -> float | np.ndarray:
    """Continuously unwrapped argument of a unit complex scalar or sampled loop."""
    v = np.asarray(values, dtype=complex)
    if v.ndim == 0:
        return float(np.angle(v))
    return np.unwrap(np.angle(v))


@dataclass
class CechCochain:
    """Alternating U(1)-valued p-cochain; entries keyed by sorted simplices, stored as angles."""

    cover: IndexedCover
    degree: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for s, a in self.entries.items():
            st = tuple(s)
            if len(st) != self.degree + 1 or len(set(st)) != len(st):
                raise ValueError(f"{st} is not an injective {self.degree + 1}-tuple")
            if not self.cover.contains(st):
                raise NerveIncompleteError(f"{st} is not in the nerve")
            srt = self.cover.sort(st)
            sgn = _perm_sign([srt.index(x) for x in st])
            a = a if np.ndim(a) == 0 else np.asarray(a, dtype=float)
            clean[srt] = sgn * a
        self.entries = clean

    @classmethod
    def from_values(cls, cover: IndexedCover, degree: int, values: dict) -> "CechCochain":
        return cls(cover, degree, {s: angles_of(v) for s, v in values.items()})

    def angle(self, simplex):
        """Angle on an ordered tuple; alternation gives the sign, repeats give 0."""
        st = tuple(simplex)
        if len(set(st)) != len(st):
            return 0.0
        srt = self.cover.sort(st)
        a = self.entries.get(srt, 0.0)
        return _perm_sign([srt.index(x) for x in st]) * a

    def value(self, simplex):
        return np.exp(1j * np.asarray(self.angle(simplex)))

    def max_defect(self) -> float:
        """max |c - 1| over all entries."""
        return max((float(np.max(np.abs(np.exp(1j * np.asarray(a)) - 1.0), initial=0.0))
                    for a in self.entries.values()), default=0.0)

    def is_trivial(self, tol: float = 1e-10) -> bool:
        return self.max_defect() <= tol

    def distance(self, other: "CechCochain") -> float:
        """max |c1 / c2 - 1| over the union of simplices."""
        keys = set(self.entries) | set(other.entries)
        d = 0.0
        for s in keys:
            diff = np.asarray(self.angle(s)) - np.asarray(other.angle(s))
            d = max(d, float(np.max(np.abs(np.exp(1j * diff) - 1.0), initial=0.0)))
        return d

    def __mul__(self, other: "CechCochain") -> "CechCochain":
        keys = set(self.entries) | set(other.entries)
        return CechCochain(self.cover, self.degree,
                           {s: self.angle(s) + other.angle(s) for s in keys})

    def inverse(self) -> "CechCochain":
        return CechCochain(self.cover, self.degree, {s: -a for s, a in self.entries.items()})

    def to_json(self) -> dict:
        entries = []
        for s in self.cover.simplices(self.degree):
            if s not in self.entries:
                continue
            a = self.entries[s]
            if np.ndim(a) == 0:
                entries.append({"tuple": list(s), "kind": "const", "data": float(a)})
            else:
                entries.append({"tuple": list(s), "kind": "circle", "data": np.asarray(a).tolist()})
        return {"cover": self.cover.to_json(), "degree": self.degree, "entries": entries}

    @classmethod
    def from_json(cls, d: dict) -> "CechCochain":
        cover = IndexedCover.from_json(d["cover"])
        entries = {}
        for e in d["entries"]:
            data = e["data"]
            entries[tuple(e["tuple"])] = float(data) if e["kind"] == "const" else np.asarray(data, float)
        return cls(cover, int(d["degree"]), entries)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def cech_coboundary(c: CechCochain) -> CechCochain:
    """(delta c)(i_0..i_{p+1}) = prod_k c(i_0..^i_k..i_{p+1})^{(-1)^k}, restricted to the simplex."""
    cover = c.cover
    out = {}
    for s in cover.simplices(c.degree + 1):
        total = 0.0
        for k in range(len(s)):
            face = s[:k] + s[k + 1:]
            if not cover.contains(face):
                raise NerveIncompleteError(f"face {face} of {s} is missing from the nerve")
            a = c.angle(face)
            total = total + (-1) ** k * cover.restrict(a, face, s)
        out[s] = total
    return CechCochain(cover, c.degree + 1, out)


def random_cochain(cover: IndexedCover, degree: int, rng: np.random.Generator,
                   band: int = 2) -> CechCochain:
    """Random smooth cochain: sampled band-limited phases on circle grids, constants otherwise."""
    entries = {}
    for s in cover.simplices(degree):
        pts = cover.grid_points(s)
        if cover.grid is None or len(pts) == 0:
            entries[s] = float(rng.uniform(-np.pi, np.pi))
            continue
        t = 2 * np.pi * pts / cover.grid
        a = rng.uniform(-np.pi, np.pi) + sum(
            rng.normal() * np.cos(k * t) + rng.normal() * np.sin(k * t) for k in range(1, band + 1)
        )
        entries[s] = np.asarray(a, dtype=float)
    return CechCochain(cover, degree, entries)


# -- Dixmier-Douady cocycle ---------------------------------------------------------

def restrict_phase(cover: IndexedCover, elem: PhaseElement, source, target) -> PhaseElement:
    if np.ndim(elem.value) == 0:
        return elem
    return PhaseElement(cover.restrict(elem.value, source, target), elem.tag)


def dd_cocycle(cover: IndexedCover, sections: dict, mult: Callable, unit: Callable,
               tol: float = 1e-9) -> CechCochain:
    """g_ijk with m(sigma_ij (x) sigma_jk) = g_ijk sigma_ik on U_ijk.

    ``sections[(i, j)]`` is a PhaseElement (sampled on U_ij) for every ordered
    pair of the nerve; ``mult`` is the gerbe multiplication and
    ``unit(i, points)`` the identity section of the fibre over (s_i, s_i).
    """
    for s in cover.simplices(1):
        i, j = s
        for a, b in ((i, j), (j, i)):
            if (a, b) not in sections:
                raise NerveIncompleteError(f"no section over {(a, b)}")
        prod = mult(sections[(i, j)], sections[(j, i)])
        e = unit(i, cover.grid_points(s))
        defect = np.max(np.abs(np.asarray(torsor_pair(prod, e)) - 1.0))
        if defect > tol:
            raise InverseConventionError(f"sigma_ji sigma_ij differs from the identity on {s} by {defect:.2e}")
    out = {}
    for s in cover.simplices(2):
        i, j, k = s
        sij = restrict_phase(cover, sections[(i, j)], (i, j), s)
        sjk = restrict_phase(cover, sections[(j, k)], (j, k), s)
        sik = restrict_phase(cover, sections[(i, k)], (i, k), s)
        out[s] = angles_of(torsor_pair(mult(sij, sjk), sik))
    return CechCochain(cover, 2, out)


def contraction_mult(a: PhaseElement, b: PhaseElement) -> PhaseElement:
    """Multiplication of delta(R): (x (x) y*) (x) (y (x) z*) -> x (x) z*."""
    ta, tb = a.tag, b.tag
    if not (isinstance(ta, tuple) and ta[0] == "tensor" and isinstance(tb, tuple) and tb[0] == "tensor"):
        raise TagMismatchError("expected tensor-product torsor elements")
    if ta[2] != dual_tag(tb[1]):
        raise TagMismatchError(f"cannot contract {ta[2]!r} with {tb[1]!r}")
    return PhaseElement(a.value * b.value, ("tensor", ta[1], tb[2]))


def trivial_gerbe_sections(cover: IndexedCover, eta: dict) -> dict:
    """sigma_ij = eta_i (x) eta_j* for local sections eta_i of R (PhaseElements on U_i)."""
    out = {}
    for s in cover.simplices(1):
        for i, j in (s, s[::-1]):
            ei = restrict_phase(cover, eta[i], (i,), s)
            ej = restrict_phase(cover, eta[j], (j,), s)
            if ei.tag != ("R", i) or ej.tag != ("R", j):
                raise TagMismatchError("eta_i must live in the torsor tagged ('R', i)")
            out[(i, j)] = torsor_tensor(ei, torsor_dual(ej))
    return out


def trivial_gerbe_unit(i, points) -> PhaseElement:
    v = np.ones(len(points), dtype=complex) if len(points) else 1.0 + 0j
    return PhaseElement(v, ("tensor", ("R", i), ("dual", ("R", i))))


def rescale_sections(cover: IndexedCover, sections: dict, h: CechCochain) -> dict:
    """sigma_ij -> h_ij sigma_ij, keeping sigma_ji = sigma_ij^{-1}."""
    out = {}
    for (i, j), s in sections.items():
        out[(i, j)] = s.act(np.exp(1j * np.asarray(h.angle((i, j)))))
    return out


def delta_bundle_cochain(g: np.ndarray) -> np.ndarray:
    """delta(g)(y_1..y_p) = prod_i g(y_1..^y_i..y_p)^{(-1)^{i-1}} on an aligned sample grid.

    ``g`` holds unit complex values of shape (m,)*(p-1); the result has shape (m,)*p.
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim == 0:
        raise GridMismatchError("need at least one fibre-product factor")
    if len(set(g.shape)) != 1:
        raise GridMismatchError(f"fibre-product grids are not aligned: {g.shape}")
    m = g.shape[0]
    p = g.ndim + 1
    out = np.ones((m,) * p, dtype=complex)
    for i in range(p):
        term = np.expand_dims(g, i)
        out = out * (term if i % 2 == 0 else np.conj(term))
    return out


# -- suspension --------------------------------------------------------------------

# String labels so that integer-labelled covers of X never collide with the caps.
CAP_MINUS = "-1"
CAP_PLUS = "+1"


def build_suspension_cover(U: IndexedCover) -> IndexedCover:
    """Cover of the suspension: caps -1, +1 and the extruded sets of U.

    A tuple is in the nerve when its part in U is in U's nerve (or empty) and it
    does not contain both caps.  Sample supports are those of the U-part; the
    sampled coordinate is the one along X.
    """
    if CAP_MINUS in U.labels or CAP_PLUS in U.labels:
        raise ValueError(f"cover labels must avoid the cap labels {CAP_MINUS!r} and {CAP_PLUS!r}")
    labels = (CAP_MINUS, CAP_PLUS) + U.labels
    nerve = []
    for s in U.nerve:
        nerve.append(tuple(s))
        nerve.append((CAP_MINUS,) + tuple(s))
        nerve.append((CAP_PLUS,) + tuple(s))
    nerve += [(CAP_MINUS,), (CAP_PLUS,)]
    supports = dict(U.supports)
    supports[CAP_MINUS] = None
    supports[CAP_PLUS] = None
    return IndexedCover(labels, nerve, supports, U.grid, closed=False)


def cone_cover(S: IndexedCover, cap) -> IndexedCover:
    """Pullback of the suspension cover to the cone containing ``cap``; the other cap is empty there."""
    other = CAP_PLUS if cap == CAP_MINUS else CAP_MINUS
    return S.subcover([other])


def equator_cover(S: IndexedCover) -> IndexedCover:
    """Restriction to X: the caps become empty sets."""
    return S.subcover([CAP_MINUS, CAP_PLUS])


def suspension_forward(h: CechCochain, S: IndexedCover | None = None,
                       tol: float = 1e-9) -> CechCochain:
    """Connecting map: lift h to w_{-1} (w_{-1,ij} = h_ij, w_{-1,-1j} = 1), take delta.

    The result is the unique 2-cochain on the suspension cover whose pullback
    to the lower cone is delta(w_{-1}) and to the upper cone is trivial.
    """
    if h.degree != 1:
        raise ValueError("the chase starts from a 1-cochain")
    dh = cech_coboundary(h)
    if not dh.is_trivial(tol):
        raise ValueError(f"h is not a cocycle (|delta h - 1| = {dh.max_defect():.2e})")
    S = S or build_suspension_cover(h.cover)
    lower = cone_cover(S, CAP_MINUS)
    w = CechCochain(lower, 1, {s: h.angle(s) for s in h.entries})
    dw = cech_coboundary(w)
    return CechCochain(S, 2, dict(dw.entries))


def suspension_partial_inverse(g: CechCochain, U: IndexedCover | None = None,
                               tol: float = 1e-9) -> CechCochain:
    """Recover h_ij = g_{-1ij} from a 2-cocycle concentrated on (-1, i, j) tuples."""
    if g.degree != 2:
        raise ValueError("expected a 2-cochain on the suspension cover")
    S = g.cover
    labels = tuple(l for l in S.labels if l not in (CAP_MINUS, CAP_PLUS))
    if U is None:
        X = equator_cover(S)
        nerve = [s for s in X.nerve if not s & {CAP_MINUS, CAP_PLUS}]
        U = IndexedCover(labels, nerve, {l: S.supports[l] for l in labels},
                         S.grid, closed=False)
    out = {}
    for s, a in g.entries.items():
        if s[0] == CAP_MINUS and CAP_PLUS not in s:
            out[s[1:]] = a
            continue
        defect = float(np.max(np.abs(np.exp(1j * np.asarray(a)) - 1.0), initial=0.0))
        if defect > tol:
            raise SupportShapeError(f"cochain is nontrivial on {s}, outside the (-1, i, j) tuples")
    return CechCochain(U, 1, out)


# -- winding numbers -----------------------------------------------------------------

def phase_steps(values) -> np.ndarray:
    """Wrapped phase increments between consecutive samples, closing the loop."""
    v = np.asarray(values, dtype=complex)
    return np.angle(np.roll(v, -1) / v)


def winding_degree(values, max_step: float = np.pi / 2) -> int:
    """Degree of a sampled loop in U(1); refuses grids too coarse to resolve it."""
    steps = phase_steps(values)
    worst = float(np.max(np.abs(steps), initial=0.0))
    if worst > max_step:
        raise RefineError(worst)
    return int(np.rint(np.sum(steps) / (2 * np.pi)))


def unwrapped_phase(values) -> np.ndarray:
    return np.unwrap(np.angle(np.asarray(values, dtype=complex)))
