import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockgerbe import fock, modes
from fockgerbe import torsorcech as tc
from fockgerbe.errors import (
    GridMismatchError,
    InverseConventionError,
    NerveIncompleteError,
    RefineError,
    SupportShapeError,
    TagMismatchError,
)

seeds = st.integers(0, 2**31 - 1)
angles = st.floats(-10, 10, allow_nan=False)


def _cover(kind):
    return {
        "circle4": lambda: tc.circle_cover(4, 64),
        "circle3wide": lambda: tc.circle_cover(3, 64, 0.6),
        "circle5": lambda: tc.circle_cover(5, 128, 0.3),
        "twocap": lambda: tc.two_cap_cover(64),
    }[kind]()


covers = st.sampled_from(["circle4", "circle3wide", "circle5", "twocap"])


# -- torsors -------------------------------------------------------------------

@given(angles, angles)
def test_torsor_action_and_pairing(a, b):
    t = tc.PhaseElement(np.exp(1j * a), "T")
    z = np.exp(1j * b)
    assert abs(tc.torsor_pair(t.act(z), t) - z) <= 1e-12
    assert abs(tc.dual_pairing(tc.torsor_dual(t), t) - 1) <= 1e-12


def test_torsor_tags_checked():
    t = tc.PhaseElement(1.0 + 0j, "T")
    s = tc.PhaseElement(1.0 + 0j, "S")
    with pytest.raises(TagMismatchError):
        tc.torsor_pair(t, s)
    with pytest.raises(ValueError):
        tc.PhaseElement(2.0 + 0j, "T")


@given(angles, angles, angles)
def test_tensor_torsor_of_representations(a, b, c):
    # <w, w2> t conj(u) is sesquilinear-equivariant in the pair (t, u)
    t = tc.PhaseElement(np.exp(1j * a), "T")
    u = tc.PhaseElement(np.exp(1j * b), "T")
    basis = fock.FockBasis(modes.standard_lagrangian(modes.ModeBasis(2, 0)))
    w, w2 = fock.FockVector(basis, [1.0, 2j]), fock.FockVector(basis, [0.5, -1j])
    z = np.exp(1j * c)
    base = tc.rep_tensor_torsor(w, t, w2, u)
    assert abs(tc.rep_tensor_torsor(w, t.act(z), w2, u.act(z)) - base) <= 1e-12


def test_contraction_multiplication_tags():
    x = tc.PhaseElement(1j, ("R", 0))
    y = tc.PhaseElement(-1.0 + 0j, ("R", 1))
    a = tc.torsor_tensor(x, tc.torsor_dual(y))
    b = tc.torsor_tensor(y, tc.torsor_dual(x))
    prod = tc.contraction_mult(a, b)
    assert prod.tag == ("tensor", ("R", 0), ("dual", ("R", 0)))
    assert abs(prod.value - 1) <= 1e-15
    with pytest.raises(TagMismatchError):
        tc.contraction_mult(a, a)


# -- covers and cochains ---------------------------------------------------------

def test_circle_cover_nerve_from_supports():
    narrow = tc.circle_cover(4, 64)
    assert narrow.contains((0, 1)) and narrow.contains((3, 0))
    assert not narrow.contains((0, 2))
    wide = tc.circle_cover(3, 64, 0.6)
    assert wide.contains((0, 1, 2))
    with pytest.raises(ValueError):
        tc.circle_cover(2, 64)


@given(covers, seeds, st.integers(0, 1))
def test_coboundary_squares_to_one(kind, seed, p):
    cover = _cover(kind)
    c = tc.random_cochain(cover, p, np.random.default_rng(seed))
    dd = tc.cech_coboundary(tc.cech_coboundary(c))
    assert dd.max_defect() <= 1e-12


@given(covers, seeds)
def test_coboundary_is_a_homomorphism(kind, seed):
    rng = np.random.default_rng(seed)
    cover = _cover(kind)
    a, b = tc.random_cochain(cover, 1, rng), tc.random_cochain(cover, 1, rng)
    lhs = tc.cech_coboundary(a * b)
    rhs = tc.cech_coboundary(a) * tc.cech_coboundary(b)
    assert lhs.distance(rhs) <= 1e-12
    assert (a * a.inverse()).is_trivial(1e-12)


def test_alternating_convention():
    cover = tc.circle_cover(4, 64)
    pts = cover.grid_points((0, 1))
    c = tc.CechCochain(cover, 1, {(1, 0): 0.1 + 0 * pts})
    assert np.allclose(c.angle((0, 1)), -0.1)
    assert np.allclose(c.angle((1, 0)), 0.1)
    assert c.angle((0, 0)) == 0.0
    with pytest.raises(NerveIncompleteError):
        tc.CechCochain(cover, 1, {(0, 2): 0.0})


@given(covers, seeds, st.integers(0, 2))
def test_json_round_trip(kind, seed, p):
    cover = _cover(kind)
    if not cover.simplices(p):
        return
    c = tc.random_cochain(cover, p, np.random.default_rng(seed))
    back = tc.CechCochain.from_json(json.loads(c.dumps()))
    assert back.distance(c) == 0.0
    assert back.cover.labels == cover.labels


def test_restrict_checks_grids():
    cover = tc.circle_cover(4, 64)
    with pytest.raises(GridMismatchError):
        cover.restrict(np.zeros(3), (0,), (0, 1))


# -- Dixmier-Douady cocycles ------------------------------------------------------------

def _eta(cover, rng):
    eta = {}
    for i in cover.labels:
        a = tc.random_cochain(cover, 0, rng).angle((i,))
        eta[i] = tc.PhaseElement(np.exp(1j * np.asarray(a)), ("R", i))
    return eta


@given(st.sampled_from(["circle4", "circle3wide", "circle5"]), seeds)
def test_canonical_trivial_sections_give_trivial_cocycle(kind, seed):
    cover = _cover(kind)
    sections = tc.trivial_gerbe_sections(cover, _eta(cover, np.random.default_rng(seed)))
    g = tc.dd_cocycle(cover, sections, tc.contraction_mult, tc.trivial_gerbe_unit)
    assert g.max_defect() <= 1e-12


@given(st.sampled_from(["circle3wide", "circle5"]), seeds)
def test_rescaling_changes_cocycle_by_coboundary(kind, seed):
    rng = np.random.default_rng(seed)
    cover = _cover(kind)
    sections = tc.trivial_gerbe_sections(cover, _eta(cover, rng))
    h = tc.random_cochain(cover, 1, rng)
    g0 = tc.dd_cocycle(cover, sections, tc.contraction_mult, tc.trivial_gerbe_unit)
    g1 = tc.dd_cocycle(cover, tc.rescale_sections(cover, sections, h), tc.contraction_mult,
                       tc.trivial_gerbe_unit)
    assert g1.distance(g0 * tc.cech_coboundary(h)) <= 1e-12


def test_dd_cocycle_rejects_non_inverse_sections():
    cover = tc.circle_cover(3, 64, 0.6)
    sections = tc.trivial_gerbe_sections(cover, _eta(cover, np.random.default_rng(0)))
    key = (1, 0)
    sections[key] = sections[key].act(1j)
    with pytest.raises(InverseConventionError):
        tc.dd_cocycle(cover, sections, tc.contraction_mult, tc.trivial_gerbe_unit)


@given(st.integers(2, 4), seeds)
def test_delta_bundle_cochain_is_cocycle(p, seed):
    # delta(delta g) = 1 on aligned fibre-product grids
    rng = np.random.default_rng(seed)
    m = 5
    g = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(m,) * (p - 1)))
    d1 = tc.delta_bundle_cochain(g)
    d2 = tc.delta_bundle_cochain(d1)
    assert np.max(np.abs(d2 - 1)) <= 1e-12


def test_delta_bundle_grid_checks():
    with pytest.raises(GridMismatchError):
        tc.delta_bundle_cochain(np.ones((3, 4)))


# -- suspension ---------------------------------------------------------------------

def test_suspension_cover_shape():
    U = tc.two_cap_cover(64)
    S = tc.build_suspension_cover(U)
    assert set(S.labels) == {tc.CAP_MINUS, tc.CAP_PLUS, "N", "S"}
    assert S.contains((tc.CAP_MINUS, "N", "S"))
    assert not S.contains((tc.CAP_MINUS, tc.CAP_PLUS))
    lower = tc.cone_cover(S, tc.CAP_MINUS)
    assert lower.contains((tc.CAP_MINUS, "N")) and not lower.contains((tc.CAP_PLUS, "N"))


@given(covers, seeds)
def test_suspension_round_trip(kind, seed):
    rng = np.random.default_rng(seed)
    cover = _cover(kind)
    h = tc.random_cochain(cover, 1, rng)
    if cover.simplices(2):
        # with triple overlaps a random cochain is not a cocycle; a coboundary is
        h = tc.cech_coboundary(tc.random_cochain(cover, 0, rng))
    g = tc.suspension_forward(h)
    assert tc.cech_coboundary(g).max_defect() <= 1e-12
    back = tc.suspension_partial_inverse(g)
    assert back.distance(h) <= 1e-12
    assert tc.suspension_forward(back).distance(g) <= 1e-12


def test_suspension_needs_a_cocycle():
    cover = tc.circle_cover(3, 64, 0.6)
    h = tc.random_cochain(cover, 1, np.random.default_rng(2))
    with pytest.raises(ValueError):
        tc.suspension_forward(h)


def test_suspension_rejects_wrong_support():
    h = tc.random_cochain(tc.circle_cover(4, 64), 1, np.random.default_rng(1))
    g = tc.suspension_forward(h)
    entries = dict(g.entries)
    entries[(tc.CAP_PLUS, 0, 1)] = entries[(tc.CAP_MINUS, 0, 1)]
    with pytest.raises(SupportShapeError):
        tc.suspension_partial_inverse(tc.CechCochain(g.cover, 2, entries))


# -- winding -------------------------------------------------------------------------

@given(st.integers(-5, 5), st.floats(-3, 3), seeds)
def test_winding_degree(k, offset, seed):
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(256) / 256
    wiggle = 0.3 * np.sin(t + rng.uniform(0, 6))
    assert tc.winding_degree(np.exp(1j * (k * t + offset + wiggle))) == k


def test_winding_refuses_coarse_grids():
    t = 2 * np.pi * np.arange(8) / 8
    with pytest.raises(RefineError) as err:
        tc.winding_degree(np.exp(3j * t))
    assert err.value.max_step > np.pi / 2
