import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockgerbe import quatgeom as qg
from fockgerbe.errors import (
    ChartHoleError,
    NonUnitError,
    PoleError,
    SampleCountError,
    ZeroQuaternionError,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
quats = st.tuples(finite, finite, finite, finite).map(lambda t: qg.Quaternion(*t))


def unit_quats(min_norm=1e-3):
    return st.tuples(finite, finite, finite, finite).filter(
        lambda t: np.linalg.norm(t) > min_norm
    ).map(lambda t: np.asarray(t) / np.linalg.norm(t))


def sphere2_points():
    # S^2 = {pi_i = 0} inside the unit quaternions
    return st.tuples(finite, finite, finite).filter(lambda t: np.linalg.norm(t) > 1e-3).map(
        lambda t: np.array([t[0], 0.0, t[1], t[2]]) / np.linalg.norm(t)
    )


def test_hamilton_units():
    i, j, k = (qg.Quaternion(0, 1, 0, 0), qg.Quaternion(0, 0, 1, 0), qg.Quaternion(0, 0, 0, 1))
    assert (i * j).isclose(k)
    assert (j * k).isclose(i)
    assert (k * i).isclose(j)
    assert (i * i).isclose(qg.Quaternion(-1.0))
    assert (j * i).isclose(-k)


@given(quats, quats, quats)
def test_product_associative_and_norm_multiplicative(p, q, r):
    assert ((p * q) * r).isclose(p * (q * r), tol=1e-9)
    assert abs((p * q).norm() - p.norm() * q.norm()) <= 1e-9 * (1 + p.norm() * q.norm())


@given(quats.filter(lambda q: q.norm() > 1e-3))
def test_inverse(q):
    assert (q * q.inverse()).isclose(qg.Quaternion(1.0), tol=1e-9)


def test_zero_inverse_raises():
    with pytest.raises(ZeroQuaternionError):
        qg.Quaternion().inverse()


@given(quats)
def test_stereographic_round_trip(w):
    assert (qg.stereo_north(qg.stereo_north_inv(w)) - w).norm() <= 1e-9 * (1 + w.norm())
    assert (qg.stereo_south(qg.stereo_south_inv(w)) - w).norm() <= 1e-9 * (1 + w.norm())


@given(quats.filter(lambda w: w.norm() > 1e-3))
def test_chart_change_is_inversion(w):
    p = qg.stereo_south_inv(w)
    assert (qg.stereo_north(p) - w.inverse()).norm() <= 1e-9 * (1 + w.inverse().norm())


def test_chart_poles():
    with pytest.raises(PoleError):
        qg.stereo_north(qg.NORTH)
    with pytest.raises(PoleError):
        qg.stereo_south(qg.SOUTH)


@given(quats)
def test_theta_agrees_with_chart_lifts(w):
    p = qg.stereo_north_inv(w)
    via_theta = qg.theta_s4_to_hp1(p)
    if 1 - p.y > 1e-6:
        lift = qg.theta_tilde_north(p.as_array())
        assert via_theta.isclose(qg.hp1_project(lift), tol=1e-8)
    if 1 + p.y > 1e-6:
        lift = qg.theta_tilde_south(p.as_array())
        assert via_theta.isclose(qg.hp1_project(lift), tol=1e-8)


def test_hp1_right_scaling_invariant(rng):
    for _ in range(20):
        v = rng.normal(size=(2, 4))
        c = rng.normal(size=4)
        scaled = qg.qmul(v, c)
        assert qg.HP1Point.from_array(v).isclose(qg.HP1Point.from_array(scaled))


@pytest.mark.parametrize("bad", [0, 6, 12, 100])
def test_sample_counts(bad):
    with pytest.raises(SampleCountError):
        qg.loop_params(bad)


@given(unit_quats())
def test_beta_endpoints_and_sphere(x):
    vals = qg.beta_values(x, np.array([0.0, np.pi, 2 * np.pi]))
    assert np.allclose(vals[0], [1, 0, 0, 0, 0], atol=1e-12)
    assert np.allclose(vals[1, :4], x, atol=1e-12) and abs(vals[1, 4]) <= 1e-12
    assert np.allclose(vals[2], vals[0], atol=1e-12)
    s = qg.loop_params(32)
    assert np.allclose(np.linalg.norm(qg.beta_values(x, s), axis=-1), 1.0, atol=1e-12)


@given(unit_quats())
def test_beta_band_one(x):
    fc = qg.fourier_of_loop(qg.beta_loop(x, 16))
    assert fc.band(1e-12) <= 1


def test_beta_rejects_non_unit():
    with pytest.raises(NonUnitError):
        qg.beta_values([2.0, 0, 0, 0], 0.0)


@given(st.floats(0, 2 * np.pi))
def test_rotation_quarter_turn(s):
    p = qg.S4Point(qg.Quaternion(np.cos(s), np.sin(s), 0, 0), 0.0)
    q = qg.rotate_r_s4(p)
    assert abs(q.y - np.sin(s)) <= 1e-12 and abs(q.z.b) <= 1e-12


@given(sphere2_points())
def test_eta_relation(x):
    if x[0] < -1 + 1e-9:
        return
    assert qg.eta_relation_residual(x, 16) <= 1e-10


def test_eta_chart_holes():
    with pytest.raises(ChartHoleError):
        qg.eta_section([0, 1, 0, 0], "+i", 8)
    with pytest.raises(ChartHoleError):
        qg.eta_section([0, -1, 0, 0], "-i", 8)


def test_transition_at_minus_one():
    s = qg.loop_params(64)
    r = qg.transition_values([-1.0, 0, 0, 0], s)
    expected = np.stack([np.cos(s), -np.sin(s), 0 * s, 0 * s], axis=-1)
    assert np.max(np.abs(r - expected)) <= 1e-12


@given(sphere2_points())
def test_transition_unit_and_band_one(x):
    r = qg.transition_loop_r(x, 16)
    assert np.allclose(qg.qnorm(r.values), 1.0, atol=1e-12)
    assert qg.fourier_of_loop(r).band(1e-12) <= 1
    assert np.allclose(r.values[0], [1, 0, 0, 0], atol=1e-12)


@given(unit_quats(), unit_quats())
def test_so4_is_left_multiplication_homomorphism(u, v):
    mu, mv = qg.so4_of_quat(u), qg.so4_of_quat(v)
    assert np.allclose(mu @ mu.T, np.eye(4), atol=1e-12)
    assert abs(np.linalg.det(mu) - 1) <= 1e-10
    assert np.allclose(mu @ mv, qg.so4_of_quat(qg.qmul(u, v)), atol=1e-12)
    w = np.array([0.3, -0.2, 0.5, 0.1])
    assert np.allclose(mu @ w, qg.qmul(u, w), atol=1e-12)


@given(st.integers(3, 6))
def test_fourier_round_trip(log_n):
    n = 2**log_n
    rng = np.random.default_rng(log_n)
    vals = rng.normal(size=(n, 2, 2))
    fc = qg.fourier_of_loop(vals)
    assert np.max(np.abs(qg.loop_from_fourier(fc, n) - vals)) <= 1e-12
