import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risisac.geometry import (
    Angle,
    Frame,
    Upa,
    cart_to_local_spherical,
    direction_derivatives,
    direction_vector,
    euler_rotation,
    local_spherical_to_cart,
    steering_derivatives,
    steering_factors,
    steering_vector,
    wavevector,
)

LAM = 0.01
angles = st.tuples(st.floats(0.05, np.pi - 0.05), st.floats(0.05, np.pi - 0.05))
sizes = st.integers(1, 6)


def test_direction_vector_examples():
    assert np.allclose(direction_vector((0, 0)), [0, 0, 1])
    assert np.allclose(direction_vector((np.pi / 2, np.pi / 2)), [0, 1, 0])
    assert np.allclose(direction_vector((np.pi / 4, np.pi / 2)), [np.sqrt(2) / 2, np.sqrt(2) / 2, 0])


def test_wavevector_scaling():
    psi = Angle(0.3, 1.1)
    assert np.allclose(wavevector(psi, 2.0), -np.pi * direction_vector(psi))


def test_cart_to_local_spherical_examples():
    frame = Frame(np.zeros(3))
    assert np.allclose(cart_to_local_spherical([0, 0, 1], frame), (1, 0, 0))
    assert np.allclose(cart_to_local_spherical([1, 1, 0], frame), (np.sqrt(2), np.pi / 4, np.pi / 2))
    with pytest.raises(ValueError, match="coincident points"):
        cart_to_local_spherical([0, 0, 0], frame)


def test_local_spherical_to_cart_examples():
    frame = Frame(np.array([0.0, 0, 10]))
    assert np.allclose(local_spherical_to_cart(10, (0, np.pi), frame), [0, 0, 0], atol=1e-12)
    with pytest.raises(ValueError):
        local_spherical_to_cart(0.0, (0, 1), frame)


def test_bs_range_seen_from_ris():
    r, _, _ = cart_to_local_spherical([5, 5, 9], Frame(np.array([0.0, 0, 10])))
    assert r == pytest.approx(np.sqrt(51), rel=1e-14)


@given(st.floats(0.1, 50), angles, st.floats(-np.pi, np.pi), st.floats(-1, 1), st.floats(-1, 1))
def test_spherical_round_trip(r, psi, yaw, pitch, roll):
    frame = Frame(np.array([1.0, -2.0, 3.0]), euler_rotation(yaw, pitch, roll))
    p = local_spherical_to_cart(r, psi, frame)
    r2, phi, theta = cart_to_local_spherical(p, frame)
    assert r2 == pytest.approx(r, abs=1e-10)
    assert np.allclose([phi, theta], psi, atol=1e-9)
    assert np.allclose(local_spherical_to_cart(r2, (phi, theta), frame), p, atol=1e-10)


def test_frame_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        Frame(np.zeros(3), np.diag([1.0, 1.0, 1.1]))


@given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_euler_rotation_orthonormal(yaw, pitch, roll):
    v = euler_rotation(yaw, pitch, roll)
    assert np.allclose(v.T @ v, np.eye(3), atol=1e-12)


@given(sizes, sizes)
def test_upa_positions_centered_row_major(mx, mz):
    upa = Upa(mx, mz, 0.5)
    pos = upa.element_positions
    assert pos.shape == (mx * mz, 3)
    assert np.allclose(pos.mean(axis=0), 0, atol=1e-12)
    # element (i, j) sits at flat index i * mz + j
    for i in range(mx):
        for j in range(mz):
            row = pos[i * mz + j]
            assert row[0] == pytest.approx((i - (mx - 1) / 2) * 0.5)
            assert row[2] == pytest.approx((j - (mz - 1) / 2) * 0.5)


def test_upa_rejects_empty():
    with pytest.raises(ValueError):
        Upa(0, 3, 0.5)


def test_steering_single_element():
    assert np.allclose(steering_vector(Upa(1, 1, LAM / 2), (0.7, 1.2), LAM), [1.0])


def test_steering_two_elements_broadside_z():
    _, a_z = steering_factors(Upa(1, 2, LAM / 2), (0.0, 0.0), LAM)
    assert np.allclose(a_z, [-1j, 1j], atol=1e-12)


@given(sizes, sizes, angles)
def test_steering_kron_and_modulus(mx, mz, psi):
    upa = Upa(mx, mz, LAM / 2)
    a = steering_vector(upa, psi, LAM)
    a_x, a_z = steering_factors(upa, psi, LAM)
    assert np.max(np.abs(a - np.kron(a_x, a_z))) < 1e-12
    assert np.allclose(np.abs(a), 1.0, atol=1e-12)
    assert np.vdot(a, a).real == pytest.approx(mx * mz)


@given(sizes, sizes, angles)
def test_steering_matches_elementwise_formula(mx, mz, psi):
    upa = Upa(mx, mz, LAM / 2)
    mu = wavevector(psi, LAM)
    ref = np.exp(-1j * upa.element_positions @ mu)
    assert np.allclose(steering_vector(upa, psi, LAM), ref, atol=1e-12)


@given(st.integers(1, 5), st.integers(1, 5), angles)
def test_steering_derivatives_finite_difference(mx, mz, psi):
    upa = Upa(mx, mz, LAM / 2)
    d_phi, d_theta = steering_derivatives(upa, psi, LAM)
    h = 1e-6
    phi, theta = psi
    fd_phi = (steering_vector(upa, (phi + h, theta), LAM) - steering_vector(upa, (phi - h, theta), LAM)) / (2 * h)
    fd_theta = (steering_vector(upa, (phi, theta + h), LAM) - steering_vector(upa, (phi, theta - h), LAM)) / (2 * h)
    for ana, fd in ((d_phi, fd_phi), (d_theta, fd_theta)):
        scale = max(np.max(np.abs(fd)), 1e-3)
        assert np.max(np.abs(ana - fd)) / scale < 1e-4


def test_steering_derivatives_single_element_zero():
    d_phi, d_theta = steering_derivatives(Upa(1, 1, LAM / 2), (0.4, 1.3), LAM)
    assert np.allclose(d_phi, 0) and np.allclose(d_theta, 0)


def test_azimuth_derivative_phase_follows_x_coordinate():
    upa = Upa(2, 1, LAM / 2)
    psi = (0.6, np.pi / 2)
    a = steering_vector(upa, psi, LAM)
    d_phi, _ = steering_derivatives(upa, psi, LAM)
    slope = (d_phi / (1j * a)).real  # d(phase)/d(phi)
    x = upa.element_positions[:, 0]
    assert np.allclose(slope, -2 * np.pi / LAM * np.sin(psi[0]) * x)


@given(angles)
def test_direction_derivatives_finite_difference(psi):
    # the finite-difference oracle selects +sin(theta)cos(phi) in the y slot
    d_phi, d_theta = direction_derivatives(psi)
    h = 1e-6
    phi, theta = psi
    fd_phi = (direction_vector((phi + h, theta)) - direction_vector((phi - h, theta))) / (2 * h)
    fd_theta = (direction_vector((phi, theta + h)) - direction_vector((phi, theta - h))) / (2 * h)
    assert np.allclose(d_phi, fd_phi, atol=1e-8)
    assert np.allclose(d_theta, fd_theta, atol=1e-8)
