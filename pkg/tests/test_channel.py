import numpy as np
import pytest
from conftest import draw_cascade
from hypothesis import given
from hypothesis import strategies as st

from risisac.channel import (
    SPEED_OF_LIGHT,
    SceneConfig,
    chi_k,
    complex_normal,
    f_k,
    link_powers,
    los_components,
    los_geometry,
    matched_phases,
    mean_cascade,
    path_gains,
    random_phases,
    sample_channel,
)


def test_free_space_gain_at_unit_distance():
    sc = SceneConfig(l_b=[0, 0, 9], l_r=[0, 0, 10], ue_positions=[[3, 4, 10]], f_c=SPEED_OF_LIGHT)
    g = path_gains(sc)
    assert abs(g.alpha_0) == pytest.approx(1 / (4 * np.pi))
    # b = 2: same free-space law on the UE hop, distance 5
    assert abs(g.alpha_k[0]) == pytest.approx(1 / (4 * np.pi * 5))


def test_path_loss_exponent_applies_to_amplitude_half():
    sc = SceneConfig(ue_positions=[[3, 4, 10]], path_loss_exp=4.0)
    assert abs(path_gains(sc).alpha_k[0]) == pytest.approx(sc.wavelength / (4 * np.pi * 25))


def test_default_bs_ris_distance():
    sc = SceneConfig()
    assert abs(path_gains(sc).alpha_0) == pytest.approx(sc.wavelength / (4 * np.pi * np.sqrt(51)))


def test_link_gain_invariants():
    sc = SceneConfig(ue_positions=[[-5, 5, 0], [-10, 3, 0]], eps_0=4.0, eps_k=[2.0, 9.0])
    g = path_gains(sc)
    assert g.beta_0 == pytest.approx(g.alpha_0 * np.sqrt(4 / 5))
    assert np.allclose(g.beta_k, g.alpha_k * np.sqrt(sc.eps_k / (sc.eps_k + 1)))
    ref = np.abs(g.alpha_k) ** 2 * abs(g.alpha_0) ** 2 / ((sc.eps_k + 1) * 5)
    assert np.allclose(g.rho, ref) and np.all(g.rho > 0)


def test_coincident_nodes_raise():
    with pytest.raises(ValueError, match="coincident"):
        path_gains(SceneConfig(ue_positions=[[0, 0, 10]]))


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneConfig(eps_0=0.0)
    with pytest.raises(ValueError):
        SceneConfig(p_u=-1.0)
    with pytest.raises(ValueError):
        SceneConfig(tau_l=1.5e-3 + 0.2e-3)


def test_los_components_rank_and_norms():
    sc = SceneConfig(bs_shape=(4, 3), ris_shape=(5, 2), ue_positions=[[-5, 5, 0], [-8, 12, 1]])
    h0_bar, h_bar = los_components(sc)
    g = path_gains(sc)
    assert h0_bar.shape == (10, 12) and h_bar.shape == (2, 10)
    s = np.linalg.svd(h0_bar, compute_uv=False)
    assert s[1] < 1e-10 * s[0]
    assert np.linalg.norm(h0_bar) == pytest.approx(abs(g.beta_0) * np.sqrt(10 * 12))
    assert np.allclose(np.linalg.norm(h_bar, axis=1), np.abs(g.beta_k) * np.sqrt(10))


def test_los_angles_use_proper_frames():
    sc = SceneConfig(ue_positions=[[-6, 6, 0]])
    geo = los_geometry(sc)
    assert geo.psi_k[0].phi == pytest.approx(3 * np.pi / 4)
    assert geo.psi_k[0].theta == pytest.approx(np.pi - np.arctan(np.hypot(6, 6) / 10))
    # RIS sees the BS along (5, 5, -1), BS sees the RIS along (-5, -5, 1)
    assert geo.psi_r.phi == pytest.approx(np.pi / 4)
    assert geo.psi_b.phi == pytest.approx(-3 * np.pi / 4)


def test_cascade_structure(small_scene):
    rng = np.random.default_rng(1)
    lam = random_phases(rng, small_scene.ris_shape)
    real = sample_channel(small_scene, lam, rng)
    ref = np.array([real.h0.conj().T @ (lam.ravel() * hk) for hk in real.h])
    assert np.allclose(real.h_b, ref, atol=1e-18, rtol=1e-12)


def test_mean_cascade_closed_form(small_scene):
    lam = random_phases(np.random.default_rng(2), small_scene.m_r)
    g = path_gains(small_scene)
    geo = los_geometry(small_scene)
    ref = (np.conj(g.beta_0) * g.beta_k * f_k(lam, geo.a_r, geo.a_k))[:, None] * geo.a_b.conj()[None, :]
    assert np.allclose(mean_cascade(small_scene, lam), ref, rtol=1e-12, atol=0)


def test_sample_mean_converges(small_scene):
    rng = np.random.default_rng(3)
    lam = random_phases(rng, small_scene.m_r)
    n = 100_000
    draws = sample_channel(small_scene, lam, rng, n=n).h_b
    assert draws.shape == (n, 2, 2)
    diff = draws.mean(0) - mean_cascade(small_scene, lam)
    se_re = draws.real.std(0) / np.sqrt(n)
    se_im = draws.imag.std(0) / np.sqrt(n)
    assert np.all(np.abs(diff.real) < 3 * se_re)
    assert np.all(np.abs(diff.imag) < 3 * se_im)


def test_pure_los_is_deterministic(small_scene):
    from dataclasses import replace

    sc = replace(small_scene, pure_los=True)
    lam = random_phases(np.random.default_rng(4), sc.m_r)
    real = sample_channel(sc, lam, np.random.default_rng(5))
    assert np.array_equal(real.h_b, mean_cascade(sc, lam))


def test_second_moment_matches_chi():
    sc = SceneConfig(bs_shape=(2, 2), ris_shape=(2, 2), ue_positions=[[-4, 3, 8], [-6, 9, 0]],
                     eps_0=1.0, eps_k=[2.0, 0.5])
    rng = np.random.default_rng(6)
    lam = random_phases(rng, sc.m_r)
    acc = np.zeros(2)
    for _ in range(10):
        g = draw_cascade(sc, lam, rng, 100_000)
        acc += np.sum(np.abs(g) ** 2, axis=(0, 1))
    emp = acc / 1_000_000
    assert np.allclose(emp, sc.m_b * chi_k(sc, lam), rtol=0.01)


def test_nlos_links_independent():
    sc = SceneConfig(bs_shape=(1, 2), ris_shape=(2, 1), ue_positions=[[-4, 3, 8]], eps_0=1.0, eps_k=1.0)
    h0_bar, h_bar = los_components(sc)
    n = 100_000
    r = sample_channel(sc, np.ones(2), np.random.default_rng(7), n=n)
    a = (r.h0 - h0_bar).reshape(n, -1)
    b = (r.h - h_bar).reshape(n, -1)
    a /= a.std(0)
    b /= b.std(0)
    cross = a.T @ b.conj() / n
    assert np.max(np.abs(cross)) < 5 / np.sqrt(n)


def test_complex_normal_variance():
    z = complex_normal(np.random.default_rng(8), 200_000, 3.0)
    assert np.var(z.real) == pytest.approx(1.5, rel=0.02)
    assert np.var(z.imag) == pytest.approx(1.5, rel=0.02)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(3.0, rel=0.02)


def test_f_k_matched_and_bounds():
    sc = SceneConfig(ris_shape=(4, 5), ue_positions=[[-6, 7, 0]])
    geo = los_geometry(sc)
    lam = matched_phases(geo.a_r, geo.a_k[0])
    assert np.allclose(np.abs(lam), 1.0)
    assert abs(f_k(lam, geo.a_r, geo.a_k[0])) == pytest.approx(20)
    rng = np.random.default_rng(9)
    vals = np.array([f_k(random_phases(rng, 20), geo.a_r, geo.a_k[0]) for _ in range(20_000)])
    assert np.all(np.abs(vals) <= 20 + 1e-12)
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(20, rel=0.03)


def test_f_k_single_element():
    sc = SceneConfig(ris_shape=(1, 1))
    geo = los_geometry(sc)
    lam = random_phases(np.random.default_rng(10), 1)
    assert abs(f_k(lam, geo.a_r, geo.a_k[0])) == pytest.approx(1.0)


@given(st.floats(0.1, 100), st.floats(0.1, 100), st.floats(-20, -3), st.floats(3, 20))
def test_chi_matches_rician_form(eps0, epsk, x, y):
    sc = SceneConfig(ris_shape=(3, 2), ue_positions=[[x, y, 0]], eps_0=eps0, eps_k=epsk)
    lam = random_phases(np.random.default_rng(11), sc.m_r)
    g = path_gains(sc)
    geo = los_geometry(sc)
    f = f_k(lam, geo.a_r, geo.a_k[0])
    ref = g.rho[0] * (eps0 * epsk * abs(f) ** 2 + (eps0 + epsk + 1) * sc.m_r)
    assert chi_k(sc, lam, 0) == pytest.approx(ref, rel=1e-12)


def test_chi_single_element_collapses():
    sc = SceneConfig(ris_shape=(1, 1), eps_0=3.0, eps_k=7.0)
    g = path_gains(sc)
    assert chi_k(sc, np.ones(1), 0) == pytest.approx(abs(g.alpha_0 * g.alpha_k[0]) ** 2, rel=1e-12)


def test_matched_phases_maximize_chi():
    sc = SceneConfig(ris_shape=(3, 3), ue_positions=[[-7, 5, 0]])
    geo = los_geometry(sc)
    best = chi_k(sc, matched_phases(geo.a_r, geo.a_k[0]), 0)
    rng = np.random.default_rng(12)
    pw = link_powers(sc)
    lam = np.exp(1j * rng.uniform(0, 2 * np.pi, (10_000, sc.m_r)))
    f = lam @ (geo.a_k[0] * geo.a_r.conj())
    chi = pw.los_0 * pw.los_k[0] * np.abs(f) ** 2 + (pw.los_0 * pw.nlos_k[0] + pw.nlos_0 * pw.los_k[0]
                                                     + pw.nlos_0 * pw.nlos_k[0]) * sc.m_r
    assert np.all(chi <= best * (1 + 1e-12))


def test_statistics_bitwise_repeatable(small_scene):
    lam = random_phases(np.random.default_rng(13), small_scene.m_r)
    assert np.array_equal(chi_k(small_scene, lam), chi_k(small_scene, lam))
    a = sample_channel(small_scene, lam, np.random.default_rng(14)).h_b
    b = sample_channel(small_scene, lam, np.random.default_rng(14)).h_b
    assert np.array_equal(a, b)
