import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from risisac import sensing as sen
from risisac.channel import SceneConfig, link_powers, los_components, los_geometry, path_gains

settings.register_profile(
    "risisac", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("risisac")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_scene():
    """Two UEs, 2x2 BS, 2x2 RIS, modest Rician factors so NLOS matters."""
    return SceneConfig(
        bs_shape=(1, 2),
        ris_shape=(2, 2),
        ue_positions=[[-4.0, 3.0, 8.0], [-3.0, 4.0, 8.5]],
        eps_0=2.0,
        eps_k=[3.0, 1.5],
    )


def draw_cascade(scene, phases, rng, n):
    """Brute-force cascaded channels ``H0^H diag(lam) h_k`` for ``n`` draws; (n, M_B, K).

    Built from explicit LOS matrices plus scaled standard normals, without the
    package's batched sampler.
    """
    h0_bar, h_bar = los_components(scene)
    pw = link_powers(scene)
    lam = np.asarray(phases).reshape(-1)
    m_r, m_b = h0_bar.shape
    k = h_bar.shape[0]
    w0 = (rng.standard_normal((n, m_r, m_b)) + 1j * rng.standard_normal((n, m_r, m_b))) / np.sqrt(2)
    wk = (rng.standard_normal((n, k, m_r)) + 1j * rng.standard_normal((n, k, m_r))) / np.sqrt(2)
    h0 = h0_bar + np.sqrt(pw.nlos_0) * w0
    h = h_bar + np.sqrt(pw.nlos_k)[None, :, None] * wk
    out = np.empty((n, m_b, k), dtype=complex)
    for j in range(k):
        out[:, :, j] = np.einsum("nrb,nr->nb", h0.conj(), lam * h[:, j, :])
    return out


def fd_jacobian(scene, setup, k, h=1e-6):
    """Central differences of the noiseless snapshots w.r.t. [phi, theta, Re beta_k, Im beta_k]."""
    psi = los_geometry(scene).psi_k[k]
    g = path_gains(scene)
    rho = sen.varrho(scene, setup, k)
    unit = rho / g.beta_k[k]
    cols = []
    for dpsi in ((h, 0), (0, h)):
        plus = sen.noiseless_rx(scene, setup, (psi[0] + dpsi[0], psi[1] + dpsi[1]), rho)
        minus = sen.noiseless_rx(scene, setup, (psi[0] - dpsi[0], psi[1] - dpsi[1]), rho)
        cols.append((plus - minus) / (2 * h))
    hb = 1e-6 * abs(g.beta_k[k])
    for db in (hb, 1j * hb):
        plus = sen.noiseless_rx(scene, setup, psi, rho + unit * db)
        minus = sen.noiseless_rx(scene, setup, psi, rho - unit * db)
        cols.append((plus - minus) / (2 * hb))
    return np.stack(cols, axis=1)


def fim_relative_error(f, f_ref):
    """Entrywise relative error; entries that vanish structurally are scaled by sqrt(F_ii F_jj)."""
    scale = np.sqrt(np.outer(np.diag(f_ref), np.diag(f_ref)))
    structural = np.abs(f_ref) < 1e-9 * scale
    err = np.abs(f - f_ref)
    return np.max(np.where(structural, err / scale, err / np.where(structural, 1.0, np.abs(f_ref))))
