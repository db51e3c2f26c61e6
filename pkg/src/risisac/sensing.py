"""Downlink location sensing through the RIS.

Signal model, Fisher information / position CRB, and the 2D-IFFT estimator
(grid search, quadratic interpolation, quasi-Newton refinement) together with a
dense-grid maximum-likelihood baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .channel import SceneConfig, complex_normal, link_powers, los_geometry, path_gains
from .geometry import (
    Angle,
    cart_to_local_spherical,
    direction_derivatives,
    direction_vector,
    steering_derivatives,
    steering_factors,
)


@dataclass
class SensingSetup:
    """Pilot, per-snapshot RIS phases (T, M_Rx, M_Rz) and noise levels."""

    pilot: np.ndarray
    phases: np.ndarray
    sigma2_n: float
    physical_noise: bool = False

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=complex)
        if self.phases.ndim != 3:
            raise ValueError("phases must have shape (T, M_Rx, M_Rz)")
        if not np.allclose(np.abs(self.phases), 1.0, atol=1e-12):
            raise ValueError("RIS phases must be unit modulus")

    @property
    def n_snapshots(self) -> int:
        return self.phases.shape[0]


@dataclass
class NoiseBreakdown:
    awgn: float
    nlos_bs: float  # NLOS of the BS-RIS hop, LOS of the RIS-UE hop
    nlos_ue: float  # LOS of the BS-RIS hop, NLOS of the RIS-UE hop
    nlos_both: float

    @property
    def total(self) -> float:
        return self.awgn + self.nlos_bs + self.nlos_ue + self.nlos_both


@dataclass
class FimResult:
    f_ch: np.ndarray
    gamma: np.ndarray
    f_lo: np.ndarray
    psi: np.ndarray
    crb_pos: float
    crb_phi: float
    crb_theta: float


@dataclass
class EstimateResult:
    grid_idx: tuple
    refined_idx: tuple
    psi_hat: Angle
    psi_tilde: Angle
    position: np.ndarray | None
    residual: float
    grid_edge: bool = False
    converged: bool = True
    elapsed: float = 0.0


def sensing_pilot(scene: SceneConfig) -> np.ndarray:
    """Conjugate beam toward the RIS with ``|s_i|^2 = P_B / M_B``."""
    a_b = los_geometry(scene).a_b
    return np.sqrt(scene.p_b / scene.m_b) * a_b.conj()


def make_sensing_setup(
    scene: SceneConfig, seed=0, n_snapshots: int | None = None, physical_noise: bool = False
) -> SensingSetup:
    """Pilot plus iid uniform RIS phases drawn from a dedicated seed."""
    t = scene.n_snapshots if n_snapshots is None else int(n_snapshots)
    if t < 1:
        raise ValueError("need at least one snapshot")
    rng = np.random.default_rng(seed)
    phases = np.exp(1j * rng.uniform(0.0, 2 * np.pi, (t, *scene.ris_shape)))
    return SensingSetup(sensing_pilot(scene), phases, scene.noise_power, physical_noise)


def noise_variance(scene: SceneConfig, setup: SensingSetup, k: int) -> NoiseBreakdown:
    """Variance of the Gaussian-approximated sensing noise at UE ``k``.

    By default the NLOS terms driven by ``||s||^2`` carry no array factor.
    ``setup.physical_noise`` multiplies them by ``M_R``, which is what the
    cascade actually produces (see :func:`simulate_sensing` with
    ``mode="full"``).
    """
    pw = link_powers(scene)
    geo = los_geometry(scene)
    s2 = float(np.vdot(setup.pilot, setup.pilot).real)
    bs_gain = abs(geo.a_b @ setup.pilot) ** 2 * scene.m_r  # ||a_R a_B^T s||^2
    arr = scene.m_r if setup.physical_noise else 1.0
    return NoiseBreakdown(
        awgn=setup.sigma2_n,
        nlos_bs=arr * s2 * pw.nlos_0 * pw.los_k[k],
        nlos_ue=bs_gain * pw.los_0 * pw.nlos_k[k],
        nlos_both=arr * s2 * pw.nlos_0 * pw.nlos_k[k],
    )


def weighted_phases(scene: SceneConfig, setup: SensingSetup) -> np.ndarray:
    """``Lambda_t (Hadamard) A(psi_R)`` for every snapshot, shape (T, M_Rx, M_Rz)."""
    a_x, a_z = steering_factors(scene.ris_upa, los_geometry(scene).psi_r, scene.wavelength)
    return setup.phases * np.outer(a_x, a_z)


def phi_response(scene: SceneConfig, psi, weighted: np.ndarray) -> np.ndarray:
    """``[phi(psi)]_t = a_x(psi)^T (Lambda_t * A(psi_R)) a_z(psi)``."""
    a_x, a_z = steering_factors(scene.ris_upa, psi, scene.wavelength)
    return np.einsum("i,tij,j->t", a_x, weighted, a_z)


def phi_and_gradient(scene: SceneConfig, psi, weighted: np.ndarray):
    """``phi(psi)`` with its derivatives w.r.t. azimuth and elevation."""
    upa = scene.ris_upa
    k = 2 * np.pi / scene.wavelength
    a_x, a_z = steering_factors(upa, psi, scene.wavelength)
    d_phi, d_theta = direction_derivatives(psi)
    jx = 1j * k * upa.axis_offsets("x")
    jz = 1j * k * upa.axis_offsets("z")
    za = weighted @ a_z  # (T, M_Rx)
    phi = za @ a_x
    # omega_3 does not depend on azimuth
    g_phi = za @ (a_x * jx * d_phi[0])
    g_theta = za @ (a_x * jx * d_theta[0]) + np.einsum("i,tij,j->t", a_x, weighted, a_z * jz * d_theta[2])
    return phi, g_phi, g_theta


def varrho(scene: SceneConfig, setup: SensingSetup, k: int) -> complex:
    g = path_gains(scene)
    return complex(g.beta_0 * g.beta_k[k] * (los_geometry(scene).a_b @ setup.pilot))


def noiseless_rx(scene: SceneConfig, setup: SensingSetup, psi, gain: complex) -> np.ndarray:
    return gain * phi_response(scene, psi, weighted_phases(scene, setup))


def simulate_sensing(
    scene: SceneConfig, setup: SensingSetup, k: int, rng: np.random.Generator, mode: str = "gaussian"
) -> np.ndarray:
    """Received sensing snapshots at UE ``k``.

    ``mode="gaussian"`` adds iid CN(0, sigma^2_B,k) to the LOS response.
    ``mode="full"`` draws fresh NLOS components per snapshot and passes them
    through the cascade, plus thermal noise.
    """
    geo = los_geometry(scene)
    psi_k = geo.psi_k[k]
    y_bar = noiseless_rx(scene, setup, psi_k, varrho(scene, setup, k))
    t = setup.n_snapshots
    if mode == "gaussian":
        var = noise_variance(scene, setup, k).total
        return y_bar + complex_normal(rng, t, var)
    if mode != "full":
        raise ValueError(f"unknown sensing mode {mode!r}")
    g = path_gains(scene)
    pw = link_powers(scene)
    m_r = scene.m_r
    s2 = float(np.vdot(setup.pilot, setup.pilot).real)
    h0s_bar = g.beta_0 * geo.a_r * (geo.a_b @ setup.pilot)
    lam = setup.phases.reshape(t, m_r)
    y = np.empty(t, dtype=complex)
    for i in range(t):
        # rows of the NLOS BS-RIS matrix are iid, so H0_nlos @ s ~ CN(0, S0 ||s||^2 I)
        h0s = h0s_bar + complex_normal(rng, m_r, pw.nlos_0 * s2)
        h = g.beta_k[k] * geo.a_k[k] + complex_normal(rng, m_r, pw.nlos_k[k])
        y[i] = h @ (lam[i] * h0s)
    return y + complex_normal(rng, t, setup.sigma2_n)


def channel_jacobian_rx(scene: SceneConfig, setup: SensingSetup, k: int) -> np.ndarray:
    """(T, 4) derivatives of the noiseless snapshots w.r.t. [phi, theta, Re beta, Im beta]."""
    g = path_gains(scene)
    geo = los_geometry(scene)
    t = setup.n_snapshots
    psi_k = geo.psi_k[k]
    da_phi, da_theta = steering_derivatives(scene.ris_upa, psi_k, scene.wavelength)
    h0s_bar = g.beta_0 * geo.a_r * (geo.a_b @ setup.pilot)
    dv = setup.phases.reshape(t, -1) * h0s_bar  # diag(Lambda_t) H0_bar s
    base = dv @ geo.a_k[k]
    return np.stack([g.beta_k[k] * (dv @ da_phi), g.beta_k[k] * (dv @ da_theta), base, 1j * base], axis=1)


def fim_from_jacobian(jac: np.ndarray, sigma2: float) -> np.ndarray:
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    f = 2.0 / sigma2 * np.real(jac.T @ jac.conj())
    return 0.5 * (f + f.T)


def fim_channel(scene: SceneConfig, setup: SensingSetup, k: int) -> np.ndarray:
    sigma2 = noise_variance(scene, setup, k).total
    return fim_from_jacobian(channel_jacobian_rx(scene, setup, k), sigma2)


def jacobian_location(scene: SceneConfig, k: int) -> np.ndarray:
    """Derivatives of [phi, theta, Re beta, Im beta] w.r.t. [x, y, Re beta, Im beta]."""
    v = scene.v_r
    dl = v @ (scene.ue_positions[k] - scene.l_r)
    dp2 = dl[0] ** 2 + dl[1] ** 2
    if dp2 == 0:
        raise ValueError("azimuth undefined")
    dp = np.sqrt(dp2)
    r2 = dp2 + dl[2] ** 2
    # gradients in the RIS frame, mapped back through V_R (d dl / d l = V_R)
    dphi_local = np.array([-dl[1], dl[0], 0.0]) / dp2
    dtheta_local = np.array([dl[0] * dl[2], dl[1] * dl[2], -dp2]) / (dp * r2)
    gam = np.zeros((4, 4))
    gam[0, :2] = (dphi_local @ v)[:2]
    gam[1, :2] = (dtheta_local @ v)[:2]
    gam[2, 2] = gam[3, 3] = 1.0
    return gam


def crb(scene: SceneConfig, setup: SensingSetup, k: int) -> FimResult:
    f_ch = fim_channel(scene, setup, k)
    gam = jacobian_location(scene, k)
    f_lo = gam.T @ f_ch @ gam
    f_lo = 0.5 * (f_lo + f_lo.T)
    # relative rank test; scaling differs by orders of magnitude between blocks
    scale = np.sqrt(np.outer(np.diag(f_lo), np.diag(f_lo)))
    if np.any(np.diag(f_lo) <= 0):
        raise np.linalg.LinAlgError("unidentifiable geometry")
    normed = f_lo / scale
    if np.linalg.cond(normed) > 1e12:
        raise np.linalg.LinAlgError("unidentifiable geometry")
    inv_lo = np.linalg.inv(f_lo)
    inv_ch = np.linalg.inv(f_ch)
    psi = inv_lo[:2, :2]
    return FimResult(
        f_ch=f_ch,
        gamma=gam,
        f_lo=f_lo,
        psi=psi,
        crb_pos=float(np.sqrt(np.trace(psi))),
        crb_phi=float(np.sqrt(inv_ch[0, 0])),
        crb_theta=float(np.sqrt(inv_ch[1, 1])),
    )


# ---------------------------------------------------------------- estimation


def ifft_dictionary(scene: SceneConfig, setup: SensingSetup, m_fx: int = 256, m_fz: int | None = None) -> np.ndarray:
    """2D-IFFT of ``Lambda_t * A(psi_R)`` for every snapshot; shape (M_Fx, M_Fz, T).

    Depends only on the RIS phases and the BS direction, never on received data.
    """
    m_fz = m_fx if m_fz is None else m_fz
    mx, mz = scene.ris_shape
    if m_fx < mx or m_fz < mz:
        raise ValueError("IFFT size must be at least the array size")
    lam_hat = np.fft.ifft2(weighted_phases(scene, setup), s=(m_fx, m_fz), axes=(1, 2))
    return np.ascontiguousarray(np.moveaxis(lam_hat, 0, -1))


def bin_to_cosine(m, m_f: int, d: float, wavelength: float):
    """Direction cosine of (possibly fractional) IFFT bin ``m``.

    The bin phase ``2 pi m / M_F`` is taken modulo 2 pi in (-pi, pi].
    """
    u = np.mod(np.asarray(m, dtype=float) / m_f, 1.0)
    u = np.where(u > 0.5, u - 1.0, u)
    return wavelength / d * u


def cosine_to_bin(omega, m_f: int, d: float, wavelength: float):
    """Inverse of :func:`bin_to_cosine`, returned in [0, M_F)."""
    return np.mod(np.asarray(omega) * d / wavelength * m_f, m_f)


def valid_bins(m_f: int, d: float, wavelength: float) -> np.ndarray:
    return np.abs(bin_to_cosine(np.arange(m_f), m_f, d, wavelength)) <= 1.0


def grid_search(y: np.ndarray, dictionary: np.ndarray, mask: np.ndarray | None = None):
    """Bin ``(m, n)`` with the smallest projection residual, plus the residual surface.

    Ties go to the smallest ``m``, then ``n`` (``argmin`` over the C-order ravel).
    """
    eps = kernels.eps_surface(dictionary, y)
    search = eps if mask is None else np.where(mask, eps, np.inf)
    m, n = np.unravel_index(int(np.argmin(search)), eps.shape)
    return int(m), int(n), eps


def quadratic_offset(e_minus: float, e_0: float, e_plus: float) -> float:
    """Vertex of the parabola through three equally spaced samples, clamped to [-1, 1]."""
    den = 2.0 * (e_minus + e_plus - 2.0 * e_0)
    if den == 0:
        return 0.0
    return float(np.clip((e_minus - e_plus) / den, -1.0, 1.0))


def interpolate_peak(eps: np.ndarray, m: int, n: int) -> tuple[float, float]:
    """Fractional peak indices; neighbours wrap around the periodic IFFT grid."""
    n_m, n_n = eps.shape
    m_t = m + quadratic_offset(eps[(m - 1) % n_m, n], eps[m, n], eps[(m + 1) % n_m, n])
    n_t = n + quadratic_offset(eps[m, (n - 1) % n_n], eps[m, n], eps[m, (n + 1) % n_n])
    return m_t, n_t


def cosines_to_angle(w1: float, w3: float) -> tuple[Angle, bool]:
    """Angle with ``omega_2 >= 0``; flags a grid-edge estimate when clamping was needed."""
    rest = 1.0 - w1**2 - w3**2
    edge = rest < 0
    w2 = np.sqrt(max(rest, 0.0))
    norm = np.sqrt(w1**2 + w2**2 + w3**2)
    return Angle(float(np.arctan2(w2, w1)), float(np.arccos(np.clip(w3 / norm, -1, 1)))), bool(edge)


def canonical_angle(psi) -> Angle:
    w = direction_vector(psi)
    return Angle(float(np.arctan2(w[1], w[0])), float(np.arccos(np.clip(w[2], -1.0, 1.0))))


def projection_residual(y: np.ndarray, x: np.ndarray) -> float:
    """``||y - f(x) x||^2`` with ``f(x) = x^H y / x^H x``."""
    xx = np.vdot(x, x).real
    if xx == 0:
        return float(np.vdot(y, y).real)
    r = y - (np.vdot(x, y) / xx) * x
    return float(np.vdot(r, r).real)


def quasi_newton_refine(scene: SceneConfig, weighted: np.ndarray, y: np.ndarray, psi0, gtol=1e-9, maxiter=200):
    """Minimize the normalized projection residual over (phi, theta) with BFGS.

    Returns ``(angle, residual, converged)``; the residual is unnormalized.
    """
    yy = float(np.vdot(y, y).real)
    if yy == 0:
        return Angle(*psi0), 0.0, True

    def objective(x):
        phi, g_phi, g_theta = phi_and_gradient(scene, x, weighted)
        xx = np.vdot(phi, phi).real
        f = np.vdot(phi, y) / xx
        r = y - f * phi
        # envelope theorem: f is optimal, so only d phi contributes
        grad = -2 * np.real(f * np.array([np.vdot(r, g_phi), np.vdot(r, g_theta)]))
        return np.vdot(r, r).real / yy, grad / yy

    res = minimize(objective, np.asarray(psi0, dtype=float), jac=True, method="BFGS",
                   options={"gtol": gtol, "maxiter": maxiter})
    psi = canonical_angle(res.x)
    resid = projection_residual(y, phi_response(scene, psi, weighted))
    return psi, resid, bool(res.success or np.max(np.abs(res.jac)) < 10 * gtol)


def refine(
    y: np.ndarray,
    eps: np.ndarray,
    m_hat: int,
    n_hat: int,
    scene: SceneConfig,
    setup: SensingSetup,
    k: int | None = None,
    weighted: np.ndarray | None = None,
) -> EstimateResult:
    """Interpolate the grid peak, map it to angles and polish with BFGS.

    When ``k`` is given the UE position is reconstructed from its known height.
    """
    t0 = time.perf_counter()
    d, lam = scene.ris_upa.d, scene.wavelength
    m_fx, m_fz = eps.shape
    m_t, n_t = interpolate_peak(eps, m_hat, n_hat)
    w1 = float(bin_to_cosine(m_t, m_fx, d, lam))
    w3 = float(bin_to_cosine(n_t, m_fz, d, lam))
    psi_hat, edge = cosines_to_angle(np.clip(w1, -1, 1), np.clip(w3, -1, 1))
    if weighted is None:
        weighted = weighted_phases(scene, setup)
    psi_t, resid, ok = quasi_newton_refine(scene, weighted, y, psi_hat)
    pos = None if k is None else locate(psi_t, scene, k)
    return EstimateResult((m_hat, n_hat), (m_t, n_t), psi_hat, psi_t, pos, resid, edge, ok,
                          time.perf_counter() - t0)


def locate(psi, scene: SceneConfig, k: int) -> np.ndarray:
    """Intersect the estimated direction with the UE's known height plane."""
    w = scene.v_r.T @ direction_vector(psi)
    if abs(w[2]) < 1e-6:
        raise ValueError("grazing elevation, range unresolvable")
    dist = abs((scene.ue_positions[k, 2] - scene.l_r[2]) / w[2])
    return scene.l_r + dist * w


def estimate(
    y: np.ndarray,
    scene: SceneConfig,
    setup: SensingSetup,
    k: int,
    dictionary: np.ndarray,
    weighted: np.ndarray | None = None,
) -> EstimateResult:
    """Grid search, interpolation, refinement and positioning for one UE."""
    t0 = time.perf_counter()
    d, lam = scene.ris_upa.d, scene.wavelength
    mask = np.outer(valid_bins(dictionary.shape[0], d, lam), valid_bins(dictionary.shape[1], d, lam))
    m, n, eps = grid_search(y, dictionary, mask)
    res = refine(y, eps, m, n, scene, setup, k, weighted)
    res.elapsed = time.perf_counter() - t0
    return res


def true_angle(scene: SceneConfig, k: int) -> Angle:
    return Angle(*cart_to_local_spherical(scene.ue_positions[k], scene.ris_frame)[1:])


def mle_baseline(
    y: np.ndarray,
    scene: SceneConfig,
    setup: SensingSetup,
    grid_density: float = 2.0,
    m_f: int = 256,
    k: int | None = None,
) -> EstimateResult:
    """Exhaustive matched-projection search over (0, pi)^2, then BFGS refinement.

    The angular step corresponds to ``1 / grid_density`` of an IFFT bin at
    broadside.
    """
    if grid_density < 2:
        raise ValueError("grid_density must be at least 2 points per IFFT bin")
    t0 = time.perf_counter()
    upa, lam = scene.ris_upa, scene.wavelength
    weighted = weighted_phases(scene, setup)
    n_axis = int(np.ceil(np.pi * grid_density * m_f * upa.d / lam))
    grid = (np.arange(n_axis) + 0.5) * np.pi / n_axis
    kx = 2 * np.pi / lam * upa.axis_offsets("x")
    kz = 2 * np.pi / lam * upa.axis_offsets("z")
    best = (-np.inf, 0, 0)
    for j, theta in enumerate(grid):
        a_z = np.exp(1j * kz * np.cos(theta))
        a_x = np.exp(1j * np.outer(np.sin(theta) * np.cos(grid), kx))  # (N_phi, M_Rx)
        cols = (weighted @ a_z) @ a_x.T  # (T, N_phi)
        energy = np.einsum("tp,tp->p", cols.conj(), cols).real
        score = np.abs(cols.conj().T @ y) ** 2 / energy
        i = int(np.argmax(score))
        if score[i] > best[0]:
            best = (score[i], i, j)
    psi_hat = Angle(float(grid[best[1]]), float(grid[best[2]]))
    psi_t, resid, ok = quasi_newton_refine(scene, weighted, y, psi_hat)
    pos = None if k is None else locate(psi_t, scene, k)
    return EstimateResult((best[1], best[2]), (float(best[1]), float(best[2])), psi_hat, psi_t, pos, resid,
                          False, ok, time.perf_counter() - t0)
