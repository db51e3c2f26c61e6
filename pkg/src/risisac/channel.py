"""Rician BS-RIS / RIS-UE channels and their deterministic statistics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Angle, Frame, Upa, cart_to_local_spherical, steering_vector

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass
class SceneConfig:
    """Static geometry and link budget. SI units, powers in watts."""

    l_b: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 9.0]))
    l_r: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 10.0]))
    ue_positions: np.ndarray = field(default_factory=lambda: np.array([[-10.0, 10.0, 0.0]]))
    v_b: np.ndarray = field(default_factory=lambda: np.eye(3))
    v_r: np.ndarray = field(default_factory=lambda: np.eye(3))
    bs_shape: tuple[int, int] = (10, 10)
    ris_shape: tuple[int, int] = (10, 10)
    f_c: float = 28e9
    eps_0: float = 50.0
    eps_k: np.ndarray | float = 50.0
    path_loss_exp: float = 2.0
    p_b: float = 0.5
    p_u: float = 0.2
    n0: float = float(dbm_to_watt(-174.0))
    noise_figure: float = float(db_to_linear(8.0))
    bandwidth: float = 1e5
    tau_p: float = 1e-3
    tau_c: float = 1e-3
    tau_l: float = 1.0
    pure_los: bool = False

    def __post_init__(self):
        self.l_b = np.asarray(self.l_b, dtype=float).reshape(3)
        self.l_r = np.asarray(self.l_r, dtype=float).reshape(3)
        self.ue_positions = np.atleast_2d(np.asarray(self.ue_positions, dtype=float))
        self.eps_k = np.broadcast_to(np.asarray(self.eps_k, dtype=float), (self.n_ue,)).copy()
        if self.eps_0 <= 0 or np.any(self.eps_k <= 0):
            raise ValueError("Rician factors must be positive")
        if self.p_b <= 0 or self.p_u <= 0:
            raise ValueError("transmit powers must be positive")
        self.n_coherence  # validates the frame budget

    @property
    def n_ue(self) -> int:
        return self.ue_positions.shape[0]

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def bs_upa(self) -> Upa:
        return Upa(*self.bs_shape, d=self.wavelength / 2)

    @property
    def ris_upa(self) -> Upa:
        return Upa(*self.ris_shape, d=self.wavelength / 2)

    @property
    def m_b(self) -> int:
        return self.bs_shape[0] * self.bs_shape[1]

    @property
    def m_r(self) -> int:
        return self.ris_shape[0] * self.ris_shape[1]

    @property
    def bs_frame(self) -> Frame:
        return Frame(self.l_b, self.v_b)

    @property
    def ris_frame(self) -> Frame:
        return Frame(self.l_r, self.v_r)

    @property
    def noise_power(self) -> float:
        """Thermal noise ``N0 * B * nf`` in watts (UE downlink and BS uplink)."""
        return self.n0 * self.bandwidth * self.noise_figure

    @property
    def n_snapshots(self) -> int:
        return int(round(self.tau_p * self.bandwidth))

    @property
    def n_symbols(self) -> int:
        """Symbols per channel coherence block."""
        return int(round(self.tau_c * self.bandwidth))

    @property
    def n_coherence(self) -> int:
        n = (self.tau_l - self.tau_p) / self.tau_c
        if n < 1 - 1e-9 or abs(n - round(n)) > 1e-6:
            raise ValueError("tau_l must equal tau_p + N_C * tau_c for integer N_C >= 1")
        return int(round(n))

    def with_ues(self, positions) -> "SceneConfig":
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        eps = self.eps_k if positions.shape[0] == self.n_ue else float(self.eps_k[0])
        return replace(self, ue_positions=positions, eps_k=eps)


@dataclass
class LinkGains:
    alpha_0: complex
    alpha_k: np.ndarray
    beta_0: complex
    beta_k: np.ndarray
    rho: np.ndarray

    @property
    def los_power_0(self) -> float:
        return abs(self.beta_0) ** 2

    @property
    def los_power_k(self) -> np.ndarray:
        return np.abs(self.beta_k) ** 2


@dataclass
class LinkPowers:
    """LOS and NLOS power per link; every moment is a polynomial in these."""

    los_0: float
    nlos_0: float
    los_k: np.ndarray
    nlos_k: np.ndarray


@dataclass
class LosGeometry:
    psi_b: Angle
    psi_r: Angle
    psi_k: list
    a_b: np.ndarray
    a_r: np.ndarray
    a_k: np.ndarray  # (K, M_R)


@dataclass
class ChannelRealization:
    h0: np.ndarray  # (M_R, M_B)
    h: np.ndarray  # (K, M_R)
    h_b: np.ndarray  # (K, M_B), cascaded


def _rician_split(eps, pure_los):
    if pure_los:
        return 1.0, 0.0
    return np.sqrt(eps / (eps + 1.0)), 1.0 / (eps + 1.0)


def path_gains(scene: SceneConfig) -> LinkGains:
    lam = scene.wavelength
    d0 = np.linalg.norm(scene.l_r - scene.l_b)
    dk = np.linalg.norm(scene.ue_positions - scene.l_r, axis=1)
    if d0 == 0 or np.any(dk == 0):
        raise ValueError("coincident nodes")
    alpha_0 = lam / (4 * np.pi * d0) * np.exp(-2j * np.pi * d0 / lam)
    alpha_k = lam / (4 * np.pi * dk ** (scene.path_loss_exp / 2)) * np.exp(-2j * np.pi * dk / lam)
    s0, _ = _rician_split(scene.eps_0, scene.pure_los)
    sk, _ = _rician_split(scene.eps_k, scene.pure_los)
    rho = np.abs(alpha_k) ** 2 * abs(alpha_0) ** 2 / ((scene.eps_k + 1) * (scene.eps_0 + 1))
    return LinkGains(alpha_0, alpha_k, alpha_0 * s0, alpha_k * sk, rho)


def link_powers(scene: SceneConfig) -> LinkPowers:
    g = path_gains(scene)
    _, v0 = _rician_split(scene.eps_0, scene.pure_los)
    _, vk = _rician_split(scene.eps_k, scene.pure_los)
    return LinkPowers(
        los_0=abs(g.beta_0) ** 2,
        nlos_0=abs(g.alpha_0) ** 2 * v0,
        los_k=np.abs(g.beta_k) ** 2,
        nlos_k=np.abs(g.alpha_k) ** 2 * vk,
    )


def los_geometry(scene: SceneConfig) -> LosGeometry:
    lam = scene.wavelength
    _, *psi_b = cart_to_local_spherical(scene.l_r, scene.bs_frame)
    _, *psi_r = cart_to_local_spherical(scene.l_b, scene.ris_frame)
    psi_b, psi_r = Angle(*psi_b), Angle(*psi_r)
    psi_k = [Angle(*cart_to_local_spherical(u, scene.ris_frame)[1:]) for u in scene.ue_positions]
    ris = scene.ris_upa
    return LosGeometry(
        psi_b=psi_b,
        psi_r=psi_r,
        psi_k=psi_k,
        a_b=steering_vector(scene.bs_upa, psi_b, lam),
        a_r=steering_vector(ris, psi_r, lam),
        a_k=np.array([steering_vector(ris, p, lam) for p in psi_k]),
    )


def los_components(scene: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(H0_bar, h_bar)`` with ``H0_bar`` of shape (M_R, M_B), ``h_bar`` (K, M_R)."""
    g = path_gains(scene)
    geo = los_geometry(scene)
    h0_bar = g.beta_0 * np.outer(geo.a_r, geo.a_b)
    h_bar = g.beta_k[:, None] * geo.a_k
    return h0_bar, h_bar


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """CN(0, var): independent real/imag parts with variance var/2."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def cascade(h0: np.ndarray, phases: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``h_B,k = H0^H diag(vec Lambda) h_k`` for every row of ``h``; last axes (M_R, M_B)."""
    lam = np.asarray(phases).reshape(-1)
    return np.einsum("...rb,...kr->...kb", h0.conj(), lam * h)


def sample_channel(scene: SceneConfig, phases, rng: np.random.Generator, n: int | None = None) -> ChannelRealization:
    """One channel draw, or ``n`` iid draws stacked on a leading axis."""
    h0_bar, h_bar = los_components(scene)
    pw = link_powers(scene)
    lead = () if n is None else (n,)
    h0 = h0_bar + complex_normal(rng, lead + h0_bar.shape, pw.nlos_0)
    h = h_bar + complex_normal(rng, lead + h_bar.shape, 1.0) * np.sqrt(pw.nlos_k)[:, None]
    return ChannelRealization(h0=h0, h=h, h_b=cascade(h0, phases, h))


def mean_cascade(scene: SceneConfig, phases) -> np.ndarray:
    h0_bar, h_bar = los_components(scene)
    return cascade(h0_bar, phases, h_bar)


def f_k(phases, a_r: np.ndarray, a_k: np.ndarray) -> np.ndarray:
    """``a_R^H diag(vec Lambda) a_k``; ``a_k`` may be (M_R,) or (K, M_R)."""
    lam = np.asarray(phases).reshape(-1)
    return (lam * a_k) @ a_r.conj()


def chi_from_f(f, pw: LinkPowers, m_r: int) -> np.ndarray:
    """``E||g_k||^2 / M_B`` from the LOS/NLOS powers of both hops."""
    nlos_mix = pw.los_0 * pw.nlos_k + pw.nlos_0 * pw.los_k + pw.nlos_0 * pw.nlos_k
    return pw.los_0 * pw.los_k * np.abs(f) ** 2 + nlos_mix * m_r


def chi_k(scene: SceneConfig, phases, k: int | None = None):
    geo = los_geometry(scene)
    chi = chi_from_f(f_k(phases, geo.a_r, geo.a_k), link_powers(scene), scene.m_r)
    return chi if k is None else float(chi[k])


def random_phases(rng: np.random.Generator, shape) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, shape))


def matched_phases(a_r: np.ndarray, a_k: np.ndarray, shape=None) -> np.ndarray:
    """Unit-modulus profile making every term of ``f_k`` real positive."""
    lam = np.exp(-1j * np.angle(a_r.conj() * a_k))
    return lam if shape is None else lam.reshape(shape)
