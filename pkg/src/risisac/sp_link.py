"""Superimposed-pilot uplink through the RIS.

Monte Carlo simulation of the SP frame (LMMSE estimation, MRC detection and
the use-and-then-forget SINR) and the closed-form deterministic SINR lower
bound built from the second and fourth moments of the cascaded channel.

Every moment is written as a polynomial in the LOS power ``L`` and NLOS power
``S`` of each hop (``rho * eps_0^a * eps_k^b = L0^a S0^(2-a) Lk^b Sk^(2-b)``),
so the pure-LOS limit ``S -> 0`` is exact rather than a limit of large
Rician factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import SceneConfig, link_powers, los_components, los_geometry

SINR_CAP = 1e12
LN2 = np.log(2.0)


class OutOfRegimeError(ArithmeticError):
    """Closed-form SINR denominator is not positive."""

    def __init__(self, msg, pi=None):
        super().__init__(msg)
        self.pi = pi


@dataclass
class SpConfig:
    """Pilot/data SNRs (normalized to unit AWGN), pilots and rate weights."""

    tau: int
    p: np.ndarray
    q: np.ndarray
    kappa: np.ndarray = None
    pilots: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        k = self.p.shape[0]
        if self.q.shape != self.p.shape:
            raise ValueError("p and q must have one entry per UE")
        if np.any(self.p < 0) or np.any(self.q < 0):
            raise ValueError("SNRs must be non-negative")
        if self.tau < k:
            raise ValueError("need tau >= K for orthogonal pilots")
        self.kappa = np.ones(k) if self.kappa is None else np.asarray(self.kappa, dtype=float)
        if self.pilots is None:
            self.pilots = dft_pilots(self.tau, k)

    @property
    def n_ue(self) -> int:
        return self.p.shape[0]

    @classmethod
    def from_scene(cls, scene: SceneConfig, eta: float = 0.5, kappa=None, tau: int | None = None) -> "SpConfig":
        """Uniform split ``p = eta * P_U / sigma^2``, ``q = (1 - eta) * P_U / sigma^2``."""
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        budget = scene.p_u / scene.noise_power
        k = scene.n_ue
        tau = scene.n_symbols if tau is None else tau
        return cls(tau, np.full(k, eta * budget), np.full(k, (1 - eta) * budget), kappa)


def dft_pilots(tau: int, k: int) -> np.ndarray:
    """First ``k`` DFT columns; ``phi_i^H phi_j = tau delta_ij``."""
    n = np.arange(tau)
    return np.exp(-2j * np.pi * np.outer(n, np.arange(k)) / tau)


# ------------------------------------------------------------------ moments


@dataclass
class Moments:
    f: np.ndarray
    chi: np.ndarray
    delta: np.ndarray
    omega: np.ndarray  # (..., K, K), diagonal = delta
    xi: np.ndarray


@dataclass
class _Stats:
    """Phase-independent pieces of the moment expressions."""

    m_b: int
    m_r: int
    a_r: np.ndarray
    a_k: np.ndarray
    gram: np.ndarray  # a_i^H a_k at [k, i]
    l0: float
    s0: float
    lk: np.ndarray
    sk: np.ndarray


def _stats(scene: SceneConfig) -> _Stats:
    geo = los_geometry(scene)
    pw = link_powers(scene)
    gram = geo.a_k.conj() @ geo.a_k.T  # [i, k] = a_i^H a_k
    return _Stats(scene.m_b, scene.m_r, geo.a_r, geo.a_k, gram.T, pw.los_0, pw.nlos_0, pw.los_k, pw.nlos_k)


def _flat_phases(phases, m_r: int) -> np.ndarray:
    """Accept (M_R,), (M_Rx, M_Rz), (P, M_R) or (P, M_Rx, M_Rz); return (P, M_R)."""
    lam = np.asarray(phases)
    if lam.size == m_r:
        return lam.reshape(1, m_r)
    return lam.reshape(-1, m_r)


def compute_moments(scene: SceneConfig, phases, drop_xi_cross: bool = False, st: _Stats | None = None) -> Moments:
    """Second and fourth moments of the cascaded channel, batched over phase profiles.

    Returns arrays with a leading population axis of length P (P = 1 for a
    single profile). ``drop_xi_cross`` drops the ``Re{f_k^* f_i a_i^H a_k}`` term
    of the cross-norm moment; that variant disagrees with Monte Carlo and is
    kept only for comparison.
    """
    st = _stats(scene) if st is None else st
    lam = _flat_phases(phases, st.m_r)
    f = lam @ (st.a_k * st.a_r.conj()).T  # (P, K): a_R^H diag(lam) a_k
    mb, mr = float(st.m_b), float(st.m_r)
    F = np.abs(f) ** 2
    L0, S0, Lk, Sk = st.l0, st.s0, st.lk, st.sk

    chi = L0 * Lk * F + (L0 * Sk + S0 * Lk + S0 * Sk) * mr

    def t(a, b):
        return L0**a * S0 ** (2 - a) * Lk**b * Sk ** (2 - b)

    delta = (
        mb * t(2, 2) * F**2
        + 2 * F * (2 * mb * mr * t(2, 1) + mb * mr * t(1, 2) + mb * mr * t(1, 1) + 2 * mb * t(1, 1)
                   + mr * t(1, 2) + mr * t(1, 1) + 2 * t(1, 1))
        + mb * mr**2 * (2 * t(2, 0) + t(0, 2) + 2 * t(1, 1) + 2 * t(1, 0) + 2 * t(0, 1) + t(0, 0))
        + mr**2 * (t(0, 2) + 2 * t(1, 1) + 2 * t(1, 0) + 2 * t(0, 1) + t(0, 0))
        + (mb * mr + mr) * (2 * t(1, 0) + 2 * t(0, 1) + t(0, 0))
    )

    # pairwise factors: index [k, i]; first UE power b_k, second b_i
    lk, li = Lk[:, None], Lk[None, :]
    sk, si = Sk[:, None], Sk[None, :]

    def u(a, bk, bi):
        return L0**a * S0 ** (2 - a) * (lk if bk else sk) * (li if bi else si)

    Fk, Fi = F[:, :, None], F[:, None, :]
    cross = np.real(f.conj()[:, :, None] * f[:, None, :] * st.gram[None])  # Re{f_k^* f_i a_i^H a_k}
    g2 = np.abs(st.gram) ** 2

    omega = (
        mb * u(2, 1, 1) * Fk * Fi
        + Fk * (mb * mr * u(2, 1, 0) + mr * u(1, 1, 1) + mr * u(1, 1, 0) + 2 * mb * u(1, 1, 0))
        + Fi * (mb * mr * u(2, 0, 1) + mr * u(1, 1, 1) + mr * u(1, 0, 1) + 2 * mb * u(1, 0, 1))
        + mr**2 * (mb * u(2, 0, 0) + u(1, 0, 1) + u(1, 1, 0) + 2 * u(1, 0, 0)
                   + u(0, 1, 1) + u(0, 1, 0) + u(0, 0, 1) + u(0, 0, 0))
        + mb * mr * (2 * u(1, 0, 0) + u(0, 0, 1) + u(0, 1, 0) + u(0, 0, 0))
        + mb * u(0, 1, 1) * g2
        + 2 * mb * u(1, 1, 1) * cross
    )
    xi = (
        mb * chi[:, :, None] * chi[:, None, :]
        + u(0, 1, 1) * g2
        + mr * (u(0, 0, 1) + u(0, 1, 0) + u(0, 0, 0))
        + 2 * u(1, 1, 0) * Fk
        + 2 * u(1, 0, 1) * Fi
        + 2 * mr * u(1, 0, 0)
    )
    if not drop_xi_cross:
        xi = xi + 2 * u(1, 1, 1) * cross
    idx = np.arange(f.shape[1])
    omega[:, idx, idx] = delta
    xi[:, idx, idx] = delta
    # exact symmetry (the formulas are symmetric up to rounding)
    omega = 0.5 * (omega + omega.transpose(0, 2, 1))
    xi = 0.5 * (xi + xi.transpose(0, 2, 1))
    return Moments(f=f, chi=chi, delta=delta, omega=omega, xi=xi)


def lmmse_coefficients(chi: np.ndarray, sp: SpConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(c_k, lambda_k)``; ``chi`` may carry a leading population axis."""
    sq = np.sqrt(sp.q * sp.tau)
    total = (sp.p * chi).sum(axis=-1, keepdims=True)
    c = sq * chi / (sp.q * sp.tau * chi + total + 1.0)
    return c, sq * chi * c


# ------------------------------------------------------------- closed form


@dataclass
class RateReport:
    c: np.ndarray
    lam: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    pi: np.ndarray  # (K, 8) ordered as kernels.PI_NAMES
    sum_rate: float
    sinr_mc: np.ndarray | None = None
    sinr_mc_se: np.ndarray | None = None
    rate_mc: np.ndarray | None = None
    rate_mc_se: np.ndarray | None = None

    def pi_breakdown(self) -> dict:
        return {name: self.pi[:, i] for i, name in enumerate(kernels.PI_NAMES)}


def rate_from_sinr(sinr):
    """``log2(1 + gamma)`` via ``log1p``; SINR capped at :data:`SINR_CAP`."""
    return np.log1p(np.minimum(sinr, SINR_CAP)) / LN2


def closed_form_batch(scene: SceneConfig, phases, sp: SpConfig, st: _Stats | None = None, drop_xi_cross=False):
    """Closed-form SINR for P phase profiles. Returns ``(sinr (P, K), pi (P, K, 8), c, lam)``.

    Entries with a non-positive denominator come back as NaN.
    """
    st = _stats(scene) if st is None else st
    mom = compute_moments(scene, phases, drop_xi_cross, st)
    c, lam = lmmse_coefficients(mom.chi, sp)
    pi = kernels.pi_terms(sp.p, sp.q, sp.tau, st.m_b, mom.chi, c, lam, mom.delta, mom.omega, mom.xi)
    den = pi.sum(axis=-1)
    num = st.m_b**2 * lam**2 * sp.p * sp.tau
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return sinr, pi, c, lam


def closed_form_rate(scene: SceneConfig, phases, sp: SpConfig, drop_xi_cross: bool = False) -> RateReport:
    sinr, pi, c, lam = closed_form_batch(scene, phases, sp, drop_xi_cross=drop_xi_cross)
    sinr, pi, c, lam = sinr[0], pi[0], c[0], lam[0]
    if np.any(np.isnan(sinr)):
        raise OutOfRegimeError("closed-form rate out of regime", pi)
    rate = rate_from_sinr(sinr)
    return RateReport(c, lam, sinr, rate, pi, float(np.dot(sp.kappa, rate)))


def weighted_sum_rate(scene: SceneConfig, phases, sp: SpConfig, kappa=None) -> float:
    kappa = sp.kappa if kappa is None else np.asarray(kappa, dtype=float)
    try:
        rep = closed_form_rate(scene, phases, sp)
    except OutOfRegimeError:
        return -np.inf
    return float(np.dot(kappa, rep.rate))


def make_fitness(scene: SceneConfig, sp: SpConfig, kappa=None):
    """Vectorized fitness: (P, M_R) real phase angles -> (P,) weighted sum rate."""
    st = _stats(scene)
    kappa = sp.kappa if kappa is None else np.asarray(kappa, dtype=float)

    def fitness(angles):
        sinr, *_ = closed_form_batch(scene, np.exp(1j * np.atleast_2d(angles)), sp, st)
        val = rate_from_sinr(sinr) @ kappa
        return np.where(np.any(np.isnan(sinr), axis=1), -np.inf, val)

    return fitness


# -------------------------------------------------------------- Monte Carlo


@dataclass
class Block:
    y: np.ndarray  # (M_B, tau)
    g: np.ndarray  # (M_B, K) cascaded channels as columns
    nu: np.ndarray  # (K, tau) data symbols
    noise: np.ndarray  # (M_B, tau)


def _block_normals(rng, n, shapes):
    """Unit CN(0, 1) arrays of the given per-block shapes for ``n`` blocks.

    All values of one block are consecutive in the generator stream, so the
    result does not depend on how blocks are grouped into chunks.
    """
    sizes = [int(np.prod(s)) for s in shapes]
    z = rng.standard_normal((n, 2 * sum(sizes)))
    z = (z[:, 0::2] + 1j * z[:, 1::2]) / np.sqrt(2)
    out, start = [], 0
    for s, size in zip(shapes, sizes):
        out.append(z[:, start:start + size].reshape(n, *s))
        start += size
    return out


def _cascade_from_normals(lam, h0_bar, h_bar, pw, w0, wk):
    h0 = h0_bar + np.sqrt(pw.nlos_0) * w0
    h = h_bar + wk * np.sqrt(pw.nlos_k)[:, None]
    return np.einsum("nrb,nkr->nbk", h0.conj(), lam * h)


def generate_block(scene: SceneConfig, phases, sp: SpConfig, rng: np.random.Generator) -> Block:
    """One coherence block ``Y = sum_k g_k (sqrt(q_k) phi_k^H + sqrt(p_k) nu_k^H) + N``."""
    lam = np.asarray(phases).reshape(-1)
    h0_bar, h_bar = los_components(scene)
    # same stream layout as one block of empirical_rate
    w0, wk, nu, noise = _block_normals(rng, 1, (h0_bar.shape, h_bar.shape, (sp.n_ue, sp.tau), (scene.m_b, sp.tau)))
    g = _cascade_from_normals(lam, h0_bar, h_bar, link_powers(scene), w0, wk)[0]
    nu, noise = nu[0], noise[0]
    tx = np.sqrt(sp.q)[:, None] * sp.pilots.conj().T + np.sqrt(sp.p)[:, None] * nu.conj()
    return Block(g @ tx + noise, g, nu, noise)


def despread_and_estimate(y: np.ndarray, sp: SpConfig, c: np.ndarray) -> np.ndarray:
    """``g_hat_k = c_k Y phi_k / sqrt(tau)`` for every UE; (..., M_B, K)."""
    return c * (y @ sp.pilots) / np.sqrt(sp.tau)


def mrc_detect(y: np.ndarray, g_hat: np.ndarray, sp: SpConfig) -> np.ndarray:
    """Rows ``nu_hat_k^H = g_hat_k^H (Y - sum_i sqrt(q_i) g_hat_i phi_i^H)``; (..., K, tau)."""
    resid = y - (g_hat * np.sqrt(sp.q)) @ sp.pilots.conj().T
    return np.swapaxes(g_hat.conj(), -1, -2) @ resid


def z_decomposition(block: Block, g_hat: np.ndarray, c: np.ndarray, sp: SpConfig, mean_g2=None) -> dict:
    """Split the MRC output into the useful, gain-uncertainty and interference terms.

    ``mean_g2`` is ``E||g_k||^2`` (defaults to this block's value, making z2 zero).
    """
    g, nu = block.g, block.nu
    k_n = sp.n_ue
    coef = c * np.sqrt(sp.q * sp.tau)  # lambda_k / chi_k
    g2 = np.sum(np.abs(g) ** 2, axis=0)
    mean_g2 = g2 if mean_g2 is None else np.asarray(mean_g2)
    nu_h = nu.conj()
    z1 = (np.sqrt(sp.p) * coef * mean_g2)[:, None] * nu_h
    z2 = (np.sqrt(sp.p) * coef * (g2 - mean_g2))[:, None] * nu_h
    cross = g_hat.conj().T @ g  # [k, i] = g_hat_k^H g_i
    g_bar = g_hat - coef * g
    z31 = (np.sqrt(sp.p) * np.einsum("bk,bk->k", g_bar.conj(), g))[:, None] * nu_h
    off = cross * (1 - np.eye(k_n))
    z32 = (off * np.sqrt(sp.p)) @ nu_h
    eps = g - g_hat
    z33 = (g_hat.conj().T @ eps * np.sqrt(sp.q)) @ sp.pilots.conj().T
    z34 = g_hat.conj().T @ block.noise
    return {"z1": z1, "z2": z2, "z3_1": z31, "z3_2": z32, "z3_3": z33, "z3_4": z34}


@dataclass
class McResult:
    sinr: np.ndarray
    sinr_se: np.ndarray
    rate: np.ndarray
    rate_se: np.ndarray
    mean_g2: np.ndarray
    n_blocks: int
    block_sinr: np.ndarray | None = None  # (n_blocks, K) realized per-block SINR


def _mc_sinr(sums: dict, n: float, p, coef, tau):
    """Use-and-then-forget SINR from pooled sums; ``sums`` holds totals over ``n`` blocks."""
    m = sums["g2"] / n
    # E{(||g||^2 - m)^2 ||nu||^2} expanded around the pooled mean
    z2 = p * coef**2 * (sums["g4nu2"] - 2 * m * sums["g2nu2"] + m**2 * sums["nu2"]) / n
    z3_mean = sums["z3"] / n
    z3 = sums["z3sq"] / n - np.sum(np.abs(z3_mean) ** 2, axis=-1)
    num = p * coef**2 * m**2 * tau
    den = z2 + z3
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(den > num / SINR_CAP, num / den, SINR_CAP)
    return sinr, m


def empirical_rate(
    scene: SceneConfig,
    phases,
    sp: SpConfig,
    n_blocks: int,
    rng: np.random.Generator,
    chi_assumed=None,
    n_groups: int = 20,
    chunk: int = 250,
    per_block: bool = False,
) -> McResult:
    """Monte Carlo use-and-then-forget SINR with group-jackknife standard errors.

    Every block draws fresh channels, data and noise. ``chi_assumed`` sets the
    LMMSE scalars from a possibly mismatched channel-gain model (e.g. from
    estimated UE positions); by default the true statistics are used.
    ``per_block`` also records each block's realized SINR, i.e. the power of
    ``g_hat_k^H g_k sqrt(p_k) nu_k^H`` over the power of everything else.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    lam = np.asarray(phases).reshape(-1)
    h0_bar, h_bar = los_components(scene)
    pw = link_powers(scene)
    st = _stats(scene)
    chi = compute_moments(scene, lam, st=st).chi[0] if chi_assumed is None else np.asarray(chi_assumed)
    c, _ = lmmse_coefficients(chi, sp)
    coef = c * np.sqrt(sp.q * sp.tau)
    k_n, tau = sp.n_ue, sp.tau
    n_groups = max(1, min(n_groups, n_blocks))
    bounds = np.linspace(0, n_blocks, n_groups + 1).astype(int)
    keys = ("g2", "g4nu2", "g2nu2", "nu2", "z3sq")
    groups = {key: np.zeros((n_groups, k_n)) for key in keys}
    groups["z3"] = np.zeros((n_groups, k_n, tau), dtype=complex)
    tx_pilot = np.sqrt(sp.q)[:, None] * sp.pilots.conj().T
    sp_p = np.sqrt(sp.p)
    blocks = np.empty((n_blocks, k_n)) if per_block else None
    for gi in range(n_groups):
        start = bounds[gi]
        while start < bounds[gi + 1]:
            n = min(chunk, bounds[gi + 1] - start)
            w0, wk, nu, noise = _block_normals(rng, n, (h0_bar.shape, h_bar.shape, (k_n, tau), (scene.m_b, tau)))
            g = _cascade_from_normals(lam, h0_bar, h_bar, pw, w0, wk)
            y = g @ (tx_pilot + sp_p[:, None] * nu.conj()) + noise
            g_hat = despread_and_estimate(y, sp, c)
            nu_hat = mrc_detect(y, g_hat, sp)
            g2 = np.sum(np.abs(g) ** 2, axis=1)
            nu2 = np.sum(np.abs(nu) ** 2, axis=2)
            z3 = nu_hat - (sp_p * coef * g2)[..., None] * nu.conj()
            groups["g2"][gi] += g2.sum(0)
            groups["g4nu2"][gi] += (g2**2 * nu2).sum(0)
            groups["g2nu2"][gi] += (g2 * nu2).sum(0)
            groups["nu2"][gi] += nu2.sum(0)
            groups["z3sq"][gi] += np.sum(np.abs(z3) ** 2, axis=2).sum(0)
            groups["z3"][gi] += z3.sum(0)
            if per_block:
                gain = sp_p * np.einsum("nbk,nbk->nk", g_hat.conj(), g)
                useful = gain[..., None] * nu.conj()
                rest = np.sum(np.abs(nu_hat - useful) ** 2, axis=2)
                blocks[start:start + n] = np.sum(np.abs(useful) ** 2, axis=2) / np.maximum(rest, 1e-300)
            start += n
    counts = np.diff(bounds).astype(float)
    total = {key: val.sum(0) for key, val in groups.items()}
    sinr, m = _mc_sinr(total, float(n_blocks), sp.p, coef, tau)
    rate = rate_from_sinr(sinr)
    se_s, se_r = _jackknife_se(total, groups, counts, lambda s, n: _mc_sinr(s, n, sp.p, coef, tau)[0])
    return McResult(sinr, se_s, rate, se_r, m, n_blocks, blocks)


def _jackknife_se(total: dict, groups: dict, counts: np.ndarray, sinr_fn, prelog: float = 1.0):
    """Delete-one-group jackknife standard errors of the SINR and of ``prelog * log2(1 + SINR)``."""
    n_groups = counts.size
    if n_groups < 2:
        nan = np.full(np.shape(sinr_fn(total, counts.sum())), np.nan)
        return nan, nan
    jack_s, jack_r = [], []
    for gi in range(n_groups):
        loo = {key: total[key] - groups[key][gi] for key in total}
        s = sinr_fn(loo, counts.sum() - counts[gi])
        jack_s.append(s)
        jack_r.append(prelog * rate_from_sinr(s))
    jack_s, jack_r = np.array(jack_s), np.array(jack_r)
    fac = (n_groups - 1) / n_groups
    se_s = np.sqrt(fac * np.sum((jack_s - jack_s.mean(0)) ** 2, axis=0))
    se_r = np.sqrt(fac * np.sum((jack_r - jack_r.mean(0)) ** 2, axis=0))
    return se_s, se_r


def _rp_sinr(sums: dict, n: float, snr):
    gain = sums["gain"] / n
    useful = snr * np.abs(gain) ** 2
    den = (sums["cross2"] / n) @ snr - useful + sums["hat2"] / n
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > useful / SINR_CAP, useful / den, SINR_CAP)


def empirical_rate_rp(
    scene: SceneConfig,
    phases,
    sp: SpConfig,
    n_blocks: int,
    rng: np.random.Generator,
    chi_assumed=None,
    n_groups: int = 20,
    chunk: int = 250,
) -> McResult:
    """Monte Carlo rate of the regular-pilot (RP) baseline on the same channels.

    Each block of ``sp.tau`` symbols spends its first K symbols on orthogonal
    pilots and the rest on data. Both run at the per-symbol SNR ``p_k + q_k``
    that SP splits between data and pilot. The LMMSE scalar is the SP one
    without data interference, and the rate carries the ``(tau - K) / tau``
    pre-log. The use-and-then-forget SINR
    ``s_k |E g_hat^H g_k|^2 / (sum_i s_i E|g_hat^H g_i|^2 - s_k |E g_hat^H g_k|^2 + E||g_hat||^2)``
    is averaged over channel and pilot-noise draws.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    k_n, tau = sp.n_ue, sp.tau
    if tau <= k_n:
        raise ValueError("RP needs tau > K to leave room for data")
    lam = np.asarray(phases).reshape(-1)
    h0_bar, h_bar = los_components(scene)
    pw = link_powers(scene)
    chi = compute_moments(scene, lam).chi[0] if chi_assumed is None else np.asarray(chi_assumed)
    snr = sp.p + sp.q
    sq = np.sqrt(snr * k_n)
    c = sq * chi / (snr * k_n * chi + 1.0)
    pilots = dft_pilots(k_n, k_n)
    n_groups = max(1, min(n_groups, n_blocks))
    bounds = np.linspace(0, n_blocks, n_groups + 1).astype(int)
    groups = {"gain": np.zeros((n_groups, k_n), dtype=complex), "cross2": np.zeros((n_groups, k_n, k_n)),
              "hat2": np.zeros((n_groups, k_n)), "g2": np.zeros((n_groups, k_n))}
    tx = np.sqrt(snr)[:, None] * pilots.conj().T
    for gi in range(n_groups):
        start = bounds[gi]
        while start < bounds[gi + 1]:
            n = min(chunk, bounds[gi + 1] - start)
            w0, wk, noise = _block_normals(rng, n, (h0_bar.shape, h_bar.shape, (scene.m_b, k_n)))
            g = _cascade_from_normals(lam, h0_bar, h_bar, pw, w0, wk)
            g_hat = c * ((g @ tx + noise) @ pilots) / np.sqrt(k_n)
            cross = np.swapaxes(g_hat.conj(), -1, -2) @ g  # [k, i] = g_hat_k^H g_i
            groups["gain"][gi] += np.diagonal(cross, axis1=1, axis2=2).sum(0)
            groups["cross2"][gi] += (np.abs(cross) ** 2).sum(0)
            groups["hat2"][gi] += np.sum(np.abs(g_hat) ** 2, axis=1).sum(0)
            groups["g2"][gi] += np.sum(np.abs(g) ** 2, axis=1).sum(0)
            start += n
    counts = np.diff(bounds).astype(float)
    total = {key: val.sum(0) for key, val in groups.items()}
    prelog = (tau - k_n) / tau
    sinr = _rp_sinr(total, float(n_blocks), snr)
    se_s, se_r = _jackknife_se(total, groups, counts, lambda s, n: _rp_sinr(s, n, snr), prelog)
    return McResult(sinr, se_s, prelog * rate_from_sinr(sinr), se_r, total["g2"] / n_blocks, n_blocks)
