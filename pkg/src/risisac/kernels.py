"""Hot inner loops, each with a numba and a numpy implementation.

``eps_surface`` and ``pi_terms`` dispatch on :data:`risisac._accel.USE_NUMBA`;
the ``*_numpy`` / ``*_numba`` variants stay importable for the benchmark and
for cross-checking the two paths against each other.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

PI_NAMES = ("pi0", "pi11", "pi12", "pi13", "pi14", "pi2", "pi3", "pi4")


def eps_surface_numpy(dictionary, y):
    """Residual ``||y - f(x) x||^2`` for every dictionary column ``x = D[m, n, :]``.

    Columns with zero energy get ``||y||^2``.
    """
    dconj = dictionary.conj()
    proj = dconj @ y
    energy = np.einsum("mnt,mnt->mn", dconj, dictionary).real
    safe = np.where(energy > 0, energy, 1.0)
    coef = np.where(energy > 0, proj / safe, 0.0)
    resid = y - coef[..., None] * dictionary
    return np.einsum("mnt,mnt->mn", resid.conj(), resid).real


@njit
def eps_surface_numba(dictionary, y):
    n_m, n_n, n_t = dictionary.shape
    out = np.empty((n_m, n_n))
    for m in range(n_m):
        for n in range(n_n):
            proj = 0j
            energy = 0.0
            for t in range(n_t):
                x = dictionary[m, n, t]
                proj += x.conjugate() * y[t]
                energy += x.real * x.real + x.imag * x.imag
            coef = proj / energy if energy > 0.0 else 0j
            acc = 0.0
            for t in range(n_t):
                r = y[t] - coef * dictionary[m, n, t]
                acc += r.real * r.real + r.imag * r.imag
            out[m, n] = acc
    return out


def eps_surface(dictionary, y):
    dictionary = np.ascontiguousarray(dictionary, dtype=np.complex128)
    y = np.ascontiguousarray(y, dtype=np.complex128)
    if USE_NUMBA:
        return eps_surface_numba(dictionary, y)
    return eps_surface_numpy(dictionary, y)


def pi_terms_numpy(p, q, tau, m_b, chi, c, lam, delta, omega, xi):
    """Denominator terms of the closed-form SINR.

    Batched over a leading population axis: ``chi, c, lam, delta`` are (P, K),
    ``omega, xi`` are (P, K, K) (diagonals ignored). Returns (P, K, 8) ordered
    as :data:`PI_NAMES`.
    """
    k_eye = np.eye(p.shape[0], dtype=bool)
    om = np.where(k_eye, 0.0, omega)
    xo = np.where(k_eye, 0.0, xi)
    c2 = c**2
    pchi = p * chi
    s_other = pchi.sum(axis=1, keepdims=True) - pchi
    om_p = om @ p  # sum_{i != k} p_i Omega_ki
    xi_p = xo @ p
    p2d = p**2 * delta
    p2d_other = p2d.sum(axis=1, keepdims=True) - p2d
    q_om = np.einsum("i,pij,j->p", p, om, p)[:, None]
    q_xi = np.einsum("i,pij,j->p", p, xo, p)[:, None]

    pi0 = p * tau * m_b * lam**2 * (delta / chi**2 - m_b)
    pi11 = m_b * c2 * (p**2 * (tau + 1) * delta + tau * p * om_p + tau * p * chi)
    pi12 = m_b * c2 * (
        q * tau**2 * om_p
        + (tau + 1) * p2d_other
        + (q_xi - 2 * p * xi_p)
        + tau * (q_om - p * om_p)
        + tau * s_other
    )
    pi13 = m_b * tau * lam * ((q * (chi - lam)).sum(axis=1, keepdims=True))
    pi14 = m_b * lam * tau + c2 * m_b**2
    pi2 = -(m_b**2) * c2 * (pchi**2 + s_other**2 + 1.0)
    pi3 = -2 * m_b**2 * c2 * (pchi * s_other + pchi + s_other)
    pi4 = 2 * m_b * c2 * (p * xi_p + m_b * pchi + m_b * s_other)
    return np.stack([pi0, pi11, pi12, pi13, pi14, pi2, pi3, pi4], axis=-1)


@njit
def pi_terms_numba(p, q, tau, m_b, chi, c, lam, delta, omega, xi):
    n_pop, n_k = chi.shape
    out = np.empty((n_pop, n_k, 8))
    for s in range(n_pop):
        tot_pchi = 0.0
        tot_qerr = 0.0
        tot_p2d = 0.0
        q_om = 0.0
        q_xi = 0.0
        for i in range(n_k):
            tot_pchi += p[i] * chi[s, i]
            tot_qerr += q[i] * (chi[s, i] - lam[s, i])
            tot_p2d += p[i] ** 2 * delta[s, i]
            for j in range(n_k):
                if j != i:
                    q_om += p[i] * p[j] * omega[s, i, j]
                    q_xi += p[i] * p[j] * xi[s, i, j]
        for k in range(n_k):
            om_p = 0.0
            xi_p = 0.0
            for i in range(n_k):
                if i != k:
                    om_p += p[i] * omega[s, k, i]
                    xi_p += p[i] * xi[s, k, i]
            pk = p[k]
            ck2 = c[s, k] ** 2
            lk = lam[s, k]
            chik = chi[s, k]
            pchi = pk * chik
            s_other = tot_pchi - pchi
            out[s, k, 0] = pk * tau * m_b * lk**2 * (delta[s, k] / chik**2 - m_b)
            out[s, k, 1] = m_b * ck2 * (pk**2 * (tau + 1) * delta[s, k] + tau * pk * om_p + tau * pchi)
            out[s, k, 2] = m_b * ck2 * (
                q[k] * tau**2 * om_p
                + (tau + 1) * (tot_p2d - pk**2 * delta[s, k])
                + (q_xi - 2 * pk * xi_p)
                + tau * (q_om - pk * om_p)
                + tau * s_other
            )
            out[s, k, 3] = m_b * tau * lk * tot_qerr
            out[s, k, 4] = m_b * lk * tau + ck2 * m_b**2
            out[s, k, 5] = -(m_b**2) * ck2 * (pchi**2 + s_other**2 + 1.0)
            out[s, k, 6] = -2 * m_b**2 * ck2 * (pchi * s_other + pchi + s_other)
            out[s, k, 7] = 2 * m_b * ck2 * (pk * xi_p + m_b * pchi + m_b * s_other)
    return out


def pi_terms(p, q, tau, m_b, chi, c, lam, delta, omega, xi):
    args = (
        np.ascontiguousarray(p, dtype=float),
        np.ascontiguousarray(q, dtype=float),
        float(tau),
        float(m_b),
        *(np.ascontiguousarray(a, dtype=float) for a in (chi, c, lam, delta, omega, xi)),
    )
    if USE_NUMBA:
        return pi_terms_numba(*args)
    return pi_terms_numpy(*args)
