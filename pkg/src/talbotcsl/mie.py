"""Far-field Mie scattering amplitudes for a homogeneous sphere.

Conventions follow Bohren & Huffman: for an incident wave polarised along
the reference axis the scattered field components are ``S2(theta) cos(phi)``
(parallel) and ``-S1(theta) sin(phi)`` (perpendicular), and the scattering
amplitude in units of length is ``S / (-i k)``.
"""

import numpy as np
from scipy import special

from .errors import InvalidConfigurationError, NumericalFailureError

TAIL_TOL = 1e-12


def _nstop(x):
    return int(np.floor(x + 4.0 * x ** (1.0 / 3.0) + 2.0))


def mie_coefficients(x, m, nstop=None):
    """Coefficients ``a_n, b_n`` for ``n = 1..nstop``.

    The logarithmic derivative of ``psi_n(m x)`` is obtained by downward
    recurrence, which is stable for absorbing spheres.
    """
    if not (np.isfinite(x) and x > 0):
        raise InvalidConfigurationError(f"size parameter must be positive, got {x!r}")
    m = complex(m)
    if nstop is None:
        nstop = _nstop(x)
    mx = m * x
    nmx = int(max(nstop, abs(mx))) + 16
    dlog = np.zeros(nmx + 1, dtype=complex)
    for n in range(nmx, 0, -1):
        dlog[n - 1] = n / mx - 1.0 / (dlog[n] + n / mx)

    # Riccati-Bessel functions from library routines: upward recurrence of
    # psi_n loses all accuracy for x << 1
    n = np.arange(0, nstop + 1)
    psi = x * special.spherical_jn(n, x)
    chi = -x * special.spherical_yn(n, x)
    xi = psi - 1j * chi
    nn = n[1:]
    t = dlog[1:nstop + 1] / m + nn / x
    a = (t * psi[1:] - psi[:-1]) / (t * xi[1:] - xi[:-1])
    t = m * dlog[1:nstop + 1] + nn / x
    b = (t * psi[1:] - psi[:-1]) / (t * xi[1:] - xi[:-1])
    return a, b


def _angular(nstop, mu):
    """Angular functions pi_n and tau_n for n = 1..nstop at ``mu = cos(theta)``."""
    mu = np.asarray(mu, dtype=float)
    pi = np.zeros((nstop,) + mu.shape)
    tau = np.zeros_like(pi)
    p_prev = np.zeros_like(mu)
    p_cur = np.ones_like(mu)
    for n in range(1, nstop + 1):
        pi[n - 1] = p_cur
        tau[n - 1] = n * mu * p_cur - (n + 1) * p_prev
        p_next = ((2 * n + 1) * mu * p_cur - (n + 1) * p_prev) / n
        p_prev, p_cur = p_cur, p_next
    return pi, tau


def mie_amplitudes(theta, x, m, nstop=None):
    """Scattering amplitudes ``S1(theta), S2(theta)``.

    Parameters
    ----------
    theta : array_like
        Scattering angle(s) in radians.
    x : float
        Size parameter ``2 pi R / lambda``.
    m : complex
        Refractive index of the sphere relative to the medium.
    nstop : int, optional
        Truncation order. Defaults to the Wiscombe-style
        ``x + 4 x**(1/3) + 2`` and is extended until the last retained term
        is below ``1e-12`` of the partial sum.

    Returns
    -------
    S1, S2 : ndarray of complex
    """
    theta = np.asarray(theta, dtype=float)
    n_min = _nstop(x) if nstop is None else max(int(nstop), _nstop(x))
    n_cap = n_min + 60 + int(2 * x)
    order = n_min
    while True:
        a, b = mie_coefficients(x, m, order)
        pi, tau = _angular(order, np.cos(theta))
        n = np.arange(1, order + 1)
        weight = ((2 * n + 1) / (n * (n + 1))).reshape((-1,) + (1,) * theta.ndim)
        terms1 = weight * (a.reshape(weight.shape) * pi + b.reshape(weight.shape) * tau)
        terms2 = weight * (a.reshape(weight.shape) * tau + b.reshape(weight.shape) * pi)
        s1 = terms1.sum(axis=0)
        s2 = terms2.sum(axis=0)
        # tail check against the coefficients so that zeros of pi_n do not hide it
        tail = max(abs(a[-1]), abs(b[-1])) * (2 * order + 1)
        scale = np.max(np.abs(np.concatenate([a, b])) * np.concatenate([2 * n + 1, 2 * n + 1]))
        if tail <= TAIL_TOL * scale:
            return s1, s2
        order += 4
        if order > n_cap:
            raise NumericalFailureError(
                f"Mie series did not converge for x={x!r}, m={m!r} (tail {tail / scale:.2e})")


def mie_efficiencies(x, m):
    """Extinction, scattering and absorption efficiencies ``(Q_ext, Q_sca, Q_abs)``."""
    order = _nstop(x) + 8
    a, b = mie_coefficients(x, m, order)
    n = np.arange(1, order + 1)
    q_ext = 2.0 / x**2 * np.sum((2 * n + 1) * (a.real + b.real))
    q_sca = 2.0 / x**2 * np.sum((2 * n + 1) * (np.abs(a) ** 2 + np.abs(b) ** 2))
    return q_ext, q_sca, q_ext - q_sca


def rayleigh_amplitudes(theta, x, m):
    """Small-sphere limit ``S1 = -i x^3 K``, ``S2 = S1 cos(theta)``."""
    m = complex(m)
    K = (m**2 - 1) / (m**2 + 2)
    s1 = -1j * x**3 * K * np.ones_like(np.asarray(theta, dtype=float))
    return s1, s1 * np.cos(theta)
