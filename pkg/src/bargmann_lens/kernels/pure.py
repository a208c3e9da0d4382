"""Pure numpy implementations of the hot evaluation kernels.

These are the fallback for the compiled extension in ``_native``; both
implementations sum exactly the same terms over the same index windows, so
they agree to rounding.  Keep the two in sync.
"""

import numpy as np


def theta_terms(zre, zim, k, a, m_lo, m_hi):
    """Windowed level-k lattice sum, in the unitary gauge, at z = zre + i*zim.

    Computes sum over m in [m_lo, m_hi] of

        exp(-pi*k*(m+a+zim)^2) * exp(i*(2*pi*k*(m+a)*zre + pi*(m+a) + pi*k*zre*zim))

    i.e. the classical series already multiplied by the radially flat gauge
    weight exp(pi*k*(z^2 - |z|^2)/2), folded per term so every exponent has
    non-positive real part (no overflow anywhere on the cover).  The
    half-characteristic phase pi*(m+a) is part of the series convention.
    """
    zre = np.asarray(zre, dtype=np.float64)
    zim = np.asarray(zim, dtype=np.float64)
    acc = np.zeros(zre.shape, dtype=np.complex128)
    gauge_phase = np.pi * k * zre * zim
    for m in range(int(m_lo), int(m_hi) + 1):
        c = m + a
        amp = np.exp(-np.pi * k * (c + zim) ** 2)
        ang = 2.0 * np.pi * k * c * zre + np.pi * c + gauge_phase
        acc += amp * np.cos(ang) + 1j * (amp * np.sin(ang))
    return acc


def poly_eval(z, exps, coeffs):
    """Sparse multi-index polynomial sum_t coeffs[t] * prod_d z[:,d]**exps[t,d].

    z is (N, n) complex, exps (T, n) non-negative integers, coeffs (T,).
    """
    z = np.asarray(z, dtype=np.complex128)
    exps = np.asarray(exps, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    out = np.zeros(z.shape[0], dtype=np.complex128)
    for t in range(exps.shape[0]):
        term = np.full(z.shape[0], coeffs[t], dtype=np.complex128)
        for d in range(exps.shape[1]):
            e = int(exps[t, d])
            if e == 1:
                term *= z[:, d]
            elif e > 1:
                term *= z[:, d] ** e
        out += term
    return out
