"""Kernel dispatch: compiled extension if available, numpy fallback otherwise.

Set ``BARGMANN_LENS_PURE_PYTHON=1`` to force the fallback.  Both paths sum
identical term windows, so results agree to rounding; ``backend_name()``
reports which one is active.
"""

import math
import os

import numpy as np

from . import pure

_impl = pure
if os.environ.get("BARGMANN_LENS_PURE_PYTHON", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure


def backend_name():
    """Name of the active kernel implementation: 'native' or 'pure'."""
    return "pure" if _impl is pure else "native"


def theta_window(k, a, y_min, y_max, rtol):
    """Lattice index window covering all terms above rtol relative weight.

    Term magnitudes are exp(-pi*k*(m+a+y)^2) up to a y-dependent factor, so
    the window is the dominant index range for y in [y_min, y_max] padded by
    the Gaussian half width at rtol.
    """
    half = math.sqrt(max(math.log(1.0 / rtol), 1.0) / (math.pi * k)) + 1.0
    m_lo = math.floor(-a - y_max - half)
    m_hi = math.ceil(-a - y_min + half)
    return int(m_lo), int(m_hi)


def theta_sum(z, k, j, rtol=1e-14):
    """Level-k theta lattice sum with characteristic index j at complex
    points z, in the radially flat unitary gauge (the Gaussian gauge weight
    is folded into each term for overflow-free evaluation on the cover)."""
    z = np.asarray(z, dtype=np.complex128)
    shape = z.shape
    zre = np.ascontiguousarray(z.real.reshape(-1))
    zim = np.ascontiguousarray(z.imag.reshape(-1))
    a = j / k
    if zre.size == 0:
        return np.zeros(shape, dtype=np.complex128)
    m_lo, m_hi = theta_window(k, a, float(zim.min()), float(zim.max()), rtol)
    out = _impl.theta_terms(zre, zim, float(k), float(a), m_lo, m_hi)
    return np.asarray(out).reshape(shape)


def poly_eval(z, exps, coeffs):
    """Evaluate a sparse multi-index polynomial at points z of shape (..., n)."""
    z = np.asarray(z, dtype=np.complex128)
    lead = z.shape[:-1]
    zf = np.ascontiguousarray(z.reshape(-1, z.shape[-1]))
    exps = np.ascontiguousarray(np.asarray(exps, dtype=np.int64))
    coeffs = np.ascontiguousarray(np.asarray(coeffs, dtype=np.complex128))
    if exps.shape[0] == 0:
        return np.zeros(lead, dtype=np.complex128)
    out = _impl.poly_eval(zf, exps, coeffs)
    return np.asarray(out).reshape(lead)
