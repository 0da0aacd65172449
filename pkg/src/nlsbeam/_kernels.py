"""Hot inner loops, in two interchangeable flavours.

Every kernel exists as a numba ``@njit`` function and as a vectorized numpy
function with the same signature.  The active set is chosen once at import:
setting ``NLSBEAM_NO_NUMBA=1`` (or running without numba installed) selects
the numpy path.  Both sets stay importable as ``numba_impl`` / ``numpy_impl``
so the benchmark and parity tests can call them side by side.
"""

import os
import types

import numpy as np

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

INV_PI_QUARTER = np.pi ** -0.25


# -- numpy path -------------------------------------------------------------

def _hermite_table_np(x, n_max):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n_max + 1, x.size))
    out[0] = INV_PI_QUARTER * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = (np.sqrt(2.0 / (n + 1)) * x * out[n]
                      - np.sqrt(n / (n + 1.0)) * out[n - 1])
    return out


def _trig_eval_np(coef, freqs, points):
    out = np.empty(points.size, dtype=np.complex128)
    chunk = max(1, 2 ** 22 // max(1, freqs.size))
    for start in range(0, points.size, chunk):
        sl = slice(start, start + chunk)
        out[sl] = np.exp(1j * np.outer(points[sl], freqs)) @ coef
    return out


def _nonlinear_phase_np(u, coupling, p, dt):
    u *= np.exp(-1j * coupling * dt * np.abs(u) ** p)
    return u


def _potential_phase_np(spec, m2, w, v, dt):
    spec *= np.exp(-1j * dt * (m2[:, None] * w[None, :] + v[None, :]))
    return spec


numpy_impl = types.SimpleNamespace(
    hermite_table=_hermite_table_np,
    trig_eval=_trig_eval_np,
    nonlinear_phase=_nonlinear_phase_np,
    potential_phase=_potential_phase_np,
    name="numpy",
)


# -- numba path -------------------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True)
    def _hermite_table_nb(x, n_max):
        npts = x.size
        out = np.empty((n_max + 1, npts))
        for i in range(npts):
            out[0, i] = INV_PI_QUARTER * np.exp(-0.5 * x[i] * x[i])
        if n_max >= 1:
            for i in range(npts):
                out[1, i] = np.sqrt(2.0) * x[i] * out[0, i]
        for n in range(1, n_max):
            a = np.sqrt(2.0 / (n + 1))
            b = np.sqrt(n / (n + 1.0))
            for i in range(npts):
                out[n + 1, i] = a * x[i] * out[n, i] - b * out[n - 1, i]
        return out

    @numba.njit(cache=True)
    def _trig_eval_nb(coef, freqs, points):
        out = np.empty(points.size, dtype=np.complex128)
        for i in range(points.size):
            acc = 0.0 + 0.0j
            xi = points[i]
            for j in range(freqs.size):
                ang = freqs[j] * xi
                acc += coef[j] * complex(np.cos(ang), np.sin(ang))
            out[i] = acc
        return out

    @numba.njit(cache=True)
    def _nonlinear_phase_nb(u, coupling, p, dt):
        flat = u.ravel()
        half = 0.5 * p
        for i in range(flat.size):
            z = flat[i]
            mod2 = z.real * z.real + z.imag * z.imag
            amp = mod2 if half == 1.0 else mod2 ** half
            ang = -coupling * dt * amp
            flat[i] = z * complex(np.cos(ang), np.sin(ang))
        return u

    @numba.njit(cache=True)
    def _potential_phase_nb(spec, m2, w, v, dt):
        for a in range(spec.shape[0]):
            for b in range(spec.shape[1]):
                ang = -dt * (m2[a] * w[b] + v[b])
                spec[a, b] *= complex(np.cos(ang), np.sin(ang))
        return spec

    numba_impl = types.SimpleNamespace(
        hermite_table=_hermite_table_nb,
        trig_eval=_trig_eval_nb,
        nonlinear_phase=_nonlinear_phase_nb,
        potential_phase=_potential_phase_nb,
        name="numba",
    )
else:  # pragma: no cover
    numba_impl = None


def _select():
    flag = os.environ.get("NLSBEAM_NO_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on") or numba_impl is None:
        return numpy_impl
    return numba_impl


active = _select()


def hermite_table(x, n_max):
    """Normalized Hermite functions psi_0..psi_{n_max} at points x (omega=1)."""
    return active.hermite_table(np.ascontiguousarray(x, dtype=np.float64), int(n_max))


def trig_eval(coef, freqs, points):
    """Evaluate sum_j coef[j] exp(i freqs[j] x) at arbitrary points."""
    return active.trig_eval(np.ascontiguousarray(coef, dtype=np.complex128),
                            np.ascontiguousarray(freqs, dtype=np.float64),
                            np.ascontiguousarray(points, dtype=np.float64))


def nonlinear_phase(u, coupling, p, dt):
    """In place: u <- u exp(-i coupling |u|^p dt).  u must be C-contiguous complex128."""
    if not (u.flags.c_contiguous and u.dtype == np.complex128):
        raise ValueError("nonlinear_phase works in place on C-contiguous complex128 arrays")
    return active.nonlinear_phase(u, float(coupling), float(p), float(dt))


def potential_phase(spec, m2, w, v, dt):
    """In place on theta-spectral data: multiply by exp(-i dt (m^2 w(x) + v(x)))."""
    if not (spec.flags.c_contiguous and spec.dtype == np.complex128):
        raise ValueError("potential_phase works in place on C-contiguous complex128 arrays")
    return active.potential_phase(spec, m2, w, v, float(dt))
