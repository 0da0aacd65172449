"""Warp profiles A(x) for the surface of revolution ds^2 = dx^2 + A(x)^2 dtheta^2.

Everything downstream works on the conjugated side, where the Laplacian
becomes  d_x^2 + A^{-2} d_theta^2 - V1  with

    V1 = A''/(2A) - (A')^2/(4A^2).

The geodesic sits at x = 0; near it k^2 A^{-2}(x) ~ k^2 (1 + c2 x^2) and the
transverse oscillator frequency is omega = sqrt(c2).
"""

from dataclasses import dataclass, field
import csv
import math
from typing import Callable, Optional

import numpy as np

from . import _kernels

A_FLOOR = 1e-6
PRESETS = ("paper", "flat", "toy")


@dataclass(frozen=True)
class MetricProfile:
    name: str
    A: Callable = field(repr=False)
    dA: Callable = field(repr=False)
    d2A: Callable = field(repr=False)
    c2: float
    omega: float
    v1_0: float
    # Closed-form overrides used by the "toy" preset, whose effective
    # potential is exactly quadratic rather than derived from a metric.
    inv_a2_override: Optional[Callable] = field(default=None, repr=False)
    v1_override: Optional[Callable] = field(default=None, repr=False)

    def inv_a2(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.inv_a2_override is not None:
            return self.inv_a2_override(x)
        return self.A(x) ** -2

    def v1(self, x):
        return v1(self, x)


def _paper_A(x):
    return np.sqrt((1.0 + np.cos(x) ** 2) / 2.0)


def _paper_dA(x):
    return -np.sin(2 * x) / (4.0 * _paper_A(x))


def _paper_d2A(x):
    a = _paper_A(x)
    return -np.cos(2 * x) / (2.0 * a) - np.sin(2 * x) ** 2 / (16.0 * a ** 3)


def _periodic_x(x):
    return (np.asarray(x, dtype=np.float64) + np.pi) % (2 * np.pi) - np.pi


def _spectral_profile(samples):
    """Closed trig-interpolant of uniform samples on [0, 2pi) and its derivatives."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    coef = np.fft.fft(samples) / n
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        # split the Nyquist mode symmetrically so derivatives stay real
        coef = np.append(coef, coef[n // 2] / 2)
        coef[n // 2] /= 2
        freqs = np.append(freqs, -freqs[n // 2])

    def make(order):
        c = coef * (1j * freqs) ** order

        def f(x):
            x = np.asarray(x, dtype=np.float64)
            return _kernels.trig_eval(c, freqs, x.ravel()).real.reshape(x.shape)
        return f

    return make(0), make(1), make(2)


def _taylor_data(A, dA, d2A):
    a0, a1, a2 = float(A(0.0)), float(dA(0.0)), float(d2A(0.0))
    c2 = 0.5 * (-2.0 * a2 / a0 ** 3 + 6.0 * a1 ** 2 / a0 ** 4)
    v1_0 = 0.5 * a2 / a0 - 0.25 * a1 ** 2 / a0 ** 2
    return a0, a1, c2, v1_0


def build_profile(A="paper", grid_n=512, require_elliptic=None, c2=0.5):
    """Validated MetricProfile from a preset name, a callable, or uniform samples.

    Presets: ``"paper"`` (A^2 = (1 + cos^2 x)/2), ``"flat"`` (A = 1, not
    elliptic) and ``"toy"`` (k^2 A^{-2} replaced by k^2 (1 + c2 x^2) and
    V1 = 0 on x in [-pi, pi)).  A callable is sampled on ``grid_n`` points;
    an array is taken as samples on a uniform grid of [0, 2pi).
    """
    if isinstance(A, str):
        if A == "paper":
            _, _, c2_, v10 = _taylor_data(_paper_A, _paper_dA, _paper_d2A)
            prof = MetricProfile("paper", _paper_A, _paper_dA, _paper_d2A,
                                 c2=c2_, omega=math.sqrt(c2_), v1_0=v10)
            require_elliptic = True if require_elliptic is None else require_elliptic
        elif A == "flat":
            one = lambda x: np.ones_like(np.asarray(x, dtype=np.float64))
            zero = lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
            prof = MetricProfile("flat", one, zero, zero, c2=0.0, omega=0.0, v1_0=0.0)
            require_elliptic = False if require_elliptic is None else require_elliptic
        elif A == "toy":
            if not c2 > 0:
                raise ValueError("toy preset needs c2 > 0")
            cc = float(c2)
            inv = lambda x: 1.0 + cc * _periodic_x(x) ** 2
            a = lambda x: inv(x) ** -0.5
            da = lambda x: -cc * _periodic_x(x) * inv(x) ** -1.5
            d2a = lambda x: -cc * inv(x) ** -1.5 + 3 * cc ** 2 * _periodic_x(x) ** 2 * inv(x) ** -2.5
            zero = lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
            prof = MetricProfile("toy", a, da, d2a, c2=cc, omega=math.sqrt(cc), v1_0=0.0,
                                 inv_a2_override=inv, v1_override=zero)
            require_elliptic = True if require_elliptic is None else require_elliptic
        else:
            raise ValueError(f"unknown preset {A!r}; choose from {PRESETS}")
    else:
        if callable(A):
            xs = 2 * np.pi * np.arange(grid_n) / grid_n
            samples = np.asarray(A(xs), dtype=np.float64)
            name = getattr(A, "__name__", "callable")
        else:
            samples = np.asarray(A, dtype=np.float64)
            name = "samples"
        if samples.ndim != 1 or samples.size < 8:
            raise ValueError("profile samples must be a 1D array of >= 8 points")
        fa, fda, fd2a = _spectral_profile(samples)
        a0, a1, c2_, v10 = _taylor_data(fa, fda, fd2a)
        prof = MetricProfile(name, fa, fda, fd2a, c2=c2_,
                             omega=math.sqrt(c2_) if c2_ > 0 else 0.0, v1_0=v10)
        require_elliptic = True if require_elliptic is None else require_elliptic
    _validate(prof, grid_n, require_elliptic)
    return prof


def _validate(prof, grid_n, require_elliptic):
    xs = 2 * np.pi * np.arange(max(grid_n, 64)) / max(grid_n, 64)
    if prof.inv_a2_override is None and np.min(prof.A(xs)) < A_FLOOR:
        raise ValueError(f"A must stay above {A_FLOOR:g}")
    if require_elliptic:
        if abs(float(prof.dA(0.0))) > 1e-10:
            raise ValueError("A'(0) != 0: x = 0 is not a critical point of A")
        if not prof.c2 > 0:
            raise ValueError("c2 <= 0: the geodesic at x = 0 is not elliptic")
        fd = fd_c2(prof)
        if abs(fd - prof.c2) > 1e-6:
            raise ValueError(f"c2 mismatch: stored {prof.c2}, finite difference {fd}")


def fd_c2(prof, step=1e-4):
    """Central-difference estimate of (1/2) d^2/dx^2 A^{-2} at x = 0."""
    f = prof.inv_a2(np.array([-step, 0.0, step]))
    return 0.5 * (f[0] - 2 * f[1] + f[2]) / step ** 2


def fd_odd_taylor(prof, step=1e-2):
    """Central-difference first and third derivatives of A^{-2} at x = 0."""
    f = prof.inv_a2(np.array([-2 * step, -step, 0.0, step, 2 * step]))
    d1 = (f[3] - f[1]) / (2 * step)
    d3 = (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * step ** 3)
    return d1, d3


def v1(profile, x):
    x = np.asarray(x, dtype=np.float64)
    if profile.v1_override is not None:
        return profile.v1_override(x)
    a, da, d2a = profile.A(x), profile.dA(x), profile.d2A(x)
    return 0.5 * d2a / a - 0.25 * da ** 2 / a ** 2


def effective_potential(profile, k, x):
    """Mode-k potential k^2 A^{-2}(x) + V1(x)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return k * k * profile.inv_a2(x) + v1(profile, x)


def load_profile_csv(path, require_elliptic=True):
    """Two-column CSV (x, A(x)) on a uniform grid of [0, 2pi)."""
    xs, vals = [], []
    seen_header = False
    with open(path, newline="") as fh:
        for num, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                vals.append(float(row[1]))
            except (ValueError, IndexError):
                if xs or seen_header:
                    raise ValueError(f"{path}: row {num} is not numeric: {row}") from None
                seen_header = True
    xs = np.asarray(xs)
    dx = np.diff(xs)
    if xs.size < 8 or np.max(np.abs(dx - 2 * np.pi / xs.size)) > 1e-9:
        raise ValueError("CSV x-column must be a uniform grid of [0, 2pi)")
    return build_profile(np.asarray(vals), grid_n=xs.size, require_elliptic=require_elliptic)
