"""Two-dimensional quasimodes on the torus and their diagnostics.

The field is u(theta, x) = exp(i k theta) T_{h,0} phi (x) with h = 1/k, stored
as an (n_theta, n_x) complex array on x in [-pi, pi).  It is a quasimode of

    (Dt + lambda) u = sigma |u|^p u,   Dt = d_x^2 + A^{-2} d_theta^2 - V1,

where sigma is the NLS coupling.  The reduction to the oscillator problem flips
the sign, so the WKB hierarchy is solved with sigma_reduced = -sigma.
"""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np
import scipy.fft as sfft

from . import _kernels
from . import wkb as wkbm
from .oscillator import UnderResolvedError

TAIL_GUARD = 1e-8


def next_pow2(n):
    return 1 << max(0, math.ceil(math.log2(max(n, 1))))


@dataclass(frozen=True)
class TorusGrid:
    n_theta: int
    n_x: int

    def __post_init__(self):
        for n in (self.n_theta, self.n_x):
            if n < 2 or n & (n - 1):
                raise ValueError(f"grid sizes must be powers of two, got {n}")

    @classmethod
    def auto(cls, k, min_x=64):
        h = 1.0 / k
        return cls(n_theta=next_pow2(8 * k), n_x=max(min_x, next_pow2(64 / math.sqrt(h))))

    @property
    def dtheta(self):
        return 2 * np.pi / self.n_theta

    @property
    def dx(self):
        return 2 * np.pi / self.n_x

    @property
    def x(self):
        return -np.pi + self.dx * np.arange(self.n_x)

    @property
    def theta(self):
        return self.dtheta * np.arange(self.n_theta)

    @property
    def m(self):
        return np.fft.fftfreq(self.n_theta, d=1.0 / self.n_theta)

    @property
    def xi(self):
        return np.fft.fftfreq(self.n_x, d=1.0 / self.n_x)

    def check_resolves(self, k):
        if self.n_theta < 8 * k:
            raise UnderResolvedError(f"n_theta={self.n_theta} < 8k = {8 * k}")
        if self.n_x < 64 * math.sqrt(k):
            raise UnderResolvedError(
                f"n_x={self.n_x} < 64/sqrt(h) = {64 * math.sqrt(k):.1f}")

    def l2(self, u):
        return math.sqrt(self.dtheta * self.dx * float(np.sum(np.abs(u) ** 2)))


@dataclass(frozen=True)
class QuasimodeField:
    values: np.ndarray = field(repr=False)
    lam: float
    h: float
    k: int
    p: float
    sigma: int
    grid: TorusGrid
    solution: Optional[wkbm.WKBSolution] = field(default=None, repr=False)
    profile_name: str = ""

    @property
    def norm(self):
        return self.grid.l2(self.values)


@dataclass
class Diagnostics:
    tube_mass_out: float = float("nan")
    hr_norms: dict = field(default_factory=dict)
    residual_l2: float = float("nan")
    reduced_residual: float = float("nan")

    def as_dict(self):
        return {
            "tube_mass_out": self.tube_mass_out,
            "hr_norms": {str(r): v for r, v in sorted(self.hr_norms.items())},
            "residual_l2": self.residual_l2,
            "reduced_residual": self.reduced_residual,
        }


# -- rescaling T_{h,s} w(x) = h^{s/2 - 1/4} w(h^{-1/2} x) ---------------------

def _interp_setup(w):
    n = w.size
    coef = np.fft.fft(np.fft.ifftshift(w)) / n
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(float)
    if n % 2 == 0:
        coef = np.append(coef, coef[n // 2] / 2)
        coef[n // 2] /= 2
        freqs = np.append(freqs, -freqs[n // 2])
    return coef, freqs


def top_octave_fraction(w, axis=-1):
    """Fraction of spectral mass in the top octave of |frequency| along ``axis``."""
    spec = np.abs(np.fft.fft(w, axis=axis)) ** 2
    n = w.shape[axis]
    f = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    mask = f >= n / 4
    shape = [1] * w.ndim
    shape[axis] = n
    top = float(np.sum(spec * mask.reshape(shape)))
    total = float(np.sum(spec))
    return top / total if total > 0 else 0.0


def rescale(w, h, s=0.0, direction="forward", length=None):
    """Apply T_{h,s} (or its inverse) to samples on a centred uniform grid.

    ``w`` lives on x_j = -L/2 + j L/n.  Values are obtained by band-limited
    (trigonometric) interpolation; points mapped outside the box read zero.
    """
    w = np.asarray(w, dtype=np.complex128)
    n = w.size
    length = 2 * np.pi if length is None else float(length)
    if s < 0:
        raise ValueError("s must be >= 0")
    x = -length / 2 + (length / n) * np.arange(n)
    if direction == "forward":
        pts, amp = x / math.sqrt(h), h ** (s / 2 - 0.25)
    elif direction == "inverse":
        pts, amp = x * math.sqrt(h), h ** (0.25 - s / 2)
    else:
        raise ValueError("direction must be 'forward' or 'inverse'")
    coef, freqs = _interp_setup(w)
    inside = np.abs(pts) < length / 2
    out = np.zeros(n, dtype=np.complex128)
    # map to the periodic coordinate used by the FFT (origin at the centre)
    out[inside] = _kernels.trig_eval(coef, freqs * (2 * np.pi / length), pts[inside])
    out *= amp
    if top_octave_fraction(out) > TAIL_GUARD or top_octave_fraction(w) > TAIL_GUARD:
        raise UnderResolvedError("rescaling aliases: grid too coarse for both scales")
    edge = np.abs(x) > 0.45 * length
    tot = float(np.sum(np.abs(out) ** 2))
    if tot > 0 and float(np.sum(np.abs(out[edge]) ** 2)) > TAIL_GUARD * tot:
        raise UnderResolvedError("rescaled function reaches the edge of the box")
    return out


def homogeneous_norm(w, r, length=None):
    """||w||_{H-dot^r} of samples on a centred box of the given length."""
    w = np.asarray(w)
    n = w.size
    length = 2 * np.pi if length is None else float(length)
    xi = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    spec = np.abs(np.fft.fft(w)) ** 2
    weight = np.abs(xi) ** (2 * r) if r else np.ones_like(xi)
    return math.sqrt(float(np.sum(weight * spec)) * length / n ** 2)


# -- construction --------------------------------------------------------------

def solve_for(p=2.0, sigma=1, N=1, profile=None, h=None, shifted_mode=None, n_max=None):
    """WKB hierarchy for the NLS coupling ``sigma`` on ``profile`` (sign flipped)."""
    cfg = wkbm.WKBConfig(p=p, sigma=-int(sigma), N=N, omega=profile.omega, h=h,
                         shifted_mode=shifted_mode, n_max=n_max)
    return wkbm.solve_hierarchy(cfg)


def build_quasimode(solution, k, profile, grid=None):
    k = int(k)
    if k <= 4:
        raise ValueError("k <= 4 (h >= 1/4) is outside the asymptotic regime")
    h = 1.0 / k
    grid = TorusGrid.auto(k) if grid is None else grid
    grid.check_resolves(k)
    if abs(profile.omega - solution.omega) > 1e-12:
        raise ValueError("solution omega does not match the profile")
    phi, _, lam = wkbm.assemble(solution, h)
    z = grid.x / math.sqrt(h)
    psi = h ** -0.25 * solution.basis.synth(phi, z)
    phase = np.exp(1j * k * grid.theta)
    values = phase[:, None] * psi[None, :]
    return QuasimodeField(values=values, lam=lam, h=h, k=k, p=solution.config.p,
                          sigma=-solution.config.sigma, grid=grid, solution=solution,
                          profile_name=profile.name)


def apply_stationary(values, grid, profile, lam, p, sigma):
    """(Dt + lambda) u - sigma |u|^p u, spectrally in both directions."""
    for axis in (0, 1):
        if top_octave_fraction(values, axis=axis) > TAIL_GUARD:
            raise UnderResolvedError(f"spectral tail above {TAIL_GUARD:g} along axis {axis}")
    x = grid.x
    uhat = sfft.fft(values, axis=1)
    dxx = sfft.ifft(-(grid.xi ** 2)[None, :] * uhat, axis=1)
    that = sfft.fft(values, axis=0)
    dtt = sfft.ifft(-(grid.m ** 2)[:, None] * that, axis=0)
    out = dxx + profile.inv_a2(x)[None, :] * dtt - profile.v1(x)[None, :] * values + lam * values
    if sigma:
        out = out - sigma * np.abs(values) ** p * values
    return out


def residual(u, profile, p=None, sigma=None):
    p = u.p if p is None else p
    sigma = u.sigma if sigma is None else sigma
    r = apply_stationary(u.values, u.grid, profile, u.lam, p, sigma)
    res = u.grid.l2(r)
    return Diagnostics(residual_l2=res, reduced_residual=u.h * res)


def hr_norm(values, grid, r):
    spec = np.abs(sfft.fft2(values)) ** 2
    w = 1.0 + grid.m[:, None] ** 2 + grid.xi[None, :] ** 2
    total = float(np.sum(w ** r * spec))
    return math.sqrt(total * grid.dtheta * grid.dx / (grid.n_theta * grid.n_x))


def tube_mass_out(values, grid, h, delta):
    mass = np.sum(np.abs(values) ** 2, axis=0)
    outside = np.abs(grid.x) > h ** (0.5 - delta)
    total = float(np.sum(mass))
    return float(np.sum(mass[outside])) / total if total > 0 else 0.0


def localization(u, delta, rs=(0, 1, 2)):
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    return Diagnostics(
        tube_mass_out=tube_mass_out(u.values, u.grid, u.h, delta),
        hr_norms={r: hr_norm(u.values, u.grid, r) for r in rs},
    )


def diagnose(u, profile, delta=0.1):
    d = localization(u, delta)
    r = residual(u, profile)
    d.residual_l2, d.reduced_residual = r.residual_l2, r.reduced_residual
    return d


def diagnostics_record(u, diag):
    rec = {"k": u.k, "h": u.h, "lambda": u.lam, "norm": u.norm,
           "n_theta": u.grid.n_theta, "n_x": u.grid.n_x}
    rec.update(diag.as_dict())
    return rec


def build_and_diagnose(k, p=2.0, sigma=1, N=1, profile=None, delta=0.1,
                       shifted_mode=None, grid=None):
    """One sweep point: solve, build at k, and run all diagnostics."""
    from .geometry import build_profile
    profile = build_profile("paper") if profile is None else profile
    sol = solve_for(p=p, sigma=sigma, N=N, profile=profile, h=1.0 / k,
                    shifted_mode=shifted_mode)
    u = build_quasimode(sol, k, profile, grid)
    return u, diagnose(u, profile, delta)


def field_rows(u):
    """(theta index, x index, Re u, Im u) rows for the CSV dump."""
    it, ix = np.meshgrid(np.arange(u.grid.n_theta), np.arange(u.grid.n_x), indexing="ij")
    return np.column_stack([it.ravel(), ix.ravel(), u.values.real.ravel(), u.values.imag.ravel()])
