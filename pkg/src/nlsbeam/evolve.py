"""Split-step evolution of the conjugated NLS on the torus.

    i u_t = -Dt u + sigma |u|^p u,   Dt = d_x^2 + A^{-2} d_theta^2 - V1,

so a stationary solution (Dt + lambda) phi = sigma |phi|^p phi evolves as
exp(-i lambda t) phi.  One Strang step is a/2 b/2 c b/2 a/2 with

    a: exp(-i xi^2 dt)                        (Fourier in x)
    b: exp(-i (m^2 A^{-2}(x) + V1(x)) dt)    (Fourier in theta)
    c: exp(-i sigma |u|^p dt)                 (pointwise)

Consecutive a-halves are fused between records.
"""

from dataclasses import dataclass, field, asdict
import math
from typing import List, Optional

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .fitting import fit_slope
from .geometry import effective_potential
from .oscillator import UnderResolvedError
from .quasimode import TAIL_GUARD, top_octave_fraction, tube_mass_out

PHASE_GUARD = 0.5
MAX_STEPS = 10 ** 7
DEFAULT_DT_FACTOR = 0.1
EPS_P1 = 0.1
C0_LOG = 0.1


class EvolutionError(RuntimeError):
    """A guard tripped mid-run; ``trace`` holds the records taken so far."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class EvolveConfig:
    t_final: float = 0.0
    dt: Optional[float] = None        # None: DEFAULT_DT_FACTOR * h^2
    p: float = 2.0
    sigma: int = 1
    record_every: int = 1
    delta: float = 0.1
    hk_order: int = 2
    splitting: str = "strang"

    def __post_init__(self):
        if self.splitting != "strang":
            raise ValueError("only strang splitting is implemented")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if self.hk_order < 0 or self.hk_order % 2:
            raise ValueError("hk_order must be a non-negative even integer")
        if self.sigma not in (-1, 0, 1):
            raise ValueError("sigma must be -1, 0 or +1")
        if self.p < 0:
            raise ValueError("p must be >= 0")

    def time_step(self, h):
        """(dt, n_steps) with n_steps * dt == t_final exactly."""
        dt0 = DEFAULT_DT_FACTOR * h * h if self.dt is None else self.dt
        if self.t_final == 0:
            return dt0, 0
        n = math.ceil(self.t_final / dt0 - 1e-9)
        if n > MAX_STEPS:
            raise ValueError(f"t_final/dt = {n} exceeds {MAX_STEPS}")
        return self.t_final / n, n


@dataclass
class EvolutionTrace:
    times: List[float] = field(default_factory=list)
    mass: List[float] = field(default_factory=list)
    tube_mass_out: List[float] = field(default_factory=list)
    dist_to_app: List[float] = field(default_factory=list)
    hkh_norm: List[float] = field(default_factory=list)

    COLUMNS = ("t", "mass", "tube_mass_out", "dist_to_app", "hkh_norm")

    def rows(self):
        return list(zip(self.times, self.mass, self.tube_mass_out,
                        self.dist_to_app, self.hkh_norm))

    def mass_drift(self):
        m0 = self.mass[0]
        return max(abs(m / m0 - 1.0) for m in self.mass) if m0 > 0 else 0.0

    def as_dict(self):
        return asdict(self)


class Propagator:
    """Precomputed phases for one grid, profile and step size."""

    def __init__(self, grid, profile, dt, p, sigma):
        self.grid = grid
        self.dt = float(dt)
        self.p = float(p)
        self.sigma = float(sigma)
        x = grid.x
        self.m2 = np.ascontiguousarray(grid.m ** 2)
        self.w = np.ascontiguousarray(profile.inv_a2(x), dtype=np.float64)
        self.v = np.ascontiguousarray(profile.v1(x), dtype=np.float64)
        xi2 = grid.xi ** 2
        self.kin_half = np.exp(-0.5j * dt * xi2)[None, :]
        self.kin_full = np.exp(-1j * dt * xi2)[None, :]

    def kinetic(self, u, full):
        spec = sfft.fft(u, axis=1)
        spec *= self.kin_full if full else self.kin_half
        return sfft.ifft(spec, axis=1)

    def potential_half(self, u):
        spec = np.ascontiguousarray(sfft.fft(u, axis=0))
        _kernels.potential_phase(spec, self.m2, self.w, self.v, 0.5 * self.dt)
        return sfft.ifft(spec, axis=0)

    def nonlinear(self, u):
        if self.sigma:
            u = np.ascontiguousarray(u)
            _kernels.nonlinear_phase(u, self.sigma, self.p, self.dt)
        return u

    def advance(self, u, n):
        """n Strang steps with the inner kinetic half-steps fused."""
        if n == 0:
            return u
        u = self.kinetic(u, full=False)
        for i in range(n):
            u = self.potential_half(u)
            u = self.nonlinear(u)
            u = self.potential_half(u)
            u = self.kinetic(u, full=i < n - 1)
        return u


def step(u, dt, profile, p, sigma, grid):
    """One Strang step of the full equation; returns a new array."""
    _check_field(u)
    return Propagator(grid, profile, dt, p, sigma).advance(np.asarray(u, np.complex128), 1)


def hkh_norm(values, grid, h, order=2):
    """||(1 - h^2 Lap)^{order/2} u||_{L2} on the flat torus, order even."""
    if order < 0 or order % 2:
        raise ValueError("order must be a non-negative even integer")
    spec = np.abs(sfft.fft2(values)) ** 2
    mult = (1.0 + h * h * (grid.m[:, None] ** 2 + grid.xi[None, :] ** 2)) ** order
    total = float(np.sum(mult * spec))
    return math.sqrt(total * grid.dtheta * grid.dx / (grid.n_theta * grid.n_x))


def _check_field(u):
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("field contains NaN or inf")
    for axis in (0, 1):
        if top_octave_fraction(u, axis=axis) > TAIL_GUARD:
            raise UnderResolvedError(f"spectral tail above {TAIL_GUARD:g} along axis {axis}")


def phase_guard(config, profile, k, grid):
    dt, _ = config.time_step(1.0 / k)
    vmax = float(np.max(effective_potential(profile, k, grid.x)))
    if dt * vmax > PHASE_GUARD:
        raise ValueError(f"dt * max potential = {dt * vmax:.3g} exceeds {PHASE_GUARD}")
    return dt * vmax


def run(u0, config, profile):
    """Integrate from the quasimode u0 to config.t_final.

    dist_to_app is measured against exp(-i lambda t) u0.  Guard trips raise
    EvolutionError carrying the partial trace.
    """
    grid, h = u0.grid, u0.h
    phase_guard(config, profile, u0.k, grid)
    dt, n_steps = config.time_step(h)
    prop = Propagator(grid, profile, dt, config.p, config.sigma)
    trace = EvolutionTrace()

    def record(t, u):
        trace.times.append(t)
        trace.mass.append(grid.l2(u) ** 2)
        trace.tube_mass_out.append(tube_mass_out(u, grid, h, config.delta))
        trace.dist_to_app.append(grid.l2(u - np.exp(-1j * u0.lam * t) * u0.values))
        trace.hkh_norm.append(hkh_norm(u, grid, h, config.hk_order))

    u = np.array(u0.values, dtype=np.complex128)
    try:
        _check_field(u)
    except (FloatingPointError, UnderResolvedError) as exc:
        raise EvolutionError(str(exc), trace) from exc
    record(0.0, u)
    done = 0
    while done < n_steps:
        n = min(config.record_every, n_steps - done)
        u = prop.advance(u, n)
        done += n
        try:
            _check_field(u)
        except (FloatingPointError, UnderResolvedError) as exc:
            raise EvolutionError(f"step {done}: {exc}", trace) from exc
        record(done * dt, u)
    return trace


def final_state(u0, config, profile):
    """Field at t_final without diagnostics (used by the convergence check)."""
    dt, n = config.time_step(u0.h)
    prop = Propagator(u0.grid, profile, dt, config.p, config.sigma)
    return prop.advance(np.array(u0.values, dtype=np.complex128), n)


def self_convergence(u0, config, profile):
    """||u_dt - u_dt/2|| / ||u_dt/2 - u_dt/4|| at t_final; about 4 for Strang."""
    dt, _ = config.time_step(u0.h)
    states = []
    for f in (1, 2, 4):
        cfg = EvolveConfig(**{**asdict(config), "dt": dt / f})
        states.append(final_state(u0, cfg, profile))
    g = u0.grid
    return g.l2(states[0] - states[1]) / g.l2(states[1] - states[2])


# -- horizons and sweeps ---------------------------------------------------------

def horizon(law, h, p, c0=C0_LOG, eps=EPS_P1, s=0.0, d=2):
    """Final time for a named law.

    "power": h^p, or h^{1+eps} when p = 1.
    "log":   c0 h^{p((d-1)/4 - s)} ln(1/h).
    "zero":  0.
    A number is returned as a fixed time.
    """
    if isinstance(law, (int, float)):
        return float(law)
    if law == "power":
        return h ** (1.0 + eps) if p == 1 else h ** p
    if law == "log":
        return c0 * h ** (p * ((d - 1) / 4.0 - s)) * math.log(1.0 / h)
    if law == "zero":
        return 0.0
    raise ValueError(f"unknown horizon law {law!r}")


def horizon_point(k, p, sigma, N, profile, law, template, grid=None):
    from . import quasimode as qm
    sol = qm.solve_for(p=p, sigma=sigma, N=N, profile=profile, h=1.0 / k)
    u0 = qm.build_quasimode(sol, k, profile, grid)
    t_final = horizon(law, u0.h, p)
    cfg = EvolveConfig(**{**asdict(template), "t_final": t_final, "p": p, "sigma": sigma})
    trace = run(u0, cfg, profile)
    return u0, trace


def horizon_sweep(p, sigma, k_list, config_template, profile, N=1, law="power"):
    """Rows {k, h, T, sup_dist, sup_tube, tube0, mass_drift} and the fitted nu."""
    k_list = [int(k) for k in k_list]
    if len(k_list) < 3 or sorted(set(k_list)) != k_list:
        raise ValueError("k_list must be strictly ascending with >= 3 entries")
    rows, traces = [], []
    for k in k_list:
        u0, tr = horizon_point(k, p, sigma, N, profile, law, config_template)
        traces.append((u0.h, tr))
        rows.append(trace_summary(k, u0.h, tr))
    return rows, nu_fit(rows), traces


def trace_summary(k, h, tr):
    return {"k": k, "h": h, "T": tr.times[-1], "sup_dist": max(tr.dist_to_app),
            "sup_tube": max(tr.tube_mass_out), "tube0": tr.tube_mass_out[0],
            "mass_drift": tr.mass_drift(), "records": len(tr.times)}


def nu_fit(rows):
    """Slope of sup_t dist against h; None if a distance vanishes."""
    pairs = [(r["h"], r["sup_dist"]) for r in rows]
    if any(v <= 0 for _, v in pairs):
        return None
    return fit_slope(pairs)


def gronwall_fit(traces, p=2.0, s=0.0, d=2):
    """Fit log dist = log C1 + beta log h + C2 h^{p(s-(d-1)/4)} t over all traces.

    ``traces`` is a list of (h, EvolutionTrace).  C1 is then raised until the
    model bounds every record.  The misfit is the relative L2 distance of the
    log-curves.
    """
    rows = []
    for h, tr in traces:
        for t, dist in zip(tr.times, tr.dist_to_app):
            if t > 0 and dist > 0:
                rows.append((math.log(h), h ** (p * (s - (d - 1) / 4.0)) * t, math.log(dist)))
    if len(rows) < 3:
        raise ValueError("not enough nonzero records for a fit")
    a = np.array(rows)
    design = np.column_stack([np.ones(len(a)), a[:, 0], a[:, 1]])
    coef, *_ = np.linalg.lstsq(design, a[:, 2], rcond=None)
    model = design @ coef
    lift = float(np.max(a[:, 2] - model))
    model = model + lift
    misfit = float(np.linalg.norm(model - a[:, 2]) / np.linalg.norm(a[:, 2]))
    return {"C1": math.exp(coef[0] + lift), "beta": float(coef[1]), "C2": float(coef[2]),
            "misfit": misfit, "points": len(a)}
