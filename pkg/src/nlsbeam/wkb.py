"""Power-matching hierarchy for the reduced stationary problem

    (-d_z^2 + omega^2 z^2 - E) phi = sigma h^q |phi|^p phi,   q = 1 - p (d-1)/4.

With eps = h^q, phi = sum eps^m phi_m and E = sum eps^m E_m, order m reads

    (H - E_0) phi_m = E_m phi_0 + sum_{j=1}^{m-1} E_j phi_{m-j} + sigma [phi^{p+1}]_{m-1},

where [.]_m is the eps^m coefficient.  phi_0 = exp(-omega z^2 / 2) (unit peak,
not unit mass), E_0 = omega, and phi_m is kept orthogonal to phi_0.
"""

from dataclasses import dataclass, field, replace
import math
import warnings
from typing import List, Optional

import numpy as np

from . import oscillator as osc

DEFECT_ABORT = 1e-8


class HierarchyError(RuntimeError):
    pass


@dataclass(frozen=True)
class WKBConfig:
    p: float = 2.0
    sigma: int = 1
    N: int = 1
    omega: float = 1.0
    d: int = 2
    s: float = 0.0
    shifted_mode: Optional[bool] = None   # None: on for N == 1 when h is given
    h: Optional[float] = None
    n_max: Optional[int] = None           # None: 64 * max(N, 1), capped at 256

    def __post_init__(self):
        if self.d != 2:
            raise ValueError("only d = 2 is implemented")
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 or -1")
        if not self.p > 0 and self.N > 0:
            raise ValueError("p must be positive")
        if self.N < 0:
            raise ValueError("N must be >= 0")
        if not self.q > 0:
            raise ValueError(f"q = 1 - p(d-1)/4 = {self.q:g} must be positive (p < 4)")
        if self.N >= 2 and not is_even(self.p):
            raise ValueError("N >= 2 requires an even integer p")
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @property
    def q(self):
        return 1.0 - self.p * (self.d - 1) / 4.0

    @property
    def shifted(self):
        if self.shifted_mode is None:
            return self.N == 1 and self.h is not None
        return bool(self.shifted_mode)

    @property
    def modes(self):
        if self.n_max is not None:
            return int(self.n_max)
        return min(256, 64 * max(self.N, 1))

    def alpha(self):
        """Residual exponent of the assembled two-/three-term quasimode."""
        return -1.0 + 2 * self.q if self.q <= 0.5 else -0.5 + self.q


@dataclass(frozen=True)
class WKBSolution:
    config: WKBConfig
    basis: osc.OscillatorBasis = field(repr=False)
    phis: List[np.ndarray] = field(repr=False)
    energies: List[float]
    defects: List[float]

    @property
    def q(self):
        return self.config.q

    @property
    def omega(self):
        return self.config.omega


def is_even(p):
    return float(p).is_integer() and int(p) % 2 == 0


def make_basis(config):
    power = config.p if is_even(config.p) else 2 * math.ceil(config.p / 2)
    return osc.build_basis(config.omega, config.modes, power=max(power, 2))


def solve_order0(config, basis):
    """phi_0 = exp(-omega z^2/2) in Hermite coefficients, and E_0 = omega."""
    if abs(basis.omega - config.omega) > 1e-14 * config.omega:
        raise ValueError("basis frequency does not match config.omega")
    phi0 = np.zeros(basis.n_max + 1)
    phi0[0] = (math.pi / config.omega) ** 0.25
    return phi0, float(config.omega)


def solvability_energy(rhs_nl, phi0):
    """E making rhs_nl + E phi0 orthogonal to phi0."""
    rhs_nl = np.asarray(rhs_nl)
    phi0 = np.asarray(phi0)
    n = min(rhs_nl.size, phi0.size)
    return -float(np.dot(rhs_nl[:n], phi0[:n]) / np.dot(phi0, phi0))


def invert_shifted(rhs, shift, basis):
    """Solve (H - E_0 - shift) f = rhs on the complement of the ground state."""
    rhs = np.asarray(rhs, dtype=np.float64)
    omega = basis.omega
    if shift >= 2 * omega:
        raise ValueError(f"shift {shift:g} closes the spectral gap 2*omega = {2 * omega:g}")
    norm = np.linalg.norm(rhs)
    if abs(rhs[0]) > 1e-9 * norm:
        raise ValueError("rhs is not orthogonal to the ground state")
    n = np.arange(rhs.size)
    out = np.zeros_like(rhs)
    out[1:] = rhs[1:] / (2 * omega * n[1:] - shift)
    return out


def _truncation_defect(values, basis):
    """Relative quadrature-L2 mass of ``values`` outside modes 0..n_max."""
    coeffs = osc.analyze(values, basis)
    back = basis.synth(coeffs)
    num = basis.inner(values - back, values - back)
    den = basis.inner(values, values)
    return math.sqrt(num / den) if den > 0 else 0.0


def solve_hierarchy(config, basis=None):
    """Solve orders 0..N; each order records the relative defect of its equation.

    The defect is the larger of the truncation of the nonlinear source and the
    residual of the coefficient equation.
    """
    basis = make_basis(config) if basis is None else basis
    phi0, e0 = solve_order0(config, basis)
    phis, energies, defects = [phi0], [e0], [0.0]
    if config.N == 0:
        return WKBSolution(config, basis, phis, energies, defects)
    if config.shifted and config.h is None:
        raise ValueError("shifted mode needs h")
    for m in range(1, config.N + 1):
        if is_even(config.p):
            src = osc.series_values(phis, config.p, basis, orders=m)[m - 1]
        else:
            f0 = basis.synth(phi0)
            src = np.abs(f0) ** config.p * f0
        rhs_nl = config.sigma * osc.analyze(src, basis)
        for j in range(1, m):
            rhs_nl = rhs_nl + energies[j] * phis[m - j]
        e_m = solvability_energy(rhs_nl, phi0)
        rhs = rhs_nl + e_m * phi0
        rhs[0] = 0.0    # rounding left by the projection
        shift = config.h ** config.q * e_m if (config.shifted and m == 1) else 0.0
        phi_m = invert_shifted(rhs, shift, basis)
        lhs = (basis.eigenvalues - e0 - shift) * phi_m
        eq = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300)
        defect = max(_truncation_defect(src, basis), eq)
        if defect > DEFECT_ABORT:
            raise HierarchyError(
                f"order {m}: defect {defect:.2e} exceeds {DEFECT_ABORT:g}; raise n_max")
        phis.append(phi_m)
        energies.append(e_m)
        defects.append(defect)
    return WKBSolution(config, basis, phis, energies, defects)


def check_h(h):
    """h must be 1/k for an integer k >= 1; returns k."""
    if not 0 < h < 1 and h != 1:
        raise ValueError(f"h must lie in (0, 1], got {h}")
    k = round(1.0 / h)
    if k < 1 or abs(k * h - 1.0) > 1e-12:
        raise ValueError(f"h = {h!r} is not of the form 1/k with integer k")
    return int(k)


def assemble(solution, h):
    """phi(.; h) coefficients, E(h) and lambda(h) = (1 + h E(h)) / h^2.

    lambda is the eigenvalue of the 2D stationary problem; for the ground
    state of  -d_x^2 + k^2 (1 + omega^2 x^2)  it is k^2 + omega k.
    """
    check_h(h)
    cfg = solution.config
    if cfg.shifted and cfg.h is not None and abs(cfg.h - h) > 1e-15:
        raise ValueError("shifted-mode solution was built for a different h")
    eps = h ** solution.q
    phi = np.zeros_like(solution.phis[0])
    energy = 0.0
    for m, (c, e) in enumerate(zip(solution.phis, solution.energies)):
        phi = phi + eps ** m * c
        energy += eps ** m * e
    correction = energy - solution.energies[0]
    if abs(correction) >= solution.energies[0]:
        warnings.warn(
            f"energy corrections {correction:.3g} exceed E_0 = {solution.energies[0]:.3g}; "
            "h is outside the regime where the expansion is solvable",
            RuntimeWarning, stacklevel=2)
    lam = (1.0 + h * energy) / h ** 2
    return phi, energy, lam


def reduced_residual(solution, h, z=None):
    """||(-d^2 + omega^2 z^2 - E(h)) phi - sigma h^q |phi|^p phi||_{L2(dz)} in the basis.

    Evaluated with an enlarged basis so that the nonlinear term is not truncated.
    """
    cfg = solution.config
    phi, energy, _ = assemble(solution, h)
    big = osc.build_basis(cfg.omega, min(2 * solution.basis.n_max + 64, 400),
                          power=solution.basis.power)
    c = np.zeros(big.n_max + 1)
    c[: phi.size] = phi
    vals = big.synth(c)
    lin = big.synth((big.eigenvalues - energy) * c)
    res = lin - cfg.sigma * h ** cfg.q * np.abs(vals) ** cfg.p * vals
    return math.sqrt(big.inner(res, res))


def solution_record(solution, h=None):
    rec = {
        "p": solution.config.p,
        "sigma": solution.config.sigma,
        "N": solution.config.N,
        "omega": solution.config.omega,
        "q": solution.q,
        "shifted_mode": solution.config.shifted,
        "n_max": solution.basis.n_max,
        "energies": list(solution.energies),
        "defects": list(solution.defects),
    }
    if h is not None:
        _, energy, lam = assemble(solution, h)
        rec.update({"h": h, "E_h": energy, "lambda": lam})
    return rec


def with_h(config, h):
    return replace(config, h=h)
