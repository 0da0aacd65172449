"""Scaled harmonic-oscillator basis: u_n^w(z) = w^{1/4} psi_n(sqrt(w) z).

``(-d^2/dz^2 + w^2 z^2) u_n^w = w (2n + 1) u_n^w``.  Coefficient vectors are
plain float arrays indexed by mode number.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import roots_hermite

from . import _kernels

QUAD_MARGIN = 16
ORTHO_REJECT = 1e-8


class UnderResolvedError(ValueError):
    """A function is not resolved by the quadrature or grid it lives on."""


@dataclass(frozen=True)
class OscillatorBasis:
    omega: float
    n_max: int
    power: float
    nodes: np.ndarray = field(repr=False)      # z-nodes at frequency omega
    weights: np.ndarray = field(repr=False)    # int f dz ~ sum weights * f(nodes)
    table: np.ndarray = field(repr=False)      # table[n, i] = u_n(nodes[i])

    @property
    def n_quad(self):
        return self.nodes.size

    @property
    def eigenvalues(self):
        return self.omega * (2 * np.arange(self.n_max + 1) + 1.0)

    def evaluate(self, z, n_max=None):
        """Rows u_0..u_{n_max} evaluated at arbitrary points z."""
        n_max = self.n_max if n_max is None else n_max
        z = np.asarray(z, dtype=np.float64)
        s = math.sqrt(self.omega)
        tab = _kernels.hermite_table(s * z.ravel(), n_max)
        return (self.omega ** 0.25) * tab.reshape((n_max + 1,) + z.shape)

    def synth(self, coeffs, z=None):
        """Function values of sum_n coeffs[n] u_n at z (default: the nodes)."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if z is None:
            return coeffs @ self.table[: coeffs.size]
        rows = self.evaluate(z, n_max=coeffs.size - 1)
        return np.tensordot(coeffs, rows, axes=1)

    def analyze(self, f, check_tail=True):
        return analyze(f, self, check_tail=check_tail)

    def inner(self, f, g):
        """Quadrature inner product of two functions sampled at the nodes."""
        return float(np.sum(self.weights * f * g))


def quad_size(n_max, power):
    """Node count that integrates (power+1)-fold products of modes <= n_max."""
    return math.ceil(((power + 1) * n_max + 1) / 2) + QUAD_MARGIN


def build_basis(omega, n_max, power=2):
    """Oscillator basis at frequency ``omega`` with modes 0..n_max.

    Quadrature is Gauss-Hermite; the weights are written as Christoffel
    numbers of the Hermite *functions*, 1 / sum_k psi_k(x_i)^2, which avoids
    the overflow of w_i exp(x_i^2) at large node counts.
    """
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    if power < 0:
        raise ValueError("power must be >= 0")
    nq = quad_size(n_max, power)
    x, _ = roots_hermite(nq)
    full = _kernels.hermite_table(x, nq - 1)
    w1 = 1.0 / np.sum(full * full, axis=0)
    s = math.sqrt(omega)
    basis = OscillatorBasis(
        omega=float(omega),
        n_max=n_max,
        power=float(power),
        nodes=x / s,
        weights=w1 / s,
        table=(omega ** 0.25) * full[: n_max + 1],
    )
    err = orthonormality_error(basis)
    if err > ORTHO_REJECT:
        raise ValueError(
            f"n_max={n_max} loses orthonormality ({err:.2e} > {ORTHO_REJECT:g})")
    return basis


def orthonormality_error(basis):
    t = basis.table
    gram = (t * basis.weights) @ t.T
    return float(np.max(np.abs(gram - np.eye(t.shape[0]))))


def analyze(f, basis, check_tail=True):
    """Hermite coefficients <f, u_n> of samples ``f`` taken at the nodes."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != basis.nodes.shape:
        raise ValueError("f must be sampled at the basis quadrature nodes")
    if check_tail:
        mass = basis.weights * f * f
        total = float(np.sum(mass))
        if total > 0 and (mass[0] + mass[-1]) > 1e-10 * total:
            raise UnderResolvedError(
                "function carries mass at the outermost quadrature nodes")
    return basis.table @ (basis.weights * f)


def synth(coeffs, basis, z=None):
    return basis.synth(coeffs, z)


def _as_function(phi, basis):
    if isinstance(phi, np.ndarray) and phi.ndim == 1:
        return basis.synth(phi)
    total = np.zeros_like(basis.nodes)
    for weight, coeffs in phi:
        total += weight * basis.synth(coeffs)
    return total


def _check_even_power(p, basis):
    if p < 0 or p != int(p) or int(p) % 2:
        raise ValueError(
            f"p={p!r} is not an even integer; use the grid path for |phi|^p phi")
    if p > basis.power:
        raise UnderResolvedError(
            f"basis quadrature sized for power {basis.power:g}, requested {p}")


def expand_nonlinear(phi, p, basis):
    """Hermite coefficients of phi^{p+1} for even p.

    ``phi`` is a coefficient vector or a list of ``(weight, coeffs)`` pairs,
    which are summed before the power is taken.
    """
    _check_even_power(p, basis)
    f = _as_function(phi, basis)
    return analyze(f ** (int(p) + 1), basis)


def series_values(phis, p, basis, orders=None):
    """Node values of the eps^m coefficients of (sum_j eps^j phi_j)^{p+1}.

    The truncated power series is multiplied out pointwise at the quadrature
    nodes; orders 0..orders-1 are returned (default: len(phis)).
    """
    _check_even_power(p, basis)
    vals = [basis.synth(c) for c in phis]
    n = len(vals) if orders is None else orders
    series = [np.ones_like(vals[0])] + [np.zeros_like(vals[0]) for _ in range(n - 1)]
    for _ in range(int(p) + 1):
        new = [np.zeros_like(vals[0]) for _ in range(n)]
        for i in range(n):
            for j in range(min(n - i, len(vals))):
                new[i + j] += series[i] * vals[j]
        series = new
    return series


def series_power(phis, p, basis, orders=None):
    """Hermite coefficients of each order returned by :func:`series_values`."""
    return [analyze(s, basis) for s in series_values(phis, p, basis, orders)]


def grid_power_coeffs(phi, p, basis):
    """Coefficients of |phi|^p phi for any real p >= 0 (pointwise at the nodes)."""
    f = _as_function(phi, basis)
    return analyze(np.abs(f) ** p * f, basis)


# -- invariant checks ---------------------------------------------------------

def second_derivative_rows(basis):
    """u_n'' at the nodes from the ladder identity for Hermite functions."""
    n_max = basis.n_max
    t = basis.evaluate(basis.nodes, n_max=n_max + 2)
    out = np.empty((n_max + 1, basis.n_quad))
    for n in range(n_max + 1):
        lower = math.sqrt(n * (n - 1)) * t[n - 2] if n >= 2 else 0.0
        upper = math.sqrt((n + 1) * (n + 2)) * t[n + 2]
        out[n] = 0.5 * basis.omega * (lower - (2 * n + 1) * t[n] + upper)
    return out


def eigen_residuals(basis):
    """Relative quadrature-L2 residual of (-d^2 + w^2 z^2 - w(2n+1)) u_n, per n."""
    d2 = second_derivative_rows(basis)
    z = basis.nodes
    res = -d2 + (basis.omega ** 2) * z * z * basis.table \
        - basis.eigenvalues[:, None] * basis.table
    num = np.sqrt(np.sum(basis.weights * res * res, axis=1))
    den = np.sqrt(np.sum(basis.weights * basis.table ** 2, axis=1))
    return num / (den * basis.eigenvalues)


def zero_count(basis, n, npts=20001):
    """Sign changes of u_n on a fine grid covering its oscillatory region."""
    zmax = (math.sqrt(2 * n + 1) + 4.0) / math.sqrt(basis.omega)
    z = np.linspace(-zmax, zmax, npts)
    vals = basis.evaluate(z, n_max=n)[n]
    s = np.sign(vals[np.abs(vals) > 1e-200])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def parity_error(basis, npts=401):
    z = np.linspace(0.0, 3.0 * math.sqrt(2 * basis.n_max + 1) / math.sqrt(basis.omega), npts)
    rows = basis.evaluate(z)
    rows_m = basis.evaluate(-z)
    sign = (-1.0) ** np.arange(basis.n_max + 1)
    return float(np.max(np.abs(rows_m - sign[:, None] * rows)))


def roundtrip_error(basis):
    """Max error of analyze(synth(c)) for unit vectors up to n_max // 2."""
    worst = 0.0
    for n in range(basis.n_max // 2 + 1):
        c = np.zeros(basis.n_max + 1)
        c[n] = 1.0
        worst = max(worst, float(np.max(np.abs(analyze(basis.synth(c), basis) - c))))
    return worst


def invariant_report(omega=1.0, n_max=20, power=2):
    """Run the basis invariants; returns a list of (name, value, bar, passed)."""
    basis = build_basis(omega, n_max, power)
    rows = []
    ortho = orthonormality_error(basis)
    rows.append(("orthonormality", ortho, 1e-10, ortho <= 1e-10))
    eig = float(np.max(eigen_residuals(basis)))
    rows.append(("eigen_residual", eig, 1e-8, eig <= 1e-8))
    bad = [n for n in range(n_max + 1) if zero_count(basis, n) != n]
    rows.append(("zero_count_mismatches", float(len(bad)), 0.0, not bad))
    par = parity_error(basis)
    rows.append(("parity", par, 1e-12, par <= 1e-12))
    rt = roundtrip_error(basis)
    rows.append(("roundtrip", rt, 1e-10, rt <= 1e-10))
    return rows


# -- Fourier decay of |u_n|^p u_n ---------------------------------------------

def fourier_decay_slope(n, p, n_grid=2 ** 16, length=None, bins=24):
    """Log-log decay slope of the Fourier envelope of v = |u_n|^p u_n.

    The envelope is the maximum of |v_hat| over log-spaced bins of frequency
    indices in [8, n_grid/8]; a least-squares line through log(bin centre)
    and log(envelope) gives the slope.
    """
    if n < 1:
        raise ValueError("n must be >= 1 so that u_n has a zero")
    if p <= 0 or (float(p).is_integer() and int(p) % 2 == 0):
        raise ValueError("p must be positive and not an even integer")
    if length is None:
        length = 2.0 * (math.sqrt(2 * n + 1) + 8.0)
    x = (np.arange(n_grid) - n_grid // 2) * (length / n_grid)
    u = _kernels.hermite_table(x, n)[n]
    v = np.abs(u) ** p * u
    spec = np.abs(np.fft.rfft(v)) * (length / n_grid)
    lo, hi = 8, n_grid // 8
    edges = np.unique(np.round(np.geomspace(lo, hi, bins + 1)).astype(int))
    if edges.size < 4:
        raise ValueError("fit window too narrow")
    centres, env = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = spec[a:b]
        i = int(np.argmax(seg))
        centres.append(a + i)
        env.append(seg[i])
    lx = np.log(2 * np.pi * np.asarray(centres, dtype=float) / length)
    ly = np.log(np.asarray(env))
    design = np.vstack([lx, np.ones_like(lx)]).T
    if np.linalg.cond(design) > 1e6:
        raise ValueError("fit window too narrow for a stable slope")
    slope, _ = np.linalg.lstsq(design, ly, rcond=None)[0]
    return float(slope)
