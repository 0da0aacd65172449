"""Independent reference values for the oscillator hierarchy.

Nothing here touches the Hermite basis: the closed form uses Gaussian
integrals and the dense solver works on a uniform periodic grid.
"""

import math

import numpy as np
import scipy.linalg as sla


def gaussian_integral(a):
    """int exp(-a z^2) dz."""
    return math.sqrt(math.pi / a)


def first_energy(p, sigma, omega):
    """E_1 from  <E_1 phi_0 + sigma phi_0^{p+1}, phi_0> = 0,  phi_0 = exp(-omega z^2/2)."""
    num = gaussian_integral((p + 2) * omega / 2.0)
    den = gaussian_integral(omega)
    return -sigma * num / den


def fourier_d2_matrix(n, length):
    """Dense spectral second-derivative matrix on n periodic points."""
    xi = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        xi[n // 2] = 0.0      # drop the unpaired Nyquist mode
    col = np.real(np.fft.ifft(-(xi ** 2)))
    return sla.toeplitz(col)


def dense_hierarchy(p=2, sigma=1, N=2, omega=1.0, n=2048, length=None):
    """Energies E_0..E_N and orders phi_0..phi_N on a dense grid.

    Same normalization as the basis solver: phi_0 has unit peak and each
    phi_m (m >= 1) is orthogonal to it.  Returns (z, energies, phis).
    """
    if length is None:
        length = 2 * 14.0 / math.sqrt(omega)
    z = -length / 2 + (length / n) * np.arange(n)
    dz = length / n
    H = -fourier_d2_matrix(n, length) + np.diag((omega * z) ** 2)
    evals, evecs = np.linalg.eigh(H)
    g = evecs[:, 0]
    phi0 = g / g[n // 2]
    e0 = float(evals[0])
    gap = evals[1:] - e0
    rest = evecs[:, 1:]
    phis, energies = [phi0], [e0]
    for m in range(1, N + 1):
        series = _series(phis, p, m - 1)
        rhs = sigma * series
        for j in range(1, m):
            rhs = rhs + energies[j] * phis[m - j]
        e_m = -float(np.sum(rhs * phi0) / np.sum(phi0 * phi0))
        rhs = rhs + e_m * phi0
        phis.append(rest @ ((rest.T @ rhs) / gap))
        energies.append(e_m)
    return z, energies, phis


def _series(phis, p, order):
    """eps^order coefficient of (sum_j eps^j phi_j)^{p+1}, pointwise."""
    n = order + 1
    acc = [np.ones_like(phis[0])] + [np.zeros_like(phis[0]) for _ in range(n - 1)]
    for _ in range(int(p) + 1):
        new = [np.zeros_like(phis[0]) for _ in range(n)]
        for i in range(n):
            for j in range(min(n - i, len(phis))):
                new[i + j] += acc[i] * phis[j]
        acc = new
    return acc[order]
