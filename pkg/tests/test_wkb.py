import math
import warnings

import numpy as np
import pytest

from nlsbeam import oracles, oscillator as osc, wkb
from nlsbeam.fitting import fit_slope

OMEGAS = [1.0, 2 ** -0.5]


@pytest.mark.parametrize("omega", OMEGAS)
@pytest.mark.parametrize("sigma", [1, -1])
@pytest.mark.parametrize("p", [2, 1, 0.5])
def test_first_energy_closed_form(p, sigma, omega):
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=p, sigma=sigma, N=1, omega=omega))
    assert sol.energies[0] == omega
    assert sol.energies[1] == pytest.approx(-sigma * math.sqrt(2 / (p + 2)), abs=1e-10)
    assert sol.energies[1] == pytest.approx(oracles.first_energy(p, sigma, omega), abs=1e-12)


@pytest.mark.parametrize("sigma", [1, -1])
def test_first_energy_quintic_via_solvability(sigma):
    # q = 0 at p = 4, so the hierarchy itself refuses it; the solvability step does not
    basis = osc.build_basis(1.0, 16, power=4)
    phi0, _ = wkb.solve_order0(wkb.WKBConfig(), basis)
    e1 = wkb.solvability_energy(sigma * osc.expand_nonlinear(phi0, 4, basis), phi0)
    assert e1 == pytest.approx(-sigma * math.sqrt(1 / 3), abs=1e-12)


# E_2 for p = 2, sigma = +1 from the dense-grid oracle (agreement ~1e-12)
@pytest.mark.parametrize("omega,e2", [(1.0, -0.052002348146355154),
                                      (2 ** -0.5, -0.07354242602371407)])
def test_second_energy_frozen(omega, e2):
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, N=2, omega=omega))
    assert sol.energies[2] == pytest.approx(e2, abs=1e-10)


def test_sigma_flip_flips_odd_orders():
    a = wkb.solve_hierarchy(wkb.WKBConfig(p=2, sigma=1, N=3))
    b = wkb.solve_hierarchy(wkb.WKBConfig(p=2, sigma=-1, N=3))
    for m in range(4):
        sign = (-1) ** m
        assert b.energies[m] == pytest.approx(sign * a.energies[m], abs=1e-13)
        np.testing.assert_allclose(b.phis[m], sign * a.phis[m], atol=1e-13)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_orders_orthogonal_to_ground_state(N):
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, N=N))
    for phi in sol.phis[1:]:
        assert phi[0] == 0.0
    assert max(sol.defects) <= wkb.DEFECT_ABORT


def test_hierarchy_is_even():
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, N=3))
    for phi in sol.phis:
        assert np.max(np.abs(phi[1::2])) < 1e-15


def test_order_equation_holds_in_basis():
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, N=2))
    basis = sol.basis
    lhs = (basis.eigenvalues - sol.energies[0]) * sol.phis[2]
    rhs = (sol.energies[2] * sol.phis[0] + sol.energies[1] * sol.phis[1]
           + osc.series_power(sol.phis, 2, basis, orders=2)[1])
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("N,bar", [(1, 0.7), (2, 1.2), (3, 1.7)])
def test_reduced_residual_order(N, bar):
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, N=N))
    fit = fit_slope([(1 / k, wkb.reduced_residual(sol, 1 / k)) for k in (16, 32, 64, 128)])
    assert fit.slope >= bar


def test_shifted_mode_default():
    assert wkb.WKBConfig(N=1, h=1 / 16).shifted
    assert not wkb.WKBConfig(N=1).shifted
    assert not wkb.WKBConfig(p=2, N=2, h=1 / 16).shifted
    assert not wkb.WKBConfig(N=1, h=1 / 16, shifted_mode=False).shifted


def test_shifted_mode_keeps_energy_changes_profile():
    plain = wkb.solve_hierarchy(wkb.WKBConfig(N=1, h=1 / 16, shifted_mode=False))
    shifted = wkb.solve_hierarchy(wkb.WKBConfig(N=1, h=1 / 16))
    assert shifted.energies == plain.energies
    assert np.max(np.abs(shifted.phis[1] - plain.phis[1])) > 1e-3


def test_invert_shifted():
    basis = osc.build_basis(1.0, 8)
    rhs = np.zeros(9)
    rhs[2] = 1.0
    out = wkb.invert_shifted(rhs, 0.5, basis)
    assert out[2] == pytest.approx(1 / (4 - 0.5))
    with pytest.raises(ValueError, match="gap"):
        wkb.invert_shifted(rhs, 2.0, basis)
    rhs[0] = 1.0
    with pytest.raises(ValueError, match="orthogonal"):
        wkb.invert_shifted(rhs, 0.0, basis)


def test_lambda_from_energy():
    # sigma=+1, omega=1, p=2: E(h) = 1 - h^{1/2}/sqrt(2)
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, sigma=1, N=1, omega=1.0, h=1 / 16))
    _, energy, lam = wkb.assemble(sol, 1 / 16)
    assert energy == pytest.approx(1 - 0.25 / math.sqrt(2), abs=1e-14)
    assert lam == pytest.approx(256 * (1 + energy / 16), abs=1e-10)


def test_linear_limit_lambda_is_oscillator_level():
    # N = 0: lambda = k^2 + omega k, the ground level of -d_x^2 + k^2 (1 + omega^2 x^2)
    sol = wkb.solve_hierarchy(wkb.WKBConfig(N=0, omega=0.8))
    assert wkb.assemble(sol, 1 / 20)[2] == pytest.approx(400 + 0.8 * 20)


def test_assemble_warns_outside_regime():
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, N=1, omega=0.5))
    with pytest.warns(RuntimeWarning):
        wkb.assemble(sol, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        wkb.assemble(sol, 1 / 64)


@pytest.mark.parametrize("h", [0.3, 0.0, -0.5, 1 / 16 + 1e-9, 2.0])
def test_check_h_rejects(h):
    with pytest.raises(ValueError):
        wkb.check_h(h)


@pytest.mark.parametrize("kwargs", [
    {"p": 4}, {"p": 5}, {"p": 1, "N": 2}, {"d": 3}, {"sigma": 0}, {"omega": 0.0},
    {"N": -1},
])
def test_config_rejects(kwargs):
    with pytest.raises(ValueError):
        wkb.WKBConfig(**kwargs)


def test_truncation_triggers_abort():
    with pytest.raises(wkb.HierarchyError):
        wkb.solve_hierarchy(wkb.WKBConfig(N=3, n_max=4))


def test_shifted_needs_h():
    with pytest.raises(ValueError):
        wkb.solve_hierarchy(wkb.WKBConfig(N=1, shifted_mode=True))


def test_solution_record_keys():
    sol = wkb.solve_hierarchy(wkb.WKBConfig(N=2))
    rec = wkb.solution_record(sol, 1 / 32)
    assert {"q", "energies", "defects", "E_h", "lambda"} <= set(rec)
    assert rec["q"] == 0.5
