import math

import numpy as np
import pytest

from nlsbeam import geometry as geo


def paper_A(x):
    return np.sqrt((1 + np.cos(x) ** 2) / 2)


def fd2(f, x, step=1e-3):
    return (f(x + step) - 2 * f(x) + f(x - step)) / step ** 2


def fd1(f, x, step=1e-5):
    return (f(x + step) - f(x - step)) / (2 * step)


def test_paper_preset_constants():
    prof = geo.build_profile("paper")
    assert prof.c2 == pytest.approx(0.5, abs=1e-14)
    assert prof.omega == pytest.approx(2 ** -0.5, abs=1e-14)
    assert prof.v1_0 == pytest.approx(-0.25, abs=1e-14)
    assert geo.effective_potential(prof, 1, 0.0) == pytest.approx(0.75, abs=1e-14)


def test_paper_derivatives_against_finite_differences():
    prof = geo.build_profile("paper")
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(prof.dA(x), fd1(paper_A, x), atol=1e-9)
    np.testing.assert_allclose(prof.d2A(x), fd2(paper_A, x), atol=1e-6)


def test_v1_matches_definition():
    prof = geo.build_profile("paper")
    x = np.linspace(-3, 3, 7)
    a, da, d2a = paper_A(x), fd1(paper_A, x), fd2(paper_A, x)
    np.testing.assert_allclose(geo.v1(prof, x), 0.5 * d2a / a - 0.25 * da ** 2 / a ** 2,
                               atol=1e-6)


def test_c2_matches_finite_difference_of_inverse_square():
    prof = geo.build_profile("paper")
    assert geo.fd_c2(prof) == pytest.approx(prof.c2, abs=1e-6)


def test_samples_path_agrees_with_analytic():
    xs = 2 * np.pi * np.arange(256) / 256
    sampled = geo.build_profile(paper_A(xs))
    exact = geo.build_profile("paper")
    assert sampled.c2 == pytest.approx(exact.c2, abs=1e-10)
    assert sampled.v1_0 == pytest.approx(exact.v1_0, abs=1e-10)
    x = np.linspace(-3, 3, 11)
    np.testing.assert_allclose(geo.v1(sampled, x), geo.v1(exact, x), atol=1e-10)


def test_callable_input():
    prof = geo.build_profile(paper_A, grid_n=256)
    assert prof.omega == pytest.approx(2 ** -0.5, abs=1e-10)


def test_effective_potential_minimum_on_geodesic():
    prof = geo.build_profile("paper")
    x = np.linspace(-1.0, 1.0, 201)
    vals = geo.effective_potential(prof, 16, x)
    assert abs(x[np.argmin(vals)]) < 1e-12


def test_odd_taylor_terms_vanish():
    d1, d3 = geo.fd_odd_taylor(geo.build_profile("paper"))
    assert abs(d1) < 1e-10 and abs(d3) < 1e-6


def test_flat_preset():
    prof = geo.build_profile("flat")
    x = np.linspace(-3, 3, 5)
    np.testing.assert_array_equal(prof.inv_a2(x), 1.0)
    np.testing.assert_array_equal(geo.v1(prof, x), 0.0)
    with pytest.raises(ValueError):
        geo.build_profile("flat", require_elliptic=True)


@pytest.mark.parametrize("c2", [0.5, 1.0, 2.0])
def test_toy_preset(c2):
    prof = geo.build_profile("toy", c2=c2)
    x = np.linspace(-3, 3, 9)
    np.testing.assert_allclose(prof.inv_a2(x), 1 + c2 * x ** 2)
    np.testing.assert_array_equal(prof.v1(x), 0.0)
    assert prof.omega == pytest.approx(math.sqrt(c2))


def test_rejects_hyperbolic_profile():
    # A = sqrt((1 + sin^2 x)/2) has a minimum at 0: not elliptic
    xs = 2 * np.pi * np.arange(128) / 128
    with pytest.raises(ValueError, match="elliptic"):
        geo.build_profile(np.sqrt((1 + np.sin(xs) ** 2) / 2))


def test_rejects_off_critical_profile():
    xs = 2 * np.pi * np.arange(128) / 128
    with pytest.raises(ValueError, match="critical"):
        geo.build_profile(1.5 + 0.3 * np.sin(xs))


def test_rejects_small_A():
    xs = 2 * np.pi * np.arange(128) / 128
    with pytest.raises(ValueError):
        geo.build_profile(np.cos(xs / 2) ** 2, require_elliptic=False)


def test_rejects_unknown_preset():
    with pytest.raises(ValueError):
        geo.build_profile("sphere")


def test_effective_potential_rejects_k0():
    with pytest.raises(ValueError):
        geo.effective_potential(geo.build_profile("paper"), 0, 0.0)


def test_load_profile_csv(tmp_path):
    n = 256
    xs = 2 * np.pi * np.arange(n) / n
    path = tmp_path / "profile.csv"
    lines = ["# warp profile", "x,A"] + [f"{x:.17g},{a:.17g}" for x, a in zip(xs, paper_A(xs))]
    path.write_text("\n".join(lines) + "\n")
    prof = geo.load_profile_csv(path)
    assert prof.c2 == pytest.approx(0.5, abs=1e-10)


def test_load_profile_csv_rejects_nonuniform(tmp_path):
    path = tmp_path / "bad.csv"
    xs = np.sort(np.random.default_rng(3).uniform(0, 2 * np.pi, 64))
    path.write_text("\n".join(f"{x},1.0" for x in xs))
    with pytest.raises(ValueError):
        geo.load_profile_csv(path)


def test_load_profile_csv_rejects_garbage_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,A\n0.0,1.0\nnot,numbers\n")
    with pytest.raises(ValueError, match="row 3"):
        geo.load_profile_csv(path)
