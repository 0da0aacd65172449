import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsbeam import _kernels

pytestmark = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not installed")

IMPLS = [_kernels.numpy_impl, _kernels.numba_impl]


def field(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 60), st.lists(st.floats(-15, 15), min_size=1, max_size=40))
def test_hermite_parity(n_max, pts):
    x = np.array(pts, dtype=float)
    a = _kernels.numpy_impl.hermite_table(x, n_max)
    b = _kernels.numba_impl.hermite_table(x, n_max)
    np.testing.assert_allclose(a, b, atol=1e-13, rtol=0)


def test_trig_eval_parity():
    rng = np.random.default_rng(4)
    coef = field(65, 1)
    freqs = np.arange(65, dtype=float) - 32
    pts = rng.uniform(-4, 4, 300)
    a = _kernels.numpy_impl.trig_eval(coef, freqs, pts)
    b = _kernels.numba_impl.trig_eval(coef, freqs, pts)
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("p", [2.0, 1.0, 0.5, 3.0])
def test_nonlinear_phase_parity_in_place(p):
    u = field((8, 16))
    outs = []
    for impl in IMPLS:
        v = u.copy()
        impl.nonlinear_phase(v, -1.0, p, 0.05)
        outs.append(v)
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-14)
    np.testing.assert_allclose(np.abs(outs[0]), np.abs(u), atol=1e-14)
    assert np.max(np.abs(outs[0] - u)) > 1e-3


def test_potential_phase_parity_in_place():
    spec = field((16, 32))
    m2 = np.fft.fftfreq(16, d=1 / 16) ** 2
    w = np.linspace(1, 2, 32)
    v = np.linspace(-0.25, 0.1, 32)
    outs = []
    for impl in IMPLS:
        s = spec.copy()
        impl.potential_phase(s, m2, w, v, 0.01)
        outs.append(s)
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-13)


def test_wrappers_reject_non_contiguous():
    u = field((8, 16))[:, ::2]
    with pytest.raises(ValueError):
        _kernels.nonlinear_phase(u, 1.0, 2.0, 0.1)
    with pytest.raises(ValueError):
        _kernels.potential_phase(u, np.ones(8), np.ones(8), np.ones(8), 0.1)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("yes", "numpy"), ("0", "numba"),
                                           ("", "numba")])
def test_env_flag_selects_path(flag, expected):
    env = dict(os.environ, NLSBEAM_NO_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c",
                          "from nlsbeam import _kernels; print(_kernels.active.name)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
