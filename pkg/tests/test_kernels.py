import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgelab import _accel
from ridgelab.kernels import _numpy as npk
from ridgelab.linkfn import LinkFunction

nbk = pytest.importorskip("ridgelab.kernels._numba") if _accel.HAVE_NUMBA else None

LINKS = [
    LinkFunction.identity(),
    LinkFunction.cubic(),
    LinkFunction.abs_power(2.0),
    LinkFunction.abs_power(0.7),
    LinkFunction.signed_power(5),
    LinkFunction.piecewise([(0, 0), (0.01, 0), (0.01, 0.1), (0.1, 0.1), (1, 1)]),
    LinkFunction.piecewise([(0, 0), (0.4, 0.1), (1, 1)], symmetry="even"),
    LinkFunction.piecewise([(-1, -1), (0, 0), (0.5, 0.2), (1, 1)], symmetry="none"),
]
needs_numba = pytest.mark.skipif(nbk is None, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("link", LINKS, ids=lambda f: f.label)
def test_link_eval_backends_agree(link):
    x = np.linspace(-1, 1, 4001)
    a = npk.link_eval(*link.kernel_args, x)
    b = nbk.link_eval(*link.kernel_args, x)
    assert np.allclose(a, b, rtol=0, atol=1e-15)
    for xi in (-1.0, -0.01, 0.0, 0.01, 0.1, 0.4, 1.0):
        assert npk.link_scalar(*link.kernel_args, xi) == pytest.approx(nbk.link_scalar(*link.kernel_args, xi), abs=1e-15)


@needs_numba
@pytest.mark.parametrize("link", LINKS[:6], ids=lambda f: f.label)
def test_grid_kernels_agree(link):
    z = np.linspace(0.0, 0.8, 333)
    assert np.allclose(npk.abs_diff_grid(*link.kernel_args, z, 0.01), nbk.abs_diff_grid(*link.kernel_args, z, 0.01), atol=1e-15)
    y = np.linspace(0.1, 0.5, 64)
    assert np.allclose(npk.gaht_inner_mins(*link.kernel_args, y, 0.003, 128),
                       nbk.gaht_inner_mins(*link.kernel_args, y, 0.003, 128), atol=1e-15)


@needs_numba
@settings(max_examples=25, deadline=None)
@given(rm=st.floats(-0.2, 0.5), rp=st.floats(-0.2, 0.8))
def test_feasibility_kernel_agrees(rm, rp):
    link = LinkFunction.cubic()
    zs = np.linspace(0.1, 0.3, 64)
    xg = np.linspace(0.02, 0.05, 48)
    a = npk.feasibility_search(*link.kernel_args, rm, rp, zs, xg)
    b = nbk.feasibility_search(*link.kernel_args, rm, rp, zs, xg)
    assert a[0] == pytest.approx(b[0], abs=1e-15)


@needs_numba
@pytest.mark.parametrize("mode", [0, 1])
@pytest.mark.parametrize("leap", [0.0, 1e-4])
def test_integrate_rate_agrees(mode, leap):
    link = LinkFunction.cubic()
    tab_x = np.linspace(0.1, 1.0, 512)
    tab_f = np.maximum.accumulate(3 * (tab_x / 2) ** 2) ** 2
    rec = np.unique(np.geomspace(1, 200_000, 100).astype(np.int64))
    args = (mode, *link.kernel_args, tab_x, tab_f, 1e-4, 0.01, 200_000, 0.25, leap, rec)
    ra, ta, ua, ca = npk.integrate_rate(*args)
    rb, tb, ub, cb = nbk.integrate_rate(*args)
    assert (ta, ca) == (tb, cb)
    assert ua == pytest.approx(ub, rel=1e-12)
    assert np.allclose(ra, rb, rtol=1e-12, equal_nan=True)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, RIDGELAB_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from ridgelab import _accel, kernels; print(_accel.backend_name(), kernels.active.__name__)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.split() == ["numpy", "ridgelab.kernels._numpy"]


def test_default_backend_name():
    assert _accel.backend_name() == ("numba" if _accel.USE_NUMBA else "numpy")
