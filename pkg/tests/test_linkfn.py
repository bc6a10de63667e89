import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgelab.errors import DegenerateLinkError, DomainError, LinkValidationError, PreconditionError
from ridgelab.linkfn import (
    EVEN,
    MONOTONE,
    LinkFunction,
    burnin_schedule,
    estimate_cf_lower,
    finite_difference_min,
    gaht_epsilon,
    iaht_epsilon,
)
from ridgelab.theory import fit_loglog_slope

CUBIC = LinkFunction.cubic()
IDENT = LinkFunction.identity()
SQUARE = LinkFunction.abs_power(2)


def step_link(eps=0.01):
    # 0 up to eps, then 0.1 up to 0.1, then x
    return LinkFunction.piecewise([(0, 0), (eps, 0), (eps, 0.1), (0.1, 0.1), (1, 1)])


def brute_fd_min(fn, lo, hi, h, n=200_001):
    z = np.linspace(lo, hi, n)
    return float(np.min(np.abs(fn(z + h) - fn(z))))


# eval ------------------------------------------------------------------

def test_eval_examples():
    assert CUBIC.eval(1.0) == 1.0
    assert CUBIC.eval(0.5) == 0.125
    assert SQUARE.eval(-0.5) == 0.25


def test_eval_domain():
    assert CUBIC.eval(1.0 + 1e-12) == 1.0
    with pytest.raises(DomainError):
        CUBIC.eval(1.0 + 1e-6)
    with pytest.raises(DomainError):
        CUBIC.eval(np.array([0.0, -1.01]))


def test_piecewise_interpolates_and_mirrors():
    f = LinkFunction.piecewise([(0, 0), (0.5, 0.2), (1, 1)])
    assert f.eval(0.25) == pytest.approx(0.1, abs=1e-15)
    assert f.eval(-0.75) == pytest.approx(-0.6, abs=1e-15)
    g = LinkFunction.piecewise([(0, 0), (0.5, 0.2), (1, 1)], symmetry="even")
    assert g.parity == EVEN
    assert g.eval(-0.75) == pytest.approx(0.6, abs=1e-15)


def test_jump_takes_left_value():
    f = step_link(0.01)
    assert f.eval(0.01) == 0.0
    assert f.eval(0.0100001) == pytest.approx(0.1)
    assert f.eval(0.05) == 0.1
    assert f.eval(0.5) == pytest.approx(0.5)


@pytest.mark.parametrize("link", [IDENT, CUBIC, SQUARE, LinkFunction.abs_power(0.5), LinkFunction.signed_power(5),
                                  LinkFunction.signed_power(4), step_link()])
def test_parity_flags_hold_on_grid(link):
    x = np.linspace(-1, 1, 20001)
    v = link.eval(x)
    assert link.eval(0.0) == 0.0 and link.eval(1.0) == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(v)) <= 1.0 + 1e-12
    if link.parity == MONOTONE:
        assert np.all(np.diff(v) >= -1e-12)
    else:
        assert np.max(np.abs(v - v[::-1])) <= 1e-12
        assert np.all(np.diff(v[10000:]) >= -1e-12)


def test_signed_power_parity():
    assert LinkFunction.signed_power(3).parity == MONOTONE
    assert LinkFunction.signed_power(2).parity == EVEN


def test_invalid_links_rejected():
    with pytest.raises(LinkValidationError):
        LinkFunction.piecewise([(0, 0), (1, 0.5)])  # f(1) != 1
    with pytest.raises(LinkValidationError):
        LinkFunction.piecewise([(0, 0), (0.5, 0.8), (0.7, 0.3), (1, 1)])  # not monotone
    with pytest.raises(LinkValidationError):
        LinkFunction.piecewise([(0, 0.1), (1, 1)])  # f(0) != 0
    with pytest.raises(LinkValidationError):
        LinkFunction.abs_power(-1.0)
    with pytest.raises(LinkValidationError):
        LinkFunction.signed_power(2.5)
    with pytest.raises(LinkValidationError):
        LinkFunction.from_dict({"kind": "sigmoid"})


def test_cf_lower_metadata_checked():
    assert CUBIC.cf_lower == pytest.approx(0.03)
    assert estimate_cf_lower(CUBIC) >= 0.9 * CUBIC.cf_lower
    with pytest.raises(LinkValidationError):
        LinkFunction("cubic", p=3.0, cf_lower=0.5)


def test_json_round_trip():
    for desc in ({"kind": "cubic"}, {"kind": "abs_power", "p": 2.0}, {"kind": "identity"},
                 {"kind": "piecewise", "points": [[0, 0], [0.3, 0.0], [1, 1]], "symmetry": "odd"}):
        f = LinkFunction.from_dict(desc)
        assert LinkFunction.from_dict(f.to_dict()) == f


# envelope ----------------------------------------------------------------

def test_envelope_examples():
    assert CUBIC.envelope_g(0.5) == 0.125
    assert SQUARE.envelope_g(0.3) == pytest.approx(0.09, abs=1e-15)
    assert step_link(0.01).envelope_g(0.05) == 0.1
    with pytest.raises(DomainError):
        CUBIC.envelope_g(-0.1)
    with pytest.raises(DomainError):
        CUBIC.envelope_g(1.1)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0.2, 6.0), odd=st.booleans())
def test_envelope_nondecreasing(p, odd):
    f = LinkFunction.signed_power(max(1, round(p))) if odd else LinkFunction.abs_power(p)
    g = f.envelope_g(np.linspace(0, 1, 2001))
    assert np.all(np.diff(g) >= -1e-15)


# finite differences ---------------------------------------------------------

def test_finite_difference_examples():
    # oracle: dense brute force, independent of the kernel grids
    assert finite_difference_min(CUBIC, 0.2, 0.28, 0.02) == pytest.approx(0.002648, rel=1e-9)
    assert brute_fd_min(lambda z: z ** 3, 0.2, 0.28, 0.02) == pytest.approx(0.002648, rel=1e-9)
    assert finite_difference_min(IDENT, 0.1, 0.5, 0.01) == pytest.approx(0.01, rel=1e-9)
    assert finite_difference_min(SQUARE, 0.1, 0.2, 0.05) == pytest.approx(0.0125, rel=1e-9)
    with pytest.raises(DomainError):
        finite_difference_min(CUBIC, 0.5, 0.99, 0.02)


@settings(max_examples=40, deadline=None)
@given(lo=st.floats(0.0, 0.6), width=st.floats(0.0, 0.3), h=st.floats(1e-3, 0.09), p=st.floats(0.3, 5.0))
def test_finite_difference_matches_brute_force(lo, width, h, p):
    f = LinkFunction.abs_power(p)
    got = finite_difference_min(f, lo, lo + width, h)
    ref = brute_fd_min(lambda z: np.abs(z) ** p, lo, lo + width, h, 20001)
    # the refined grid can only find a smaller (or equal) value than its own
    # coarse pass, and is within 0.5% of the dense oracle
    assert got <= ref * (1 + 1e-9) + 1e-15
    assert got >= ref * (1 - 5e-3) - 1e-15


# epsilon thresholds -----------------------------------------------------------

def test_iaht_epsilon_examples():
    assert iaht_epsilon(CUBIC, 100) == pytest.approx(0.001324, rel=1e-9)
    assert 0.5 * (0.22 ** 3 - 0.2 ** 3) == pytest.approx(0.001324, rel=1e-12)
    assert iaht_epsilon(IDENT, 100) == pytest.approx(0.01, rel=1e-9)
    flat = LinkFunction.piecewise([(0, 0), (0.3, 0), (1, 1)])
    with pytest.raises(DegenerateLinkError):
        iaht_epsilon(flat, 100)
    with pytest.raises(PreconditionError):
        iaht_epsilon(CUBIC, 8)


def test_gaht_epsilon_examples():
    eps, y = gaht_epsilon(IDENT, 10000, 0.4)
    assert eps == pytest.approx(0.2 / (2 * math.sqrt(20000)), rel=1e-9)
    assert eps == pytest.approx(7.0711e-4, rel=1e-4)
    assert y == pytest.approx(0.4 / math.sqrt(2), rel=1e-12)
    _, y = gaht_epsilon(CUBIC, 10000, 0.4)
    assert y == pytest.approx(0.2828, abs=1e-4)
    with pytest.raises(PreconditionError):
        gaht_epsilon(CUBIC, 100, 1.0)
    with pytest.raises(PreconditionError):
        gaht_epsilon(CUBIC, 10000, 0.19)


def test_gaht_epsilon_cubic_grid_oracle():
    # independent oracle: brute-force outer max over a dense y grid
    d, x_pre = 10000, 0.4
    h = 0.2 / math.sqrt(2 * d)
    ys = np.linspace(20 / math.sqrt(2 * d), x_pre / math.sqrt(2), 801)
    inner = [brute_fd_min(lambda z: z ** 3, 5 * y / 6, 5 * y / 3, h, 2001) for y in ys]
    eps, _ = gaht_epsilon(CUBIC, d, x_pre)
    assert eps == pytest.approx(0.5 * max(inner), rel=5e-3)


def test_schedule_examples():
    s = burnin_schedule(IDENT, 4096)
    assert len(s) == 256
    assert np.allclose(s.values[:100], 0.1 / 64, rtol=1e-9, atol=0)
    c = burnin_schedule(CUBIC, 4096)
    assert c.eps(200) > c.eps(101)
    assert np.all(c.values > 0)
    assert np.all(c.values[:100] == c.values[0])


@pytest.mark.parametrize("link", [CUBIC, SQUARE, LinkFunction.abs_power(1.5)])
def test_schedule_nondecreasing_after_initial_stage(link):
    v = burnin_schedule(link, 4096).values[100:]
    assert np.all(np.diff(v) >= -1e-12 * v[:-1])


def test_small_d_schedule_is_initial_only():
    s = burnin_schedule(CUBIC, 256)
    assert len(s) == 16 and np.all(s.values == s.values[0])


def _inverse_square_slope(link):
    ds = [256, 1024, 4096]
    return fit_loglog_slope(ds, [burnin_schedule(link, d).inverse_square_sum() for d in ds])


def test_identity_inverse_square_sum_scaling_within_stage():
    # pure initial-stage range: exactly 100 d * d/16
    for d in (256, 1024):
        assert burnin_schedule(IDENT, d).inverse_square_sum() == pytest.approx(100 * d * d / 16, rel=1e-6)


@pytest.mark.xfail(strict=True, reason="d=4096 adds the anchored stage whose 1/eps^2 is 2x larger; fitted slope ~2.2 (see decisions ledger)")
def test_identity_inverse_square_slope():
    assert abs(_inverse_square_slope(IDENT) - 2.0) <= 0.15


@pytest.mark.xfail(strict=True, reason="for d <= 1600 every epoch uses the initial test, so the sum scales as d^4 (see decisions ledger)")
def test_cubic_inverse_square_slope():
    assert abs(_inverse_square_slope(CUBIC) - 3.0) <= 0.3
