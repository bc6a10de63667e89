import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgelab.burnin import run_burnin
from ridgelab.env import spawn
from ridgelab.errors import InsufficientDataError
from ridgelab.geometry import make_rng, sample_sphere
from ridgelab.learning import (
    History,
    constrained_least_squares,
    explore_action,
    explore_actions,
    explore_counts,
    explore_length,
    project_feasible,
    run_learning,
)
from ridgelab.linkfn import LinkFunction

from conftest import unit

CUBIC = LinkFunction.cubic()


def anchored_pair(rng, d, ip=0.6):
    """Unit a0 and theta* with <theta*, a0> = ip."""
    a0 = sample_sphere(rng, d)
    w = sample_sphere(rng, d)
    w -= (w @ a0) * a0
    w /= np.linalg.norm(w)
    return a0, ip * a0 + math.sqrt(1 - ip * ip) * w


def noiseless_history(a0, theta, m, link=CUBIC):
    d = a0.shape[0]
    counts = explore_counts(m, d)
    idx = np.nonzero(counts)[0]
    A = np.array([explore_action(a0, j) for j in idx])
    return History(A, counts[idx].astype(float), link.eval(A @ theta))


# explore actions -----------------------------------------------------------------

def test_explore_examples():
    gen = explore_actions(unit(3), 3)
    a1 = next(gen)
    assert np.allclose(a1, (3 * unit(3) + unit(3, 1)) / 4)
    assert np.linalg.norm(a1) == pytest.approx(math.sqrt(10) / 4)
    seq = [next(gen) for _ in range(6)]
    # period exactly d
    assert np.allclose(seq[0], seq[3]) and not np.allclose(seq[0], seq[1])
    assert np.allclose(seq[2], a1)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 31), d=st.integers(2, 50), ip=st.floats(0.5, 1.0))
def test_explore_actions_stay_informative(seed, d, ip):
    a0, th = anchored_pair(make_rng(seed), d, ip)
    for t in range(1, 2 * d + 1):
        a = explore_action(a0, t)
        assert np.linalg.norm(a) <= 1 + 1e-12
        assert a @ th >= 1 / 8 - 1e-12


@settings(max_examples=50, deadline=None)
@given(m=st.integers(0, 500), d=st.integers(1, 40))
def test_explore_counts_match_cycle(m, d):
    ref = np.zeros(d, dtype=int)
    for t in range(1, m + 1):
        ref[t % d] += 1
    assert np.array_equal(explore_counts(m, d), ref)


def test_explore_length():
    assert explore_length(1000, 16, "estimation", 0.03) == 1000
    assert explore_length(10**6, 16, "regret", 1.0) == 16 * 1000
    assert explore_length(10**5, 16, "regret", 0.03) == 10**5
    with pytest.raises(ValueError):
        explore_length(10, 2, "other", 1.0)


# projection and least squares -----------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 31), d=st.integers(2, 30))
def test_projection_is_feasible(seed, d):
    r = make_rng(seed)
    a0 = sample_sphere(r, d)
    th = project_feasible(r.standard_normal(d), a0)
    assert abs(np.linalg.norm(th) - 1) <= 1e-12 and th @ a0 >= 0.5 - 1e-12
    assert np.allclose(project_feasible(-a0, a0) @ a0, 0.5)
    inside = project_feasible(a0 + 0.1 * r.standard_normal(d) / math.sqrt(d), a0)
    assert inside @ a0 >= 0.5


def test_noiseless_recovery():
    d = 16
    a0, th = anchored_pair(make_rng(0), d)
    hist = noiseless_history(a0, th, 10 * d)
    est = constrained_least_squares(hist, CUBIC, a0, rng=make_rng(1))
    assert np.linalg.norm(est - th) <= 1e-3


def test_single_pair_geometry():
    d = 5
    a0 = unit(d)
    est = constrained_least_squares([(a0, 0.125)], CUBIC, a0, rng=make_rng(0))
    assert est @ a0 == pytest.approx(0.5, abs=1e-6)
    assert History.from_pairs([(a0, 0.125)]).objective(est, CUBIC) <= 1e-12


def test_duplicates_do_not_move_minimizer():
    d = 8
    rng = make_rng(3)
    a0, th = anchored_pair(rng, d)
    pairs = []
    for t in range(1, 41):
        a = explore_action(a0, t)
        pairs.append((a, float(CUBIC.eval(a @ th)) + 0.1 * rng.standard_normal()))
    one = constrained_least_squares(pairs, CUBIC, a0, rng=make_rng(5))
    two = constrained_least_squares(pairs + pairs, CUBIC, a0, rng=make_rng(5))
    assert np.linalg.norm(one - two) <= 1e-6


def test_empty_history():
    with pytest.raises(InsufficientDataError):
        constrained_least_squares([], CUBIC, unit(3))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), sigma=st.sampled_from([0.0, 0.5, 2.0]))
def test_solution_feasible_and_beats_truth(seed, sigma):
    d = 10
    r = make_rng(seed)
    a0, th = anchored_pair(r, d, r.uniform(0.5, 0.9))
    hist = noiseless_history(a0, th, 30 * d)
    hist.means = hist.means + sigma / np.sqrt(hist.counts) * r.standard_normal(len(hist.means))
    est = constrained_least_squares(hist, CUBIC, a0, rng=r)
    assert abs(np.linalg.norm(est) - 1) <= 1e-9 and est @ a0 >= 0.5 - 1e-9
    # global-optimality proxy: no worse than the truth
    assert hist.objective(est, CUBIC) <= hist.objective(th, CUBIC) + 1e-8


def test_unconstrained_mode():
    d = 12
    r = make_rng(8)
    th = sample_sphere(r, d)
    A = np.array([sample_sphere(r, d) for _ in range(60)])
    est = constrained_least_squares(History(A, np.ones(60), CUBIC.eval(A @ th)), CUBIC, None, rng=r)
    assert np.linalg.norm(est - th) <= 1e-6


# explore-then-commit ---------------------------------------------------------------

def test_estimation_mode_has_no_commit():
    d = 16
    a0, th = anchored_pair(make_rng(2), d)
    env = spawn(d, CUBIC, 1.0, make_rng(3), theta_star=th)
    out = run_learning(env, a0, 5000, mode="estimation", rng=make_rng(4))
    assert out.m_explore == 5000 and out.commit_regret == 0.0
    assert out.total_queries == env.ledger.queries == 5000
    assert out.estimation_gap == pytest.approx(1 - th @ out.theta_hat)
    assert all(ph == "explore" for _, _, ph in out.curve)


def test_commit_regret_is_constant_per_round(tmp_path):
    d = 16
    a0, th = anchored_pair(make_rng(5), d)
    env = spawn(d, CUBIC, 1.0, make_rng(6), theta_star=th)
    out = run_learning(env, a0, 10**5, mode="regret", cf_lower=1.0, rng=make_rng(7))
    assert out.m_explore == math.ceil(d * math.sqrt(1e5))
    last = env.ledger.trajectory[-1]
    assert last.count == 10**5 - out.m_explore
    per_step = 1 - CUBIC.eval(th @ out.theta_hat)
    assert out.commit_regret == pytest.approx(last.count * per_step, rel=1e-12)
    assert out.cumulative_regret == pytest.approx(env.ledger.cumulative_regret)
    assert out.theta_hat @ a0 >= 0.5 - 1e-9
    p = tmp_path / "regret.csv"
    out.write_regret_curve(p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["t", "cum_regret", "phase"]
    assert rows[-1][0] == str(10**5) and rows[-1][2] == "commit"


def test_cf_lower_defaults_to_metadata():
    d = 16
    a0, th = anchored_pair(make_rng(5), d)
    env = spawn(d, CUBIC, 1.0, make_rng(6), theta_star=th)
    out = run_learning(env, a0, 10**6, rng=make_rng(7))
    assert out.m_explore == math.ceil(d * 1000 / 0.03)


def test_reward_clipping_option():
    d = 8
    a0, th = anchored_pair(make_rng(1), d)
    env = spawn(d, CUBIC, 50.0, make_rng(2), theta_star=th)
    out = run_learning(env, a0, d, mode="estimation", rng=make_rng(3), clip_rewards=True)
    assert out.theta_hat @ a0 >= 0.5 - 1e-9


def test_noiseless_end_to_end():
    d = 256
    env = spawn(d, CUBIC, 0.0, make_rng(21))
    burn = run_burnin(env, 0.1, rng=make_rng(22))
    assert not burn.failed and env.inner(burn.a0) >= 0.5
    out = run_learning(env, burn.a0, 50 * d, mode="estimation", rng=make_rng(23))
    assert 1 - env.inner(out.theta_hat) <= 1e-4
