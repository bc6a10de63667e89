import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgelab.env import RidgeEnvironment, spawn
from ridgelab.errors import BallViolationError, BudgetExceeded, NonUnitVectorError
from ridgelab.geometry import make_rng, sample_sphere
from ridgelab.linkfn import LinkFunction, iaht_epsilon

from conftest import freq_at_most, unit

CUBIC = LinkFunction.cubic()


def test_noiseless_examples():
    env = spawn(8, CUBIC, 0.0, make_rng(0), theta_star=unit(8, 2))
    assert env.query(unit(8, 2)) == 1.0
    assert env.query(unit(8, 0)) == 0.0
    assert env.ledger.queries == 2
    assert env.ledger.cumulative_regret == pytest.approx(1.0)


def test_gaussian_moments():
    env = spawn(4, CUBIC, 1.0, make_rng(1), theta_star=unit(4))
    a = np.array([0.6, 0.0, 0.0, 0.0])
    r = env.query_many(np.tile(a, (100_000, 1)))
    assert abs(r.mean() - 0.216) <= 4 / math.sqrt(1e5)
    assert abs(r.var() - 1.0) <= 0.05
    assert env.ledger.queries == 100_000


def test_batch_examples():
    env = spawn(4, CUBIC, 0.0, make_rng(0), theta_star=unit(4))
    a = np.array([0.5, 0.5, 0, 0])
    assert env.query_batch(a, 1) == pytest.approx(0.125)
    assert env.query_batch(a, 1234) == pytest.approx(0.125)
    assert env.ledger.queries == 1235
    with pytest.raises(ValueError):
        env.query_batch(a, 0)


def test_batch_mean_tail_bound():
    d, delta = 100, 0.1
    eps = iaht_epsilon(CUBIC, d)
    n = math.ceil(2 * math.log(2 / delta) / eps ** 2)
    env = spawn(d, CUBIC, 1.0, make_rng(2), theta_star=unit(d))
    a = unit(d) * 0.25
    miss = sum(abs(env.query_batch(a, n) - 0.25 ** 3) > eps for _ in range(500))
    assert freq_at_most(miss, 500, delta)
    assert env.ledger.queries == 500 * n


def test_batch_mean_has_exact_variance():
    env = spawn(4, CUBIC, 2.0, make_rng(3), theta_star=unit(4))
    m = np.array([env.query_batch(unit(4, 1), 400) for _ in range(20000)])
    assert abs(m.std() - 2.0 / 20) <= 0.003


def test_ball_violation():
    env = spawn(3, CUBIC, 1.0, make_rng(0))
    with pytest.raises(BallViolationError):
        env.query(np.array([1.0, 0.1, 0.0]))
    with pytest.raises(BallViolationError):
        env.query_many(np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
    assert env.ledger.queries == 0
    env.query(np.array([1.0 + 1e-10, 0, 0]))


def test_spawn_examples():
    e = spawn(2, CUBIC, 1.0, make_rng(0), theta_star=unit(2))
    assert np.array_equal(e.theta_star, unit(2))
    with pytest.raises(NonUnitVectorError):
        spawn(2, CUBIC, 1.0, make_rng(0), theta_star=np.ones(2) / 1.9)
    a, b = spawn(50, CUBIC, 1.0, make_rng(9)), spawn(50, CUBIC, 1.0, make_rng(9))
    assert np.array_equal(a.theta_star, b.theta_star)
    assert abs(np.linalg.norm(a.theta_star) - 1) <= 1e-12
    assert a.ledger.queries == 0 and a.ledger.cumulative_regret == 0.0


def test_budget_guard():
    env = spawn(3, CUBIC, 1.0, make_rng(0), max_queries=10)
    env.query_batch(unit(3), 10)
    with pytest.raises(BudgetExceeded):
        env.query(unit(3))
    assert env.ledger.queries == 10


def test_oracle_hides_theta():
    env = spawn(5, CUBIC, 1.0, make_rng(0))
    o = env.oracle()
    assert not hasattr(o, "theta_star") and not hasattr(o, "ledger")
    o.query(unit(5))
    assert o.queries_used == 1 and env.ledger.queries == 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), sigma=st.sampled_from([0.0, 1.0]), p=st.sampled_from([1.0, 3.0]),
       n=st.integers(1, 40))
def test_ledger_invariants(seed, sigma, p, n):
    r = make_rng(seed)
    link = LinkFunction.identity() if p == 1.0 else CUBIC
    d = 6
    env = spawn(d, link, sigma, r)
    total = 0
    for _ in range(n):
        a = sample_sphere(r, d) * r.uniform(0, 1)
        k = int(r.integers(1, 5))
        if k == 1:
            env.query(a)
        else:
            env.query_batch(a, k)
        total += k
    env.query_many(np.array([sample_sphere(r, d) for _ in range(3)]))
    total += 3
    led = env.ledger
    assert led.queries == total == sum(e.count for e in led.trajectory)
    assert led.cumulative_regret == pytest.approx(env.rederived_regret(), abs=1e-9)
    assert all(1 - link.eval(e.inner_product) >= 0 for e in led.trajectory)
    if sigma == 0:
        for e in led.trajectory:
            assert e.reward == link.eval(e.inner_product)


def test_thinned_log_keeps_exact_counts():
    env = spawn(4, CUBIC, 1.0, make_rng(0), theta_star=unit(4), log_every=10)
    for _ in range(95):
        env.query(unit(4, 1))
    assert env.ledger.queries == 95 and len(env.ledger.trajectory) == 9
    assert env.ledger.cumulative_regret == pytest.approx(95.0)


def test_trajectory_csv(tmp_path):
    env = spawn(4, CUBIC, 0.0, make_rng(0), theta_star=unit(4))
    env.query(unit(4, 1))
    env.query_batch(unit(4), 3)
    path = tmp_path / "traj.csv"
    env.write_trajectory_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "inner_product", "reward", "cum_regret", "cum_queries"]
    assert rows[1][0] == "1" and float(rows[1][3]) == 1.0
    assert rows[2][0] == "4" and float(rows[2][3]) == 1.0 and rows[2][4] == "4"


def test_constructor_checks():
    with pytest.raises(ValueError):
        RidgeEnvironment(3, CUBIC, unit(4))
    with pytest.raises(ValueError):
        RidgeEnvironment(3, CUBIC, unit(3), noise_sigma=-1)
