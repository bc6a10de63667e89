"""Monte Carlo trial execution, record files and summaries."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import kernels
from ..baselines import (
    AdversarialPacking,
    LeastSquaresOracle,
    OptimisticSearch,
    PackingSet,
    RandomOfflineOracle,
    ZeroOnlineOracle,
    run_eluder_ucb,
    run_nonadaptive,
    run_oracle_learner,
)
from ..burnin import run_burnin, run_burnin_even
from ..env import spawn
from ..errors import InsufficientDataError
from ..geometry import derive_seed, make_rng
from ..learning import run_learning
from ..linkfn import EVEN
from ..theory import MEASURED, TrajectoryCurve, fit_loglog_slope, lb_epsilon_sequence, ub_trajectory_ode
from .config import ExperimentConfig
from .estimators import binomial_ci, estimate_burnin_cost, regret_phase_report


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    d: int
    algorithm: str
    queries: int
    success: bool
    final_inner_product: float
    max_inner_product: float
    cum_regret: float
    wall_time_ms: float


RECORD_COLUMNS = [f.name for f in fields(TrialRecord)]


@dataclass
class TrialOutput:
    record: TrialRecord
    ledger_queries: int
    curve: Optional[List[Tuple[int, float]]] = None  # measured (t, x) or (T, regret) points


def worker_count() -> int:
    env = os.environ.get("RIDGELAB_THREADS")
    if env:
        return max(1, int(env))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def default_T_list(T: int, n: int = 24) -> List[int]:
    return sorted({int(round(x)) for x in np.geomspace(1, T, n)})


def _regret_prefix(env, T: int) -> float:
    """Cumulative regret of the first T queries, read off the ledger."""
    f1 = env._f1
    total = 0.0
    for e in env.ledger.trajectory:
        if e.t_start > T:
            break
        n = min(e.count, T - e.t_start + 1)
        total += n * (f1 - float(env.link.eval(e.inner_product)))
    return total


def _two_stage(cfg: ExperimentConfig, env, rng, d: int) -> TrialOutput:
    link = env.link
    even = link.parity == EVEN
    runner = run_burnin_even if even else run_burnin
    # head-to-head runs get the fixed total budget T; other runs are uncapped
    budget = cfg.T if cfg.experiment == "baseline_headtohead" else None
    b = runner(env, cfg.delta, budget=budget, rng=rng)
    x0 = env.inner(b.a0) if b.a0 is not None else 0.0
    ok = (not b.failed) and (abs(x0) if even else x0) >= 0.5
    B = b.queries_used
    if cfg.experiment in ("burnin_cost", "trajectory_overlay") or cfg.T is None and cfg.T_list is None:
        curve = [(q, x) for (_, _, q, x) in b.epoch_log] if cfg.experiment == "trajectory_overlay" else None
        rec = TrialRecord(0, 0, d, "two_stage", B, ok, x0, env.ledger.max_inner_product,
                          env.ledger.cumulative_regret, 0.0)
        return TrialOutput(rec, env.ledger.queries, curve)
    cf = cfg.constant("cf_lower")
    burn_regret = env.ledger.cumulative_regret
    T_list = sorted(cfg.T_list or default_T_list(cfg.T))
    points = []
    final = (x0, burn_regret, env.ledger.queries, env.ledger.max_inner_product)
    for k, T in enumerate(T_list):
        if T <= B or not ok:
            # horizon ends inside the burn-in: regret of the first T queries
            points.append((T, _regret_prefix(env, min(T, B))))
            continue
        # same theta*, fresh noise stream per horizon
        sub = spawn(d, link, cfg.sigma, make_rng(derive_seed(int(rng.integers(2**63)), k)), theta_star=env.theta_star)
        o = run_learning(sub, b.a0, T - B, cfg.learning_mode, cf_lower=cf, rng=rng)
        points.append((T, burn_regret + o.cumulative_regret))
        if T == T_list[-1]:
            final = (sub.inner(o.theta_hat), burn_regret + o.cumulative_regret, env.ledger.queries + sub.ledger.queries,
                     max(env.ledger.max_inner_product, sub.ledger.max_inner_product))
    inner, regret, queries, max_inner = final
    rec = TrialRecord(0, 0, d, "two_stage", queries, bool(ok and inner >= 0.5), inner, max_inner, regret, 0.0)
    return TrialOutput(rec, queries, points if cfg.experiment == "regret_curve" else None)


def _baseline(cfg: ExperimentConfig, env, rng, d: int) -> TrialOutput:
    a = cfg.algorithm
    name = a["name"]
    T = cfg.T
    if name == "eluder_ucb":
        tb_name = a.get("tie_break", "optimistic_search")
        if tb_name == "adversarial_packing":
            T0 = int(a.get("T0", max(T, 2)))
            # the tie-breaker is handed theta* explicitly; learners never are
            tb = AdversarialPacking(PackingSet.build(rng, d, T0, env.theta_star), env.theta_star)
        else:
            tb = OptimisticSearch()
        s = run_eluder_ucb(env, T, tb, rng, cfg.constant("kappa", 4.0), a.get("refit_interval"))
    elif name == "oracle_learner":
        kind = a.get("oracle", "zero")
        oracle = {"zero": lambda: ZeroOnlineOracle(d), "random": lambda: RandomOfflineOracle(d, rng),
                  "least_squares": lambda: LeastSquaresOracle(d, env.link, rng)}[kind]()
        s = run_oracle_learner(env, oracle, a.get("policy", "play_estimate"), T, rng)
    else:
        s = run_nonadaptive(env, T, rng)
    final = s.final_inner_product
    ok = s.max_inner_product >= 0.5 if name != "nonadaptive" else final >= 0.5
    rec = TrialRecord(0, 0, d, cfg.algorithm_label, s.queries, bool(ok), final, s.max_inner_product, s.cum_regret, 0.0)
    return TrialOutput(rec, env.ledger.queries)


def run_trial(cfg_dict: Dict, d: int, trial: int, trial_id: int) -> TrialOutput:
    """One independent trial; safe to run in a worker process."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    seed = derive_seed(cfg.seed, d, trial)
    rng = make_rng(seed)
    t0 = time.perf_counter()
    env = spawn(d, cfg.link_fn, cfg.sigma, rng, max_queries=cfg.max_queries)
    if cfg.algorithm_name == "two_stage":
        out = _two_stage(cfg, env, rng, d)
    else:
        out = _baseline(cfg, env, rng, d)
    out.record.trial_id = trial_id
    out.record.seed = seed
    out.record.wall_time_ms = round((time.perf_counter() - t0) * 1000.0, 3)
    if out.record.queries != out.ledger_queries:
        raise AssertionError("record query count disagrees with the environment ledger")
    return out


def _tasks(cfg: ExperimentConfig):
    tid = 0
    for d in cfg.d_list:
        for k in range(cfg.trials):
            yield d, k, tid
            tid += 1


def execute_trials(cfg: ExperimentConfig, workers: Optional[int] = None) -> List[TrialOutput]:
    workers = worker_count() if workers is None else workers
    raw = cfg.to_dict()
    tasks = list(_tasks(cfg))
    if workers <= 1 or len(tasks) <= 1:
        outs = [run_trial(raw, d, k, tid) for d, k, tid in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_trial, raw, d, k, tid) for d, k, tid in tasks]
            outs = [f.result() for f in futs]
    outs.sort(key=lambda o: o.record.trial_id)
    return outs


# files -----------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records: List[TrialRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_records(path) -> List[TrialRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TrialRecord(
                int(row["trial_id"]), int(row["seed"]), int(row["d"]), row["algorithm"], int(row["queries"]),
                row["success"] == "true", float(row["final_inner_product"]), float(row["max_inner_product"]),
                float(row["cum_regret"]), float(row["wall_time_ms"]),
            ))
    return out


def summarize(cfg: ExperimentConfig, records: List[TrialRecord], curves: Optional[Dict[int, List]] = None) -> Dict:
    """Per-dimension means, binomial CIs, burn-in cost estimates and log-log slopes.

    Depends only on the records (plus regret curves when present), so it can be
    recomputed from records.csv.
    """
    per_d = {}
    medians = {}
    for d in cfg.d_list:
        rs = [r for r in records if r.d == d]
        k = sum(r.success for r in rs)
        lo, hi = binomial_ci(k, len(rs))
        entry = {
            "trials": len(rs),
            "successes": k,
            "success_rate": k / len(rs) if rs else 0.0,
            "success_ci99": [lo, hi],
            "mean_queries": float(np.mean([r.queries for r in rs])),
            "mean_final_inner_product": float(np.mean([r.final_inner_product for r in rs])),
            "mean_max_inner_product": float(np.mean([r.max_inner_product for r in rs])),
            "mean_cum_regret": float(np.mean([r.cum_regret for r in rs])),
        }
        if cfg.experiment == "burnin_cost":
            try:
                est = estimate_burnin_cost(rs, seed=cfg.seed % (2**32))
                entry["median_queries"] = est.median
                entry["median_ci90"] = [est.ci_low, est.ci_high]
                entry["flagged"] = False
                medians[d] = est.median
            except InsufficientDataError as exc:
                entry["flagged"] = True
                entry["flag_reason"] = str(exc)
        if curves and d in curves:
            T, R = zip(*curves[d])
            entry["regret_curve"] = {"T": list(T), "mean_regret": list(R)}
            try:
                rep = regret_phase_report(T, R, d)
                entry["phases"] = {"single_phase": rep.single_phase, "knee1": rep.knee1, "knee2": rep.knee2,
                                   "plateau": rep.plateau, "sqrt_coef": rep.sqrt_coef}
            except Exception as exc:  # fit-degenerate curves are reported, not fatal
                entry["phases"] = {"error": str(exc)}
        per_d[str(d)] = entry
    summary = {
        "experiment": cfg.experiment,
        "algorithm": cfg.algorithm_label,
        "link": cfg.link_fn.label,
        "per_d": per_d,
        "kernel_backend": kernels.active.__name__.rsplit(".", 1)[-1].lstrip("_"),
    }
    if len(medians) >= 2:
        ds = sorted(medians)
        summary["fitted_slope"] = fit_loglog_slope(ds, [medians[d] for d in ds])
    return summary


def _mean_curves(cfg, outs: List[TrialOutput]) -> Dict[int, List[Tuple[int, float]]]:
    res = {}
    for d in cfg.d_list:
        pts = [o.curve for o in outs if o.record.d == d and o.curve]
        if not pts:
            continue
        Ts = [t for t, _ in pts[0]]
        res[d] = [(t, float(np.mean([p[i][1] for p in pts]))) for i, t in enumerate(Ts)]
    return res


def theory_curves(link, d: int, c: float = 1.0, delta: float = math.exp(-1.0), t_max: int = 10**13):
    """Lower- and upper-bound trajectories for one dimension (leaping integrator)."""
    lb = lb_epsilon_sequence(link, d, c, delta, t_max=t_max, leap_tol=1e-5)
    ub = ub_trajectory_ode(link, d, math.sqrt(c / d), t_max=t_max, leap_tol=1e-5)
    return lb, ub


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None):
    """Run every (d, trial) pair, write records.csv, summary.json and curves/*.csv."""
    out_dir = Path(cfg.output_dir)
    (out_dir / "curves").mkdir(parents=True, exist_ok=True)
    link = cfg.link_fn
    c = float(cfg.constant("c", 1.0))
    if cfg.experiment == "theory_curves":
        summary = {"experiment": "theory_curves", "link": link.label, "per_d": {}}
        for d in cfg.d_list:
            lb, ub = theory_curves(link, d, c)
            path = out_dir / "curves" / f"theory_d{d}.csv"
            lb.write_csv(path)
            ub.write_csv(path, header=False, mode="a")
            summary["per_d"][str(d)] = {"lb_crossing_half": lb.crossing, "ub_crossing_half": ub.crossing}
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
        return [], summary
    outs = execute_trials(cfg, workers)
    records = [o.record for o in outs]
    write_records(records, out_dir / "records.csv")
    curves = _mean_curves(cfg, outs) if cfg.experiment == "regret_curve" else None
    if curves:
        for d, pts in curves.items():
            with open(out_dir / "curves" / f"regret_d{d}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["T", "mean_cum_regret"])
                w.writerows([[t, repr(r)] for t, r in pts])
    if cfg.experiment == "trajectory_overlay":
        for d in cfg.d_list:
            path = out_dir / "curves" / f"overlay_d{d}.csv"
            lb, ub = theory_curves(link, d, c)
            lb.write_csv(path)
            ub.write_csv(path, header=False, mode="a")
            for o in outs:
                if o.record.d == d and o.curve:
                    t = np.array([p[0] for p in o.curve])
                    x = np.array([p[1] for p in o.curve])
                    meas = TrajectoryCurve(MEASURED, t, x, {"d": d, "link": link.label, "c": "", "delta": cfg.delta})
                    meas.write_csv(path, header=False, mode="a")
    summary = summarize(cfg, records, curves)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return records, summary
