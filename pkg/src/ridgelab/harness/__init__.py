"""Experiment configuration, Monte Carlo execution and estimators."""
from .config import ExperimentConfig
from .estimators import estimate_burnin_cost, regret_phase_report
from .runner import TrialRecord, run_experiment

__all__ = ["ExperimentConfig", "TrialRecord", "run_experiment", "estimate_burnin_cost", "regret_phase_report"]
