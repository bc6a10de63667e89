"""Experiment configuration: JSON <-> ExperimentConfig with field-level validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from ..errors import ConfigError, LinkValidationError
from ..linkfn import LinkFunction

EXPERIMENTS = ("burnin_cost", "regret_curve", "trajectory_overlay", "baseline_headtohead", "theory_curves")
ALGORITHMS = ("two_stage", "eluder_ucb", "oracle_learner", "nonadaptive")
TIE_BREAKS = ("optimistic_search", "adversarial_packing")
ORACLES = ("zero", "random", "least_squares")
POLICIES = ("play_estimate", "estimate_plus_perturbation")
DEFAULT_MAX_QUERIES = 10**15


@dataclass
class ExperimentConfig:
    experiment: str
    link: Dict[str, Any]
    d_list: List[int]
    T: Optional[int] = None
    delta: float = 0.1
    sigma: float = 1.0
    trials: int = 1
    seed: int = 0
    algorithm: Dict[str, Any] = field(default_factory=lambda: {"name": "two_stage"})
    constants: Dict[str, Any] = field(default_factory=lambda: {"c": 1.0, "kappa": 4.0, "cf_lower": None})
    output_dir: str = "results"
    max_queries: int = DEFAULT_MAX_QUERIES
    T_list: Optional[List[int]] = None
    learning_mode: str = "regret"

    @property
    def link_fn(self) -> LinkFunction:
        return LinkFunction.from_dict(self.link)

    @property
    def algorithm_name(self) -> str:
        return self.algorithm["name"]

    @property
    def algorithm_label(self) -> str:
        a = self.algorithm
        if a["name"] == "eluder_ucb":
            return f"eluder_ucb[{a.get('tie_break', 'optimistic_search')}]"
        if a["name"] == "oracle_learner":
            return f"oracle_learner[{a.get('oracle', 'zero')},{a.get('policy', 'play_estimate')}]"
        return a["name"]

    def constant(self, key: str, default=None):
        return self.constants.get(key, default) if self.constants else default

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError({"<root>": "config must be a JSON object"})
        errors: Dict[str, str] = {}
        known = set(cls.__dataclass_fields__)
        for k in raw:
            if k not in known:
                errors[k] = "unknown field"
        for k in ("experiment", "link", "d_list"):
            if k not in raw:
                errors[k] = "required field missing"
        if errors:
            raise ConfigError(errors)
        data = dict(raw)
        alg = data.get("algorithm", {"name": "two_stage"})
        if isinstance(alg, str):
            data["algorithm"] = {"name": alg}
        consts = {"c": 1.0, "kappa": 4.0, "cf_lower": None}
        if isinstance(data.get("constants"), dict):
            consts.update(data["constants"])
            data["constants"] = consts
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError({"<file>": f"invalid JSON: {exc}"}) from exc
        return cls.from_dict(raw)

    def validate(self):
        e: Dict[str, str] = {}
        if self.experiment not in EXPERIMENTS:
            e["experiment"] = f"must be one of {', '.join(EXPERIMENTS)}"
        if not isinstance(self.link, dict):
            e["link"] = "must be an object such as {\"kind\": \"cubic\"}"
        else:
            try:
                self.link_fn.validate()
            except (LinkValidationError, ValueError, KeyError, TypeError) as exc:
                e["link"] = str(exc)
        if not isinstance(self.d_list, list) or not self.d_list:
            e["d_list"] = "must be a nonempty list of integers"
        elif not all(_is_int(d) and d >= 16 for d in self.d_list):
            e["d_list"] = "every dimension must be an integer >= 16"
        if self.T is not None and not (_is_int(self.T) and self.T >= 1):
            e["T"] = "must be a positive integer"
        if not (_is_real(self.delta) and 0 < self.delta < 0.5):
            e["delta"] = "must lie in (0, 0.5)"
        if not (_is_real(self.sigma) and self.sigma >= 0):
            e["sigma"] = "must be a nonnegative real"
        if not (_is_int(self.trials) and self.trials >= 1):
            e["trials"] = "must be an integer >= 1"
        if not (_is_int(self.seed) and 0 <= self.seed < 2**64):
            e["seed"] = "must be an integer in [0, 2^64)"
        if not (_is_int(self.max_queries) and self.max_queries >= 1):
            e["max_queries"] = "must be a positive integer"
        if self.learning_mode not in ("regret", "estimation"):
            e["learning_mode"] = "must be 'regret' or 'estimation'"
        if self.T_list is not None and not (
            isinstance(self.T_list, list) and self.T_list and all(_is_int(t) and t >= 1 for t in self.T_list)
        ):
            e["T_list"] = "must be a nonempty list of positive integers"
        if not isinstance(self.output_dir, str) or not self.output_dir:
            e["output_dir"] = "must be a nonempty path string"
        self._validate_algorithm(e)
        self._validate_constants(e)
        if self.experiment in ("regret_curve", "baseline_headtohead") and self.T is None and self.T_list is None:
            e["T"] = f"required for experiment {self.experiment}"
        if self.algorithm_name_safe() in ("eluder_ucb", "oracle_learner", "nonadaptive") and self.T is None:
            e["T"] = f"required for algorithm {self.algorithm_name_safe()}"
        if e:
            raise ConfigError(e)

    def algorithm_name_safe(self):
        return self.algorithm.get("name") if isinstance(self.algorithm, dict) else None

    def _validate_algorithm(self, e):
        a = self.algorithm
        if not isinstance(a, dict) or a.get("name") not in ALGORITHMS:
            e["algorithm"] = f"name must be one of {', '.join(ALGORITHMS)}"
            return
        allowed = {"two_stage": {"name"}, "nonadaptive": {"name", "estimator"},
                   "eluder_ucb": {"name", "tie_break", "T0", "refit_interval"},
                   "oracle_learner": {"name", "oracle", "policy"}}[a["name"]]
        extra = set(a) - allowed
        if extra:
            e["algorithm"] = f"unknown keys for {a['name']}: {', '.join(sorted(extra))}"
        elif a["name"] == "eluder_ucb" and a.get("tie_break", "optimistic_search") not in TIE_BREAKS:
            e["algorithm.tie_break"] = f"must be one of {', '.join(TIE_BREAKS)}"
        elif a["name"] == "oracle_learner":
            if a.get("oracle", "zero") not in ORACLES:
                e["algorithm.oracle"] = f"must be one of {', '.join(ORACLES)}"
            if a.get("policy", "play_estimate") not in POLICIES:
                e["algorithm.policy"] = f"must be one of {', '.join(POLICIES)}"
        elif a["name"] == "nonadaptive" and a.get("estimator", "max_correlation_ls") != "max_correlation_ls":
            e["algorithm.estimator"] = "only 'max_correlation_ls' is available"

    def _validate_constants(self, e):
        c = self.constants
        if not isinstance(c, dict):
            e["constants"] = "must be an object"
            return
        extra = set(c) - {"c", "kappa", "cf_lower"}
        if extra:
            e["constants"] = f"unknown keys: {', '.join(sorted(extra))}"
        if not (_is_real(c.get("c", 1.0)) and c.get("c", 1.0) > 0):
            e["constants.c"] = "must be a positive real"
        if not (_is_real(c.get("kappa", 4.0)) and c.get("kappa", 4.0) > 0):
            e["constants.kappa"] = "must be a positive real"
        cf = c.get("cf_lower")
        if cf is not None and not (_is_real(cf) and cf > 0):
            e["constants.cf_lower"] = "must be null or a positive real"


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
