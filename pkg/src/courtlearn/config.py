"""Experiment configuration: a flat JSON schema, validated eagerly.

Every validation error names the offending field path (``cost.c_min``,
``policies[1].epsilon``, ...) so a sweep that dies does so before any run
starts.  See the README for the full schema and defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .core import (
    BallCases,
    CaseSpec,
    ConfigurationError,
    ConstantTruth,
    CostModel,
    FixedCosts,
    GroundTruth,
    LinearTruth,
    PointMassCosts,
    SingletonCases,
    UniformCosts,
)
from .learners import LearnerFamily, LearnerKind
from .policies import (
    DynamicCompellingConfig,
    EtcConfig,
    KwikConfig,
    NoSubsidyConfig,
    PolicyConfig,
    SubsidySamplingConfig,
)

__all__ = ["PolicyRequest", "ExperimentSpec", "load_config", "parse_config"]

DEFAULT_REPLICATIONS = 100
DEFAULT_ERR_CONSTANT = 1.0

_POLICY_NAMES = ("no_subsidy", "etc", "dynamic_compelling", "subsidy_sampling", "kwik")


@dataclass(frozen=True)
class PolicyRequest:
    """A policy entry from the config file; horizon-dependent pieces are
    resolved per sweep point by :meth:`materialize`."""

    name: str
    epsilon: float | None = None
    delta: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None
    alpha1_constant: float = 1.0

    def materialize(self, spec: "ExperimentSpec", horizon: int) -> PolicyConfig:
        alpha = spec.truth.alpha
        costs = spec.costs
        if self.name == "no_subsidy":
            return NoSubsidyConfig()
        if self.name == "etc":
            return EtcConfig(horizon=horizon, alpha=alpha, c_max=costs.c_max)
        if self.name == "dynamic_compelling":
            return DynamicCompellingConfig(alpha=alpha, c_max=costs.c_max)
        if self.name == "subsidy_sampling":
            return SubsidySamplingConfig(alpha=alpha, c_min=costs.c_min, c_max=costs.c_max)
        if self.name == "kwik":
            return KwikConfig(
                epsilon=self.epsilon,
                delta=self.delta,
                alpha1=self.alpha1,
                alpha2=self.alpha2,
                alpha1_constant=self.alpha1_constant,
            )
        raise ConfigurationError(f"unknown policy name {self.name!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment: base run pieces, policies, and a horizon sweep."""

    truth: GroundTruth
    cases: CaseSpec
    costs: CostModel
    learner: LearnerKind
    policies: tuple[PolicyRequest, ...]
    sweep: tuple[int, ...]
    replications: int
    seed: int
    out_dir: str
    emit: tuple[str, ...]

    def canonical(self) -> dict:
        """JSON round-trip of the spec, used for digests and provenance."""
        truth: dict[str, Any]
        if isinstance(self.truth, ConstantTruth):
            truth = {"family": "constant", "mu": self.truth.mu}
        else:
            truth = {
                "family": "linear",
                "beta": [float(b) for b in self.truth.beta],
                "beta0": self.truth.beta0,
            }
        truth.update(sigma=self.truth.sigma, alpha=self.truth.alpha)
        if isinstance(self.cases, SingletonCases):
            cases: dict[str, Any] = {"kind": "singleton"}
        else:
            cases = {"kind": "ball", "dim": self.cases.dim}
        if isinstance(self.costs, PointMassCosts):
            cost: dict[str, Any] = {"kind": "point", "c": self.costs.c}
        elif isinstance(self.costs, UniformCosts):
            cost = {"kind": "uniform", "c_min": self.costs.c_min, "c_max": self.costs.c_max}
        else:
            cost = {"kind": "sequence", "costs": list(self.costs.costs)}
        policies = []
        for p in self.policies:
            entry: dict[str, Any] = {"name": p.name}
            for key in ("epsilon", "delta", "alpha1", "alpha2"):
                if getattr(p, key) is not None:
                    entry[key] = getattr(p, key)
            if p.name == "kwik":
                entry["alpha1_constant"] = p.alpha1_constant
            policies.append(entry)
        return {
            "truth": truth,
            "cases": cases,
            "cost": cost,
            "learner": {
                "kind": self.learner.family.value,
                "err_constant": self.learner.err_constant,
                "radius": self.learner.radius,
            },
            "policies": policies,
            "sweep": list(self.sweep),
            "replications": self.replications,
            "seed": self.seed,
        }


class _Reader:
    """Mapping access with field-pathed errors."""

    def __init__(self, data: dict, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path or 'config'}: expected an object")
        self.data = data
        self.path = path

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def require(self, key: str) -> Any:
        if key not in self.data:
            raise ConfigurationError(f"missing required field {self._at(key)}")
        return self.data[key]

    def number(self, key: str, default: float | None = None) -> float:
        value = self.data.get(key, default)
        if value is None:
            raise ConfigurationError(f"missing required field {self._at(key)}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{self._at(key)}: expected a number, got {value!r}")
        return float(value)

    def integer(self, key: str, default: int | None = None) -> int:
        value = self.data.get(key, default)
        if value is None:
            raise ConfigurationError(f"missing required field {self._at(key)}")
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{self._at(key)}: expected an integer, got {value!r}")
        return value

    def string(self, key: str, default: str | None = None) -> str:
        value = self.data.get(key, default)
        if value is None:
            raise ConfigurationError(f"missing required field {self._at(key)}")
        if not isinstance(value, str):
            raise ConfigurationError(f"{self._at(key)}: expected a string, got {value!r}")
        return value

    def child(self, key: str) -> "_Reader":
        return _Reader(self.require(key), self._at(key))


def _parse_truth(reader: _Reader) -> GroundTruth:
    family = reader.string("family")
    sigma = reader.number("sigma")
    alpha = reader.number("alpha")
    try:
        if family == "constant":
            return ConstantTruth(mu=reader.number("mu"), sigma=sigma, alpha=alpha)
        if family == "linear":
            beta = reader.require("beta")
            if not isinstance(beta, list) or not beta:
                raise ConfigurationError(f"{reader._at('beta')}: expected a non-empty list")
            return LinearTruth(
                beta=np.asarray(beta, dtype=float),
                beta0=reader.number("beta0"),
                sigma=sigma,
                alpha=alpha,
            )
    except ConfigurationError as exc:
        raise ConfigurationError(f"{reader.path}: {exc}") from None
    raise ConfigurationError(f"{reader._at('family')}: unknown family {family!r}")


def _parse_cases(reader: _Reader) -> CaseSpec:
    kind = reader.string("kind")
    if kind == "singleton":
        return SingletonCases()
    if kind == "ball":
        dim = reader.integer("dim")
        if dim < 1:
            raise ConfigurationError(f"{reader._at('dim')}: must be >= 1, got {dim}")
        return BallCases(dim)
    raise ConfigurationError(f"{reader._at('kind')}: unknown case space {kind!r}")


def _parse_costs(reader: _Reader) -> CostModel:
    kind = reader.string("kind")
    # core's own messages already carry cost.* field names
    if kind == "point":
        return PointMassCosts(reader.number("c"))
    if kind == "uniform":
        return UniformCosts(reader.number("c_min"), reader.number("c_max"))
    if kind == "sequence":
        costs = reader.require("costs")
        if not isinstance(costs, list):
            raise ConfigurationError(f"{reader._at('costs')}: expected a list")
        return FixedCosts(tuple(costs))
    raise ConfigurationError(f"{reader._at('kind')}: unknown cost model {kind!r}")


def _parse_learner(reader: _Reader) -> LearnerKind:
    kind = reader.string("kind")
    families = {f.value: f for f in LearnerFamily}
    if kind not in families:
        raise ConfigurationError(f"{reader._at('kind')}: unknown learner {kind!r}")
    return LearnerKind(
        family=families[kind],
        err_constant=reader.number("err_constant", DEFAULT_ERR_CONSTANT),
        radius=reader.number("radius", 1.0),
    )


def _parse_policy(entry: Any, path: str) -> PolicyRequest:
    if isinstance(entry, str):
        entry = {"name": entry}
    reader = _Reader(entry, path)
    name = reader.string("name")
    if name not in _POLICY_NAMES:
        raise ConfigurationError(
            f"{path}.name: unknown policy {name!r} (expected one of {', '.join(_POLICY_NAMES)})"
        )
    if name == "kwik":
        request = PolicyRequest(
            name=name,
            epsilon=reader.number("epsilon"),
            delta=reader.number("delta"),
            alpha1=reader.number("alpha1") if "alpha1" in entry else None,
            alpha2=reader.number("alpha2") if "alpha2" in entry else None,
            alpha1_constant=reader.number("alpha1_constant", 1.0),
        )
        try:
            KwikConfig(
                epsilon=request.epsilon,
                delta=request.delta,
                alpha1=request.alpha1,
                alpha2=request.alpha2,
                alpha1_constant=request.alpha1_constant,
            )
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        return request
    return PolicyRequest(name=name)


def parse_config(data: dict) -> ExperimentSpec:
    """Validate a parsed config mapping into an :class:`ExperimentSpec`."""
    root = _Reader(data)
    truth = _parse_truth(root.child("truth"))
    cases = _parse_cases(root.child("cases")) if "cases" in data else SingletonCases()
    costs = _parse_costs(root.child("cost"))
    learner = _parse_learner(root.child("learner"))

    raw_policies = root.require("policies")
    if not isinstance(raw_policies, list) or not raw_policies:
        raise ConfigurationError("policies: expected a non-empty list")
    policies = tuple(
        _parse_policy(entry, f"policies[{i}]") for i, entry in enumerate(raw_policies)
    )

    raw_sweep = root.require("sweep")
    if not isinstance(raw_sweep, list) or not raw_sweep:
        raise ConfigurationError("sweep: expected a non-empty list of horizons")
    sweep: list[int] = []
    for i, value in enumerate(raw_sweep):
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigurationError(f"sweep[{i}]: expected an integer horizon >= 1, got {value!r}")
        sweep.append(value)
    if any(b <= a for a, b in zip(sweep, sweep[1:])):
        raise ConfigurationError("sweep must be increasing")

    replications = root.integer("replications", DEFAULT_REPLICATIONS)
    if replications < 1:
        raise ConfigurationError(f"replications: must be >= 1, got {replications}")
    emit_raw = data.get("emit", ["csv"])
    if not isinstance(emit_raw, list) or any(e not in ("csv", "json") for e in emit_raw):
        raise ConfigurationError("emit: expected a subset of ['csv', 'json']")

    spec = ExperimentSpec(
        truth=truth,
        cases=cases,
        costs=costs,
        learner=learner,
        policies=policies,
        sweep=tuple(sweep),
        replications=replications,
        seed=root.integer("seed", 0),
        out_dir=root.string("out_dir", "results"),
        emit=tuple(emit_raw),
    )
    # Materialize every (policy, horizon) cell now so bad combinations fail
    # at load time, not mid-sweep.
    from .sim import RunConfig

    for i, policy in enumerate(spec.policies):
        for horizon in spec.sweep:
            try:
                RunConfig(
                    horizon=horizon,
                    truth=truth,
                    cases=cases,
                    costs=costs,
                    learner=learner,
                    policy=policy.materialize(spec, horizon),
                    seed=spec.seed,
                )
            except ConfigurationError as exc:
                raise ConfigurationError(f"policies[{i}] ({policy.name}): {exc}") from None
    return spec


def load_config(path: str | Path) -> ExperimentSpec:
    """Read and validate an experiment config file (JSON)."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(data)
