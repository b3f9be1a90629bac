"""Selection policies: who gets compelled or subsidized into court, and when.

Five per-step mechanisms are implemented, together with the agent's
settle-vs-litigate response.  An agent litigates exactly when the net cost
of court, cost - subsidy, does not exceed twice the learner's current error
bound (the largest settlement shift a court visit could produce); ties
litigate.

* ``no_subsidy``          - leave every agent alone.
* ``etc``                 - compel the first ceil(alpha * sqrt(T / c_max)) cases.
* ``dynamic_compelling``  - compel each case independently with probability
                            min(1, alpha / sqrt(t * c_max)); needs no horizon.
* ``subsidy_sampling``    - draw a random subsidy whose tail probability
                            Pr[s >= c - 2*err] equals alpha / sqrt(t * c) for
                            every cost c in the known range.
* ``kwik``                - compel unless the courted history provably covers
                            the query direction (eigenvalue-gated prediction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .core import CaseFeatures, ConfigurationError

__all__ = [
    "ActionKind",
    "SelectionAction",
    "NO_ACTION",
    "COMPEL",
    "subsidy_action",
    "agent_decision",
    "etc_compel_count",
    "dynamic_compel_probability",
    "subsidy_tail_probability",
    "sample_subsidy",
    "GateDecision",
    "kwik_gate",
    "kwik_default_alpha1",
    "NoSubsidyConfig",
    "EtcConfig",
    "DynamicCompellingConfig",
    "SubsidySamplingConfig",
    "KwikConfig",
    "PolicyConfig",
    "make_policy",
    "policy_label",
    "policy_tag",
]

# Eigenvalues at or above this count as "covered" directions in the gate.
_GATE_EIGENVALUE_FLOOR = 1.0


class ActionKind(Enum):
    NO_ACTION = "no_action"
    COMPEL = "compel"
    SUBSIDY = "subsidy"


@dataclass(frozen=True)
class SelectionAction:
    """Per-step policy output: do nothing, compel, or offer a subsidy."""

    kind: ActionKind
    subsidy: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.subsidy) or self.subsidy < 0.0:
            raise ConfigurationError(f"subsidy must be finite and >= 0, got {self.subsidy}")


NO_ACTION = SelectionAction(ActionKind.NO_ACTION)
COMPEL = SelectionAction(ActionKind.COMPEL)


def subsidy_action(amount: float) -> SelectionAction:
    return SelectionAction(ActionKind.SUBSIDY, amount)


def agent_decision(cost: float, subsidy: float, err_before: float) -> bool:
    """True when the agent litigates: cost - subsidy <= 2 * err_before (ties litigate)."""
    return cost - subsidy <= 2.0 * err_before


def etc_compel_count(horizon: int, alpha: float, c_max: float) -> int:
    """Length of the compel phase: ceil(alpha * sqrt(T / c_max)), capped at T."""
    value = alpha * math.sqrt(horizon / c_max)
    # tiny slack guards ceil against float fuzz on exact integers
    return min(horizon, math.ceil(value - 1e-9))


def dynamic_compel_probability(t: int, alpha: float, c_max: float) -> float:
    """Per-step compel probability min(1, alpha / sqrt(t * c_max))."""
    return min(1.0, alpha / math.sqrt(t * c_max))


def subsidy_tail_probability(t: int, c: float, alpha: float, phase1: bool = False) -> float:
    """Pr[subsidy >= c - 2*err] under the sampling distribution at step t.

    Equals alpha / sqrt(t * c), scaled by 1/alpha during the early phase in
    which the unscaled distribution would not be a probability measure.
    """
    p = alpha / math.sqrt(t * c)
    if phase1:
        p /= alpha
    if p > 1.0:
        raise ConfigurationError(
            f"subsidy tail probability {p} > 1 at t={t}, c={c}: distribution ill-defined"
        )
    return p


def sample_subsidy(
    t: int,
    two_err: float,
    alpha: float,
    c_min: float,
    c_max: float,
    phase1: bool,
    rng,
) -> float:
    """Draw a subsidy by inverse-transform sampling.

    The distribution places a point mass at c_max - two_err, a density
    proportional to (s + two_err)^(-3/2) on [c_min - two_err, c_max - two_err],
    and the remaining mass at 0, so that the tail identity
    Pr[s >= c - two_err] = alpha / sqrt(t * c) holds for every c in
    [c_min, c_max] (scaled uniformly by 1/alpha during phase 1).  Support
    points below zero are floored at 0; the affected agents litigate at
    s = 0 anyway, so their decisions are unchanged.
    """
    p_min = subsidy_tail_probability(t, c_min, alpha, phase1)
    p_max = subsidy_tail_probability(t, c_max, alpha, phase1)
    u = rng.random()
    if u <= p_max:
        return max(0.0, c_max - two_err)
    if u <= p_min:
        alpha_eff = 1.0 if phase1 else alpha
        c = (alpha_eff / (u * math.sqrt(t))) ** 2
        return max(0.0, c - two_err)
    return 0.0


class GateDecision(Enum):
    PREDICT = "predict"
    COMPEL = "compel"


def _gate_from_eig(
    eigvals: np.ndarray,
    eigvecs: np.ndarray,
    query: np.ndarray,
    alpha1: float,
    alpha2: float,
) -> GateDecision:
    """Gate on the courted-history spectrum: predict only if the query is covered.

    Splits the query across the eigenvectors of the courted Gram matrix.
    Directions with eigenvalue >= 1 contribute projection^2 / eigenvalue to
    the covered mass; the rest contribute their raw squared projection.
    """
    projections = eigvecs.T @ query
    covered = eigvals >= _GATE_EIGENVALUE_FLOOR
    sq = projections * projections
    covered_mass = float((sq[covered] / eigvals[covered]).sum())
    novel_mass = float(sq[~covered].sum())
    if covered_mass <= alpha1 * alpha1 and novel_mass <= alpha2 * alpha2:
        return GateDecision.PREDICT
    return GateDecision.COMPEL


def kwik_gate(courted: np.ndarray, query: np.ndarray, alpha1: float, alpha2: float) -> GateDecision:
    """Decide whether past courted (augmented) cases cover an augmented query.

    ``courted`` is the (m, k) stack of augmented feature rows already sent to
    court; an empty history leaves every direction uncovered, so any query
    with norm above ``alpha2`` is compelled.
    """
    courted = np.asarray(courted, dtype=float)
    query = np.asarray(query, dtype=float)
    if courted.size == 0:
        gram = np.zeros((query.shape[0], query.shape[0]))
    else:
        gram = courted.T @ courted
    eigvals, eigvecs = np.linalg.eigh(gram)
    return _gate_from_eig(np.clip(eigvals, 0.0, None), eigvecs, query, alpha1, alpha2)


def kwik_default_alpha1(epsilon: float, delta: float, dim: int, constant: float = 1.0) -> float:
    """Concrete instantiation of the covered-mass threshold for the gate."""
    return constant * epsilon**2 / (dim * math.log(dim + 1) * math.sqrt(math.log(1.0 / (epsilon * delta))))


@dataclass(frozen=True)
class NoSubsidyConfig:
    """Status quo: no compulsion, no subsidies."""


@dataclass(frozen=True)
class EtcConfig:
    """Explore-then-commit: compel a horizon-sized prefix, then leave agents alone."""

    horizon: int
    alpha: float
    c_max: float

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigurationError(f"policy horizon must be >= 1, got {self.horizon}")
        if not (self.alpha > 0 and self.c_max > 0):
            raise ConfigurationError("etc policy needs alpha > 0 and c_max > 0")

    @property
    def compel_count(self) -> int:
        return etc_compel_count(self.horizon, self.alpha, self.c_max)


@dataclass(frozen=True)
class DynamicCompellingConfig:
    """Horizon-free compelling with decaying per-step probability."""

    alpha: float
    c_max: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.c_max > 0):
            raise ConfigurationError("dynamic_compelling policy needs alpha > 0 and c_max > 0")


@dataclass(frozen=True)
class SubsidySamplingConfig:
    """Random subsidies with the decaying tail law over a known cost range."""

    alpha: float
    c_min: float
    c_max: float

    def __post_init__(self) -> None:
        if not self.c_min > 0:
            raise ConfigurationError(f"subsidy policy c_min must be > 0, got {self.c_min}")
        if self.c_max < self.c_min:
            raise ConfigurationError("subsidy policy needs c_max >= c_min")
        if not self.alpha > 0:
            raise ConfigurationError("subsidy policy needs alpha > 0")

    @property
    def transition_step(self) -> int:
        """Last step of the scaled early phase; 0 when no scaling is needed."""
        if self.alpha / math.sqrt(self.c_min) > 1.0:
            return max(math.floor(self.alpha**2), math.floor(self.alpha**2 / self.c_min))
        return 0


@dataclass(frozen=True)
class KwikConfig:
    """Eigenvalue-gated compelling with per-case accuracy targets.

    ``alpha1`` and ``alpha2`` may be given directly; otherwise they default
    to ``alpha1_constant * epsilon^2 / (n log(n+1) sqrt(log(1/(epsilon
    delta))))`` and ``epsilon / 4`` once the case dimension is known.
    """

    epsilon: float
    delta: float
    alpha1: float | None = None
    alpha2: float | None = None
    alpha1_constant: float = 1.0

    def __post_init__(self) -> None:
        if not (0 < self.epsilon and 0 < self.delta < 1):
            raise ConfigurationError("kwik policy needs epsilon > 0 and delta in (0, 1)")

    def resolve_alpha1(self, dim: int) -> float:
        if self.alpha1 is not None:
            return self.alpha1
        return kwik_default_alpha1(self.epsilon, self.delta, dim, self.alpha1_constant)

    def resolve_alpha2(self) -> float:
        return self.alpha2 if self.alpha2 is not None else self.epsilon / 4.0


PolicyConfig = Union[
    NoSubsidyConfig, EtcConfig, DynamicCompellingConfig, SubsidySamplingConfig, KwikConfig
]

_LABELS: dict[type, str] = {
    NoSubsidyConfig: "no_subsidy",
    EtcConfig: "etc",
    DynamicCompellingConfig: "dynamic_compelling",
    SubsidySamplingConfig: "subsidy_sampling",
    KwikConfig: "kwik",
}

# Stable per-variant integers for seed derivation; adding a policy must not
# perturb the derived streams of existing ones.
_TAGS: dict[type, int] = {
    NoSubsidyConfig: 1,
    EtcConfig: 2,
    DynamicCompellingConfig: 3,
    SubsidySamplingConfig: 4,
    KwikConfig: 5,
}


def policy_label(config: PolicyConfig) -> str:
    return _LABELS[type(config)]


def policy_tag(config: PolicyConfig) -> int:
    return _TAGS[type(config)]


class _BasePolicy:
    """Per-run policy state; ``select`` is called once per step, in order."""

    def select(self, t: int, case: CaseFeatures, err_before: float, rng) -> SelectionAction:
        raise NotImplementedError

    def record_court(self, case: CaseFeatures) -> None:
        """Observe that ``case`` went to court (compelled or voluntarily)."""

    def inactive_from(self, t: int) -> bool:
        """True if the policy is guaranteed to emit NoAction at every step >= t."""
        return False


class NoSubsidyPolicy(_BasePolicy):
    def select(self, t, case, err_before, rng):
        return NO_ACTION

    def inactive_from(self, t):
        return True


class EtcPolicy(_BasePolicy):
    def __init__(self, config: EtcConfig):
        self.compel_count = config.compel_count

    def select(self, t, case, err_before, rng):
        return COMPEL if t <= self.compel_count else NO_ACTION

    def inactive_from(self, t):
        return t > self.compel_count


class DynamicCompellingPolicy(_BasePolicy):
    def __init__(self, config: DynamicCompellingConfig):
        self.alpha = config.alpha
        self.c_max = config.c_max

    def select(self, t, case, err_before, rng):
        p = dynamic_compel_probability(t, self.alpha, self.c_max)
        return COMPEL if rng.random() < p else NO_ACTION


class SubsidySamplingPolicy(_BasePolicy):
    def __init__(self, config: SubsidySamplingConfig):
        self.config = config
        self.transition_step = config.transition_step
        # The scaled distribution must already be a probability measure at
        # t = 1, the worst step; fail fast instead of mid-run.
        subsidy_tail_probability(1, config.c_min, config.alpha, phase1=self.transition_step >= 1)

    def select(self, t, case, err_before, rng):
        cfg = self.config
        amount = sample_subsidy(
            t, 2.0 * err_before, cfg.alpha, cfg.c_min, cfg.c_max, t <= self.transition_step, rng
        )
        return subsidy_action(amount)


class KwikPolicy(_BasePolicy):
    """Maintains the Gram matrix of courted augmented cases and gates on it."""

    def __init__(self, config: KwikConfig, dim: int):
        self.alpha1 = config.resolve_alpha1(dim)
        self.alpha2 = config.resolve_alpha2()
        k = dim + 1
        self.gram = np.zeros((k, k))
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    def select(self, t, case, err_before, rng):
        if self._eig is None:
            eigvals, eigvecs = np.linalg.eigh(self.gram)
            self._eig = (np.clip(eigvals, 0.0, None), eigvecs)
        decision = _gate_from_eig(*self._eig, case.augmented(), self.alpha1, self.alpha2)
        return COMPEL if decision is GateDecision.COMPEL else NO_ACTION

    def record_court(self, case):
        x = case.augmented()
        self.gram += np.outer(x, x)
        self._eig = None


def make_policy(config: PolicyConfig, case_dim: int | None = None) -> _BasePolicy:
    """Build the per-run stateful policy for ``config``."""
    if isinstance(config, NoSubsidyConfig):
        return NoSubsidyPolicy()
    if isinstance(config, EtcConfig):
        return EtcPolicy(config)
    if isinstance(config, DynamicCompellingConfig):
        return DynamicCompellingPolicy(config)
    if isinstance(config, SubsidySamplingConfig):
        return SubsidySamplingPolicy(config)
    if isinstance(config, KwikConfig):
        if case_dim is None:
            raise ConfigurationError("kwik policy requires vector cases")
        return KwikPolicy(config, case_dim)
    raise ConfigurationError(f"unknown policy config {config!r}")
