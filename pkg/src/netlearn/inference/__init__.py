"""Exact Bayesian beliefs and myopic actions on observation networks."""

from __future__ import annotations

from ..errors import ConfigError
from ..network import Network
from ..signals import SignalModel
from .core import TIE_ACTION, TIE_TOL, Beliefs, BeliefState, myopic_action, myopic_actions
from .factorized import CompleteEngine, FactorizedEngine, StarEngine
from .generic import DEFAULT_BUDGET, GenericEngine, enumeration_steps

ENGINES = ("auto", "generic", "factorized", "star")


def _binary_stationary(model: SignalModel) -> bool:
    d = model.default
    return model.stationary and d.size == 2 and bool((d.pg > 0).all()) and d.llrs()[1] >= d.llrs()[0]


def resolve_engine(choice: str, model: SignalModel, net: Network) -> str:
    """Map an engine choice (possibly ``auto``) to a concrete applicable engine name."""
    if choice not in ENGINES:
        raise ConfigError(f"unknown engine {choice!r}; expected one of {ENGINES}")
    factorizable = _binary_stationary(model) and net.is_closed_under_observation()
    if choice == "auto":
        if factorizable:
            return "star" if net.star_center() is not None and not net.is_complete() else "factorized"
        return "generic"
    if choice == "factorized" and not (factorizable and net.is_closed_under_observation()):
        raise ConfigError("factorized engine needs stationary binary signals on a closed network")
    if choice == "star" and not (factorizable and net.star_center() is not None):
        raise ConfigError("star engine needs stationary binary signals on a star network")
    return choice


def make_engine(choice: str, model: SignalModel, net: Network, T: int, **kw):
    name = resolve_engine(choice, model, net)
    if name == "generic":
        return GenericEngine(model, net, T, **kw)
    if name == "star":
        return StarEngine(model, net, T, **kw)
    return FactorizedEngine(model, net, T, **kw)


def build_action_maps_generic(model: SignalModel, net: Network, T: int, budget: int = DEFAULT_BUDGET):
    """Myopic action maps for every agent and period, keyed by information set."""
    eng = GenericEngine(model, net, T, budget=budget)
    return {(i, t): eng.action_map(i, t) for i in range(net.n) for t in range(1, T + 1)}


def beliefs_generic(model, net, T, signals, budget: int = DEFAULT_BUDGET) -> Beliefs:
    return GenericEngine(model, net, T, budget=budget).run(signals)


def beliefs_complete_factorized(model, net, T, signals) -> Beliefs:
    return CompleteEngine(model, net, T).run(signals)


def beliefs_star(model, net, T, signals) -> Beliefs:
    return StarEngine(model, net, T).run(signals)


__all__ = [
    "TIE_ACTION", "TIE_TOL", "Beliefs", "BeliefState", "myopic_action", "myopic_actions",
    "GenericEngine", "FactorizedEngine", "CompleteEngine", "StarEngine", "ENGINES",
    "resolve_engine", "make_engine", "enumeration_steps", "build_action_maps_generic",
    "beliefs_generic", "beliefs_complete_factorized", "beliefs_star",
]
