"""Exhaustive enumeration of the finite set of systems a small model generates."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .engine import ScriptedChooser, SystemState, Trace, run
from .model import ASYNC_RANDOM, Initializer, ModelSpec, bernoulli_atoms


class EnumerationBoundError(ValueError):
    def __init__(self, cardinality: int, bound: int):
        self.cardinality = cardinality
        self.bound = bound
        super().__init__(f"bound exceeded: model has up to {cardinality} configurations, bound is {bound}")


@dataclass(frozen=True)
class SystemInstance:
    """One distinguishable system with its total probability weight."""

    initial: SystemState
    params: tuple
    permutations: tuple  # agent order per step (asynchronous-random only)
    draws: tuple  # bernoulli outcomes in evaluation order
    weight: Fraction
    trace: Trace


def all_initial_states(spec: ModelSpec) -> ModelSpec:
    """Copy of *spec* whose every variable is initialized uniformly at random."""
    population = tuple(
        replace(e, inits=tuple((v.name, Initializer("random")) for v in spec.agent_type(e.agent_type).variables))
        for e in spec.population
    )
    globs = tuple(replace(g, init=Initializer("random")) for g in spec.globals)
    return replace(spec, population=population, globals=globs)


def _free_params(spec: ModelSpec, params: Optional[dict]) -> list:
    params = params or {}
    return [p for p in spec.params if p.name not in params and p.default is None]


def system_cardinality(spec: ModelSpec, horizon: int, params: Optional[dict] = None) -> int:
    """Upper bound on configurations: free params x initial states x orders x branches."""
    total = 1
    for p in _free_params(spec, params):
        total *= p.domain.cardinality
    for e in spec.population:
        t = spec.agent_type(e.agent_type)
        for v in t.variables:
            init = dict(e.inits).get(v.name)
            if init is not None and init.kind == "random":
                total *= v.domain.cardinality ** e.count
    for g in spec.globals:
        if g.init is not None and g.init.kind == "random":
            total *= g.domain.cardinality
    if spec.schedule.kind == ASYNC_RANDOM:
        total *= math.factorial(spec.n_agents) ** horizon
    atoms = sum(bernoulli_atoms(spec, e.agent_type) * e.count for e in spec.population)
    total *= 2 ** (atoms * horizon)
    return total


def enumerate_systems(
    spec: ModelSpec,
    horizon: int,
    bound: int,
    params: Optional[dict] = None,
    all_initial: bool = False,
) -> list[SystemInstance]:
    """Every distinguishable system, each with its probability weight.

    Choice points (free parameters, random initializers, agent orders and
    bernoulli draws) are expanded depth-first; systems whose initial state
    and full event sequence coincide are merged and their weights summed.
    With ``all_initial`` the initializers are ignored and every variable
    ranges over its whole domain.
    """
    if all_initial:
        spec = all_initial_states(spec)
    card = system_cardinality(spec, horizon, params)
    if card > bound:
        raise EnumerationBoundError(card, bound)
    free = _free_params(spec, params)
    fixed = dict(params or {})

    merged: dict = {}
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        chooser = ScriptedChooser(prefix)
        bound_params = dict(fixed)
        for p in free:
            bound_params[p.name] = chooser.init_value(p.domain)
        trace = run(spec, bound_params, seed=None, horizon=horizon, chooser=chooser)
        for i in range(len(chooser.taken) - 1, len(prefix) - 1, -1):
            for k in range(len(chooser.branch_weights[i]) - 1, -1, -1):
                if k != chooser.taken[i] and chooser.branch_weights[i][k] > 0:
                    stack.append(chooser.taken[:i] + [k])
        key = trace.system_key()
        if key in merged:
            prev = merged[key]
            merged[key] = replace(prev, weight=prev.weight + chooser.weight)
        else:
            merged[key] = SystemInstance(
                initial=trace.initial,
                params=trace.params,
                permutations=tuple(tuple(o) for o in chooser.permutations),
                draws=tuple(chooser.draws),
                weight=chooser.weight,
                trace=trace,
            )
    return list(merged.values())
