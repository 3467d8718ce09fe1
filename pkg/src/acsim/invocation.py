"""Invocation: actions, constrained workflows, and continuous-time actor machines."""

from __future__ import annotations

import graphlib
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

from .core import INF, Atom, Scheme
from .errors import ConfigError, InfiniteCycleError


# -- parameter specs ----------------------------------------------------------

@dataclass(frozen=True)
class Var:
    """Unbound position. Drawn uniformly from the sort's current population.

    A named Var is shared by every step of one workflow instance. ``domain``
    optionally narrows the candidates: domain(state, ctx) -> sequence of atoms,
    where ctx is the BindContext of the draw.
    """

    sort: str
    name: Optional[str] = None
    domain: Optional[Callable] = field(default=None, compare=False)


@dataclass(frozen=True)
class Fresh:
    """Mint a new atom of this sort (e.g. a message id) from the run's counter."""

    sort: str
    prefix: str = "m"


@dataclass(frozen=True)
class ActorOf:
    """The principal that executed another step of the same workflow instance."""

    step: str


class _Self:
    def __repr__(self):
        return "SELF"


SELF = _Self()


class Actor(NamedTuple):
    principal: Atom
    role: str

    def __str__(self):
        return f"{self.principal.id}/{self.role}"


@dataclass(frozen=True)
class Action:
    """A partially parameterized command or query; target None is the no-op action."""

    name: str
    target: Optional[str] = None
    params: tuple = ()
    kind: str = "command"  # or "query"

    def __post_init__(self):
        if self.target is None and self.params:
            raise ConfigError(f"action {self.name!r}: a no-op action takes no parameters")

    def check(self, scheme: Scheme) -> None:
        if self.target is None:
            return
        sig = (scheme.command(self.target) if self.kind == "command" else scheme.query(self.target)).params
        if len(self.params) != len(sig):
            raise ConfigError(f"action {self.name!r}: {self.target} takes {len(sig)} parameters, "
                              f"got {len(self.params)}")
        for i, (p, sort) in enumerate(zip(self.params, sig)):
            if isinstance(p, Atom) and p.sort != sort:
                raise ConfigError(f"action {self.name!r}: position {i} must be sort {sort!r}")
            if isinstance(p, (Var, Fresh)) and p.sort != sort:
                raise ConfigError(f"action {self.name!r}: variable at position {i} has sort "
                                  f"{p.sort!r}, expected {sort!r}")


NOOP = Action("noop")


# -- constrained workflows ------------------------------------------------------

@dataclass(frozen=True)
class ConstrainedWorkflow:
    actions: Mapping[str, Action]
    depends: frozenset  # of (before, after) action-name pairs
    constraints: tuple  # of (op, a, b) with op in {"=", "!="}
    tasks: tuple = ()
    task_index: Mapping[str, int] = field(default_factory=dict)
    preds: Mapping[str, frozenset] = field(default_factory=dict)

    @classmethod
    def build(cls, actions: Sequence[Action], depends=(), constraints=()):
        acts = {}
        for a in actions:
            if a.name in acts:
                raise ConfigError(f"workflow: duplicate action {a.name!r}")
            acts[a.name] = a
        deps = frozenset((a, b) for a, b in depends)
        for a, b in deps:
            for x in (a, b):
                if x not in acts:
                    raise ConfigError(f"workflow: dependency names unknown action {x!r}")
        ts = graphlib.TopologicalSorter({n: set() for n in acts})
        for a, b in deps:
            ts.add(b, a)
        try:
            order = list(ts.static_order())
        except graphlib.CycleError as e:
            raise ConfigError(f"workflow: dependency cycle {e.args[1]}") from None
        # weakly connected components, ordered by first action in declaration order
        parent = {n: n for n in acts}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in deps:
            parent[find(a)] = find(b)
        groups: dict = {}
        for n in acts:
            groups.setdefault(find(n), []).append(n)
        rank = {n: i for i, n in enumerate(order)}
        tasks = tuple(tuple(sorted(g, key=rank.__getitem__)) for g in groups.values())
        tidx = {n: i for i, t in enumerate(tasks) for n in t}
        cons = []
        for op, a, b in constraints:
            if op not in ("=", "!="):
                raise ConfigError(f"workflow: constraint operator must be '=' or '!=', got {op!r}")
            for x in (a, b):
                if x not in acts:
                    raise ConfigError(f"workflow: constraint names unknown action {x!r}")
            if tidx[a] != tidx[b]:
                raise ConfigError(f"workflow: constraint ({op}, {a}, {b}) spans two tasks")
            cons.append((op, a, b))
        preds = {n: frozenset(a for a, b in deps if b == n) for n in acts}
        return cls(acts, deps, tuple(cons), tasks, tidx, preds)

    def task_of(self, action: str) -> int:
        return self.task_index[action]

    def constraints_of(self, task: int):
        steps = set(self.tasks[task])
        return [c for c in self.constraints if c[1] in steps]

    def is_root(self, action: str) -> bool:
        return not self.preds[action]

    def __contains__(self, action: str) -> bool:
        return action in self.actions


EMPTY_WORKFLOW = ConstrainedWorkflow.build([])


# -- actor machines ---------------------------------------------------------------

@dataclass(frozen=True)
class ActorMachine:
    """States labeled (action, refinement); edges carry rates per second, INF for immediate."""

    name: str
    labels: Mapping[str, tuple]  # state -> (Action, {position: value})
    edges: Mapping[str, tuple]  # state -> ((target, rate), ...)
    initial: str

    def __post_init__(self):
        if self.initial not in self.labels:
            raise ConfigError(f"machine {self.name!r}: unknown initial state {self.initial!r}")
        for s, outs in self.edges.items():
            if s not in self.labels:
                raise ConfigError(f"machine {self.name!r}: edge from unknown state {s!r}")
            for tgt, rate in outs:
                if tgt not in self.labels:
                    raise ConfigError(f"machine {self.name!r}: edge to unknown state {tgt!r}")
                if not (rate >= 0):
                    raise ConfigError(f"machine {self.name!r}: negative rate on {s}->{tgt}")
        for s, (action, refine) in self.labels.items():
            for pos in refine:
                if pos < len(action.params) and isinstance(action.params[pos], Atom):
                    raise ConfigError(f"machine {self.name!r}: state {s!r} rebinds fixed "
                                      f"position {pos} of {action.name!r}")

    def out(self, state):
        return self.edges.get(state, ())

    def finite_rate(self, state) -> float:
        return sum(r for _, r in self.out(state) if r != INF)

    def actions(self) -> set:
        return {a.name for a, _ in self.labels.values()}


@dataclass
class ActorRun:
    actor: Actor
    machine: ActorMachine
    state: str
    next_fire: float
    busy_until: float = 0.0
    fired: int = 0


@dataclass(frozen=True)
class Invocation:
    workflow: ConstrainedWorkflow
    extract: Callable[[object], Sequence[Actor]]
    machines: Mapping[str, ActorMachine]
    assign: Callable[[Actor], str]

    def machine_for(self, actor: Actor) -> ActorMachine:
        name = self.assign(actor)
        try:
            return self.machines[name]
        except KeyError:
            raise ConfigError(f"no actor machine named {name!r} (for actor {actor})") from None


# -- sampling -------------------------------------------------------------------------

def sample_exponential(rate: float, rng=None, u: float | None = None) -> float:
    """Inverse-CDF draw: -ln(u)/rate with u uniform on (0, 1]."""
    if not (rate > 0) or rate == INF:
        raise ValueError(f"exponential rate must be positive and finite, got {rate}")
    if u is None:
        u = 1.0 - rng.random()
    return -math.log(u) / rate


def start_run(actor: Actor, machine: ActorMachine, now: float, rng) -> ActorRun:
    rate = machine.finite_rate(machine.initial)
    nxt = now + sample_exponential(rate, rng) if rate > 0 else INF
    return ActorRun(actor, machine, machine.initial, nxt, now)


def _choose(outs, rng):
    finite = [(t, r) for t, r in outs if r != INF and r > 0]
    total = sum(r for _, r in finite)
    x = rng.random() * total
    acc = 0.0
    for t, r in finite:
        acc += r
        if x < acc:
            return t
    return finite[-1][0]


def next_action(run: ActorRun, now: float, rng) -> list:
    """Fire the run's machine if due; returns the delivered (action, refinement) labels.

    An empty list means nothing happened this step. Immediate edges chain
    within the same call, so several labels can be delivered at once.
    """
    if run.next_fire > now:
        return []
    m = run.machine
    base = max(run.next_fire, run.busy_until)
    state = _choose(m.out(run.state), rng)
    delivered = [m.labels[state]]
    seen = {state}
    while True:
        inf = [t for t, r in m.out(state) if r == INF]
        if not inf:
            break
        state = inf[0]
        if state in seen:
            raise InfiniteCycleError(
                f"machine {m.name!r} (actor {run.actor}): immediate transitions cycle through {state!r}")
        seen.add(state)
        delivered.append(m.labels[state])
    run.state = state
    run.fired += 1
    rate = m.finite_rate(state)
    run.next_fire = base + sample_exponential(rate, rng) if rate > 0 else INF
    return delivered


# -- parameter instantiation -------------------------------------------------------------

@dataclass
class BindContext:
    """What a parameter draw may consult besides the state."""

    scheme: Scheme
    actor: Optional[Actor] = None
    named: dict = field(default_factory=dict)  # instance variables already fixed
    bindings: dict = field(default_factory=dict)  # step -> principal in the instance
    mint: Optional[Callable[[str, str], Atom]] = None


def instantiate_params(action: Action, refinement: Mapping, state, rng, ctx: BindContext):
    """Resolve every position to an atom; returns (args, newly fixed named vars) or None if starved."""
    if action.target is None:
        raise ConfigError("instantiate_params called on a no-op action")
    specs = list(action.params)
    for pos, val in refinement.items():
        if isinstance(specs[pos], Atom):
            raise ConfigError(f"action {action.name!r}: refinement rebinds position {pos}")
        specs[pos] = val
    if specs and ctx.actor is not None and isinstance(specs[0], Var) and specs[0].name is None:
        specs[0] = SELF
    out = []
    fresh_named = {}
    for p in specs:
        if isinstance(p, Atom):
            out.append(p)
        elif p is SELF:
            out.append(ctx.actor.principal)
        elif isinstance(p, ActorOf):
            if p.step not in ctx.bindings:
                return None
            out.append(ctx.bindings[p.step])
        elif isinstance(p, Fresh):
            out.append(ctx.mint(p.sort, p.prefix))
        elif isinstance(p, Var):
            if p.name is not None and p.name in ctx.named:
                out.append(ctx.named[p.name])
                continue
            if p.name is not None and p.name in fresh_named:
                out.append(fresh_named[p.name])
                continue
            pool = p.domain(state, ctx) if p.domain else ctx.scheme.population(state, p.sort)
            if not pool:
                return None
            v = pool[int(rng.integers(len(pool)))]
            out.append(v)
            if p.name is not None:
                fresh_named[p.name] = v
        else:
            raise ConfigError(f"action {action.name!r}: cannot bind parameter spec {p!r}")
    return tuple(out), fresh_named
