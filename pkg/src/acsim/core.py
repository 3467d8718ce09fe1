"""Access control schemes as state-transition systems over relational states."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Optional, Sequence

from .errors import ConfigError, ImmutabilityViolation, BoundTooLarge

INF = math.inf
EMPTY: frozenset = frozenset()


class Atom(NamedTuple):
    sort: str
    id: str

    def __str__(self):
        return self.id


def atoms(sort: str, *ids: str) -> tuple[Atom, ...]:
    return tuple(Atom(sort, i) for i in ids)


def _vkey(v):
    if isinstance(v, Atom):
        return (0, v.sort, v.id)
    if v == INF:
        return (2, 0)
    return (1, v)


def _vstr(v) -> str:
    if isinstance(v, Atom):
        return f"{v.sort}:{v.id}"
    if v == INF:
        return "inf"
    return str(int(v))


def tuple_key(tup):
    return tuple(_vkey(v) for v in tup)


def format_value(v) -> str:
    return _vstr(v)


def parse_value(s: str):
    """Inverse of format_value: "sort:id" -> Atom, "inf" -> INF, digits -> int."""
    if s == "inf":
        return INF
    sort, sep, ident = s.partition(":")
    if sep:
        return Atom(sort, ident)
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"cannot parse value {s!r}; expected sort:id, an integer, or inf") from None


@dataclass(frozen=True)
class Universe:
    """Finite atom populations per sort; timestamps are unbounded ints plus INF."""

    sorts: Mapping[str, tuple[Atom, ...]]

    @classmethod
    def of(cls, **ids: Iterable[str]) -> "Universe":
        return cls({s: atoms(s, *vals) for s, vals in ids.items()})

    def atoms(self, sort: str) -> tuple[Atom, ...]:
        try:
            return self.sorts[sort]
        except KeyError:
            raise ConfigError(f"unknown sort {sort!r} (universe has {sorted(self.sorts)})") from None

    def __contains__(self, a: Atom) -> bool:
        return a in self.sorts.get(a.sort, ())

    def permuted(self, mapping: Mapping[Atom, Atom]) -> "Universe":
        return Universe({s: tuple(mapping.get(a, a) for a in xs) for s, xs in self.sorts.items()})


class RelationalState:
    """Immutable relational state. Empty relations are dropped so equality is content-based."""

    __slots__ = ("_rels", "_scalars", "_canon", "_size", "_idx")

    def __init__(self, relations: Mapping[str, Iterable[tuple]] | None = None,
                 scalars: Mapping[str, int] | None = None):
        rels = {}
        for name, tups in (relations or {}).items():
            fs = tups if isinstance(tups, frozenset) else frozenset(tups)
            if fs:
                rels[name] = fs
        self._rels = rels
        self._scalars = dict(scalars or {})
        self._canon = None
        self._size = None
        self._idx = None

    @property
    def relations(self) -> Mapping[str, frozenset]:
        return MappingProxyType(self._rels)

    @property
    def scalars(self) -> Mapping[str, int]:
        return MappingProxyType(self._scalars)

    def rel(self, name: str) -> frozenset:
        return self._rels.get(name, EMPTY)

    def scalar(self, name: str, default: int = 0):
        return self._scalars.get(name, default)

    def lookup(self, name: str, col: int, value) -> tuple:
        """Tuples of ``name`` whose column ``col`` equals ``value`` (index built on first use)."""
        if self._idx is None:
            self._idx = {}
        ix = self._idx.get((name, col))
        if ix is None:
            ix = {}
            for t in self.rel(name):
                ix.setdefault(t[col], []).append(t)
            self._idx[(name, col)] = ix
        return tuple(ix.get(value, ()))

    def size(self, exclude: Iterable[str] = ()) -> int:
        if self._size is None:
            self._size = sum(len(v) for v in self._rels.values())
        return self._size - sum(len(self.rel(n)) for n in exclude)

    def canonical(self) -> bytes:
        if self._canon is None:
            parts = []
            for name in sorted(self._rels):
                rows = sorted(self._rels[name], key=tuple_key)
                parts.append(name + "=" + "|".join(",".join(_vstr(v) for v in r) for r in rows))
            for name in sorted(self._scalars):
                parts.append(f"#{name}={_vstr(self._scalars[name])}")
            self._canon = "\n".join(parts).encode()
        return self._canon

    def dump(self) -> str:
        """Debug text: one relation per line, tuples sorted."""
        lines = []
        for name in sorted(self._rels):
            rows = sorted(self._rels[name], key=tuple_key)
            body = " ".join("(" + ", ".join(_vstr(v) for v in r) + ")" for r in rows)
            lines.append(f"{name}: {body}")
        for name in sorted(self._scalars):
            lines.append(f"{name} = {_vstr(self._scalars[name])}")
        return "\n".join(lines)

    def project(self, names: Iterable[str]) -> "RelationalState":
        names = set(names)
        return RelationalState({n: v for n, v in self._rels.items() if n in names},
                               {n: v for n, v in self._scalars.items() if n in names})

    def merged(self, other: "RelationalState") -> "RelationalState":
        rels = dict(self._rels)
        for n, v in other._rels.items():
            rels[n] = rels.get(n, EMPTY) | v
        return RelationalState(rels, {**self._scalars, **other._scalars})

    def __eq__(self, other):
        if not isinstance(other, RelationalState):
            return NotImplemented
        return self._rels == other._rels and self._scalars == other._scalars

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return f"RelationalState({self.size()} tuples)"


class StateBuilder:
    """Mutable copy-on-write working state with the same read interface as RelationalState.

    Relations named in ``locked`` reject content changes; auxiliary machine
    commands run with the base scheme's relations locked.
    """

    def __init__(self, base: RelationalState | None = None):
        base = base if base is not None else RelationalState()
        self._base = base
        self._rels: dict[str, frozenset | set] = dict(base._rels)
        self._owned: set[str] = set()
        self._scalars = dict(base._scalars)
        self._size = base.size()
        self._dirty = False
        self.locked: frozenset = EMPTY
        self.lock_owner = ""
        self._idx: dict = {}  # (relation, column) -> value -> set of tuples, kept current once built

    def rel(self, name: str):
        return self._rels.get(name, EMPTY)

    def lookup(self, name: str, col: int, value) -> tuple:
        ix = self._idx.get((name, col))
        if ix is None:
            ix = {}
            for t in self.rel(name):
                ix.setdefault(t[col], set()).add(t)
            self._idx[(name, col)] = ix
        return tuple(ix.get(value, ()))

    def _reindex(self, name, tup, add):
        for (n, col), ix in self._idx.items():
            if n != name:
                continue
            if add:
                ix.setdefault(tup[col], set()).add(tup)
            else:
                b = ix.get(tup[col])
                if b is not None:
                    b.discard(tup)
                    if not b:
                        del ix[tup[col]]

    def scalar(self, name: str, default: int = 0):
        return self._scalars.get(name, default)

    def size(self, exclude: Iterable[str] = ()) -> int:
        return self._size - sum(len(self.rel(n)) for n in exclude)

    def _check(self, name):
        if name in self.locked:
            raise ImmutabilityViolation(
                f"auxiliary command {self.lock_owner!r} attempted to modify base state {name!r}")

    def _mut(self, name) -> set:
        if name not in self._owned:
            self._rels[name] = set(self._rels.get(name, ()))
            self._owned.add(name)
        return self._rels[name]  # type: ignore[return-value]

    def add(self, name: str, tup: tuple) -> bool:
        if tup in self.rel(name):
            return False
        self._check(name)
        self._mut(name).add(tup)
        if self._idx:
            self._reindex(name, tup, True)
        self._size += 1
        self._dirty = True
        return True

    def discard(self, name: str, tup: tuple) -> bool:
        if tup not in self.rel(name):
            return False
        self._check(name)
        self._mut(name).discard(tup)
        if self._idx:
            self._reindex(name, tup, False)
        self._size -= 1
        self._dirty = True
        return True

    def discard_where(self, name: str, pred: Callable[[tuple], bool]) -> int:
        doomed = [t for t in self.rel(name) if pred(t)]
        for t in doomed:
            self.discard(name, t)
        return len(doomed)

    def set_scalar(self, name: str, value) -> None:
        if self._scalars.get(name) == value:
            return
        self._check(name)
        self._scalars[name] = value
        self._dirty = True

    def freeze(self) -> RelationalState:
        if not self._dirty:
            return self._base
        st = RelationalState({n: frozenset(v) for n, v in self._rels.items()}, self._scalars)
        self._base = st
        self._rels = dict(st._rels)
        self._owned = set()
        self._dirty = False
        return st


Effect = Callable[[StateBuilder, tuple], bool]
Entail = Callable[[object, tuple], bool]


@dataclass(frozen=True)
class CommandDef:
    name: str
    params: tuple[str, ...]
    effect: Effect
    aux: bool = False


@dataclass(frozen=True)
class QueryDef:
    name: str
    params: tuple[str, ...]
    entail: Entail
    access: bool = True
    aux: bool = False


def _default_population(state, sort: str) -> list[Atom]:
    found = set()
    for rel in state.relations.values() if isinstance(state, RelationalState) else state._rels.values():
        for tup in rel:
            for v in tup:
                if isinstance(v, Atom) and v.sort == sort:
                    found.add(v)
    return sorted(found)


@dataclass(frozen=True)
class Scheme:
    """⟨Γ, Ψ, Q⟩: a declared relational schema plus named commands and queries.

    ``relations`` maps relation names to their column sorts ("T" marks a
    timestamp column). ``population_relations`` hold sort populations (e.g.
    the user set) and are excluded from state-size accounting.
    """

    name: str
    relations: Mapping[str, tuple[str, ...]]
    commands: Mapping[str, CommandDef]
    queries: Mapping[str, QueryDef]
    scalars: tuple[str, ...] = ()
    population: Callable[[object, str], Sequence[Atom]] = _default_population
    population_relations: tuple[str, ...] = ()
    aux_relations: frozenset = field(default_factory=frozenset)

    @classmethod
    def build(cls, name, relations, commands: Iterable[CommandDef], queries: Iterable[QueryDef], **kw):
        cmds, qs = {}, {}
        for c in commands:
            if c.name in cmds:
                raise ConfigError(f"{name}: duplicate command {c.name!r}")
            cmds[c.name] = c
        for q in queries:
            if q.name in qs:
                raise ConfigError(f"{name}: duplicate query {q.name!r}")
            qs[q.name] = q
        return cls(name, dict(relations), cmds, qs, **kw)

    def command(self, name: str) -> CommandDef:
        try:
            return self.commands[name]
        except KeyError:
            raise ConfigError(f"{self.name}: unknown command {name!r}") from None

    def query(self, name: str) -> QueryDef:
        try:
            return self.queries[name]
        except KeyError:
            raise ConfigError(f"{self.name}: unknown query {name!r}") from None

    def state_size(self, state) -> int:
        return state.size(self.population_relations)

    @property
    def access_queries(self) -> tuple[str, ...]:
        return tuple(n for n, q in self.queries.items() if q.access)


def check_args(what: str, params: Sequence[str], args: Sequence) -> tuple:
    args = tuple(args)
    if len(args) != len(params):
        raise ConfigError(f"{what}: expected {len(params)} arguments, got {len(args)}")
    for i, (sort, a) in enumerate(zip(params, args)):
        if not isinstance(a, Atom) or a.sort != sort:
            raise ConfigError(f"{what}: argument {i} must be an atom of sort {sort!r}, got {a!r}")
    return args


def run_command(scheme: Scheme, st: StateBuilder, name: str, args: tuple) -> bool:
    """Apply a command in place on a builder; auxiliary commands run with base relations locked."""
    cmd = scheme.command(name)
    if not cmd.aux:
        return cmd.effect(st, args)
    prev, prev_owner = st.locked, st.lock_owner
    st.locked = frozenset(scheme.relations) - scheme.aux_relations | frozenset(scheme.scalars)
    st.lock_owner = name
    try:
        return cmd.effect(st, args)
    finally:
        st.locked, st.lock_owner = prev, prev_owner


def apply_command(scheme: Scheme, state: RelationalState, name: str, args: Sequence) -> tuple[RelationalState, bool]:
    cmd = scheme.command(name)
    args = check_args(f"{scheme.name}.{name}", cmd.params, args)
    st = StateBuilder(state)
    fired = bool(run_command(scheme, st, name, args))
    return st.freeze(), fired


def eval_query(scheme: Scheme, state, name: str, args: Sequence) -> bool:
    q = scheme.query(name)
    args = check_args(f"{scheme.name}.{name}", q.params, args)
    return bool(q.entail(state, args))


def enumerate_args(signature: Sequence[str], universe: Universe) -> Iterator[tuple]:
    return itertools.product(*(universe.atoms(s) for s in signature))


# -- formulas -----------------------------------------------------------------

@dataclass(frozen=True)
class Q:
    name: str
    args: tuple

    def __init__(self, name, *args):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(args))


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    args: tuple

    def __init__(self, *args):
        object.__setattr__(self, "args", args)


@dataclass(frozen=True)
class Or:
    args: tuple

    def __init__(self, *args):
        object.__setattr__(self, "args", args)


TRUE = And()
FALSE = Or()


def evaluate(scheme: Scheme, state, formula) -> bool:
    if isinstance(formula, Q):
        return eval_query(scheme, state, formula.name, formula.args)
    if isinstance(formula, Not):
        return not evaluate(scheme, state, formula.arg)
    if isinstance(formula, And):
        return all(evaluate(scheme, state, f) for f in formula.args)
    if isinstance(formula, Or):
        return any(evaluate(scheme, state, f) for f in formula.args)
    raise ConfigError(f"not a formula: {formula!r}")


def check_formula(scheme: Scheme, formula) -> None:
    if isinstance(formula, Q):
        check_args(f"{scheme.name}.{formula.name}", scheme.query(formula.name).params, formula.args)
    elif isinstance(formula, Not):
        check_formula(scheme, formula.arg)
    elif isinstance(formula, (And, Or)):
        for f in formula.args:
            check_formula(scheme, f)
    else:
        raise ConfigError(f"not a formula: {formula!r}")


@dataclass(frozen=True)
class CsaiInstance:
    start: RelationalState
    formula: object
    quantifier: str = "exists"  # or "forall"


# -- bounded reachability -------------------------------------------------------

def successors(scheme: Scheme, state: RelationalState, universe: Universe,
               commands: Iterable[str] | None = None) -> Iterator[tuple[str, tuple, RelationalState]]:
    """Fired transitions out of ``state``; guard failures are identity and skipped."""
    for name in (commands if commands is not None else scheme.commands):
        cmd = scheme.commands[name]
        for args in enumerate_args(cmd.params, universe):
            st = StateBuilder(state)
            if run_command(scheme, st, name, args):
                nxt = st.freeze()
                if nxt is not state:
                    yield name, args, nxt


@dataclass
class Reachability:
    start: RelationalState
    states: dict[bytes, RelationalState]
    parent: dict[bytes, Optional[tuple[bytes, tuple[str, tuple]]]]
    level: dict[bytes, int]
    closed: bool
    depth: int

    def __iter__(self):
        return iter(self.states.values())

    def __len__(self):
        return len(self.states)

    def __contains__(self, state: RelationalState):
        return state.canonical() in self.states

    def trace_to(self, state: RelationalState) -> list[tuple[str, tuple]]:
        key = state.canonical()
        out = []
        while self.parent[key] is not None:
            key, step = self.parent[key]
            out.append(step)
        return out[::-1]


def reachable_states(scheme: Scheme, start: RelationalState, depth: int, universe: Universe,
                     max_states: int | None = None) -> Reachability:
    """Breadth-first closure of the transition relation, deduplicated on canonical encodings."""
    if depth < 0:
        raise ConfigError("depth must be >= 0")
    k0 = start.canonical()
    states = {k0: start}
    parent: dict = {k0: None}
    level = {k0: 0}
    frontier = deque([start])
    closed = False
    for d in range(depth):
        nxt = deque()
        for s in frontier:
            ks = s.canonical()
            for name, args, t in successors(scheme, s, universe):
                kt = t.canonical()
                if kt in states:
                    continue
                states[kt] = t
                parent[kt] = (ks, (name, args))
                level[kt] = d + 1
                nxt.append(t)
                if max_states is not None and len(states) > max_states:
                    raise BoundTooLarge(
                        f"{scheme.name}: more than {max_states} states within depth {d + 1}")
        if not nxt:
            closed = True
            break
        frontier = nxt
    return Reachability(start, states, parent, level, closed, depth)


def eval_csai(scheme: Scheme, instance: CsaiInstance, depth: int, universe: Universe) -> Optional[bool]:
    """Bounded CSAI answer: True/False when decided, None when the bound leaves it open."""
    check_formula(scheme, instance.formula)
    reach = reachable_states(scheme, instance.start, depth, universe)
    sat = [evaluate(scheme, s, instance.formula) for s in reach]
    if instance.quantifier == "exists":
        if any(sat):
            return True
        return False if reach.closed else None
    if instance.quantifier == "forall":
        if not all(sat):
            return False
        return True if reach.closed else None
    raise ConfigError(f"unknown quantifier {instance.quantifier!r}")
