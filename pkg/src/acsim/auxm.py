"""Auxiliary machines: extensions that read but never write the base scheme's state."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .core import CommandDef, QueryDef, RelationalState, Scheme
from .errors import ConfigError
from .mapping import Implementation


@dataclass(frozen=True)
class AuxiliaryMachine:
    name: str
    relations: Mapping[str, tuple]
    commands: Sequence[CommandDef]
    queries: Sequence[QueryDef] = ()
    initial: RelationalState = field(default_factory=RelationalState)


def augment(base: Scheme, am: AuxiliaryMachine, name: str | None = None) -> Scheme:
    """Product scheme. AM commands run with every base relation and scalar write-locked."""
    clash = set(base.relations) & set(am.relations)
    if clash:
        raise ConfigError(f"augment {base.name} with {am.name}: relation names collide: {sorted(clash)}")
    for kind, mine, theirs in (("command", base.commands, [c.name for c in am.commands]),
                               ("query", base.queries, [q.name for q in am.queries])):
        dup = sorted(set(mine) & set(theirs))
        if dup:
            raise ConfigError(f"augment {base.name} with {am.name}: {kind} names collide: {dup}")
    cmds = list(base.commands.values()) + [replace(c, aux=True) for c in am.commands]
    qs = list(base.queries.values()) + [replace(q, aux=True) for q in am.queries]
    return Scheme.build(name or f"{base.name}+{am.name}", {**base.relations, **am.relations}, cmds, qs,
                        scalars=base.scalars, population=base.population,
                        population_relations=base.population_relations,
                        aux_relations=frozenset(am.relations))


def identity_implementation(base: Scheme, am: AuxiliaryMachine, augmented: Scheme | None = None) -> Implementation:
    """Base state paired with the AM's initial state; commands and queries map to themselves."""
    target = augmented or augment(base, am)
    init = am.initial
    return Implementation(
        name=f"id:{base.name}->{target.name}",
        workload=base, target=target,
        map_state=lambda g: g.merged(init),
        expand=lambda name, args, st: [(name, args)],
        queries={q: (q, lambda a: a) for q in base.queries},
    )
