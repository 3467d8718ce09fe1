"""Implementations of a workload scheme in a target scheme, and bounded state-matching checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .core import (RelationalState, Scheme, StateBuilder, Universe, apply_command, check_args,
                   enumerate_args, eval_query, reachable_states, run_command)
from .errors import BoundTooLarge, ConfigError


def _identity_args(args):
    return args


@dataclass(frozen=True)
class Implementation:
    """sigma = (map_state, expand, query map).

    ``expand(name, args, target_state)`` returns the target command instances
    for one fired workload command. ``queries`` maps each workload query name
    to (target query name, argument translator).
    """

    name: str
    workload: Scheme
    target: Scheme
    map_state: Callable[[RelationalState], RelationalState]
    expand: Callable[[str, tuple, object], list]
    queries: Mapping[str, tuple]
    map_universe: Callable[[Universe], Universe] = field(default=lambda u: u)

    def __post_init__(self):
        for qn, q in self.workload.queries.items():
            if qn not in self.queries:
                raise ConfigError(f"{self.name}: workload query {qn!r} has no mapping")
            tname = self.queries[qn][0]
            tq = self.target.query(tname)
            if q.access and not tq.access:
                raise ConfigError(f"{self.name}: access query {qn!r} mapped to non-access query {tname!r}")

    def map_query(self, name: str, args: tuple) -> tuple[str, tuple]:
        tname, fn = self.queries[name]
        return tname, tuple(fn(tuple(args)))

    def expand_checked(self, name: str, args: tuple, target_state) -> list:
        out = []
        for tname, targs in self.expand(name, tuple(args), target_state):
            cmd = self.target.command(tname)
            out.append((tname, check_args(f"{self.name}: {name} -> {tname}", cmd.params, targs)))
        return out


def query_instances(scheme: Scheme, universe: Universe):
    return [(qn, args) for qn, q in scheme.queries.items() for args in enumerate_args(q.params, universe)]


def workload_valuation(scheme: Scheme, state, instances) -> frozenset:
    return frozenset(i for i in instances if eval_query(scheme, state, *i))


def target_valuation(impl: Implementation, state, instances) -> frozenset:
    """Workload query instances whose mapped target query holds in a target state."""
    out = []
    for qn, args in instances:
        tn, targs = impl.map_query(qn, args)
        if impl.target.queries[tn].entail(state, targs):
            out.append((qn, args))
    return frozenset(out)


def query_mismatch(workload, target, impl, gw, gs, universe) -> Optional[tuple]:
    """First workload query instance answered differently on the two sides, or None."""
    for qn, args in query_instances(workload, universe):
        tn, targs = impl.map_query(qn, args)
        if eval_query(workload, gw, qn, args) != eval_query(target, gs, tn, targs):
            return (qn, args)
    return None


def check_query_equivalence(workload, target, impl, gw, gs, universe) -> bool:
    return query_mismatch(workload, target, impl, gw, gs, universe) is None


@dataclass
class EquivalenceReport:
    verdict: str  # "verified-to-bound" or "counterexample"
    implementation: str
    failed_property: Optional[int] = None  # 1 or 2
    witness: list = field(default_factory=list)  # replayable trace
    witness_side: str = ""  # "workload" or "target"
    query: Optional[tuple] = None
    detail: str = ""
    depths: dict = field(default_factory=dict)
    universe: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict == "verified-to-bound"

    def to_json(self) -> dict:
        from .core import format_value
        return {
            "verdict": self.verdict, "implementation": self.implementation, "property": self.failed_property,
            "witness_side": self.witness_side,
            "witness": [{"command": n, "args": [format_value(a) for a in args]} for n, args in self.witness],
            "query": None if self.query is None else
            {"name": self.query[0], "args": [format_value(a) for a in self.query[1]]},
            "detail": self.detail, "depths": self.depths,
            "universe": {s: [a.id for a in xs] for s, xs in self.universe.items()},
            "stats": self.stats,
        }


def run_expansion(impl: Implementation, target_state: RelationalState, name: str, args: tuple):
    """Apply one workload command's expansion to a target state; returns (state, expansion)."""
    exp = impl.expand_checked(name, args, target_state)
    st = StateBuilder(target_state)
    for tname, targs in exp:
        run_command(impl.target, st, tname, targs)
    return st.freeze(), exp


def lockstep_trace_check(workload, target, impl, start: RelationalState, trace: Sequence,
                         universe: Universe) -> EquivalenceReport:
    gw = start
    gs = impl.map_state(start)
    rep = EquivalenceReport("verified-to-bound", impl.name, depths={"trace": len(trace)},
                            universe=dict(universe.sorts))
    bad = query_mismatch(workload, target, impl, gw, gs, universe)
    if bad:
        rep.verdict, rep.failed_property, rep.query = "counterexample", 1, bad
        rep.detail = "start states disagree"
        return rep
    for i, (name, args) in enumerate(trace):
        gw2, fired = apply_command(workload, gw, name, args)
        if fired:
            gs, _ = run_expansion(impl, gs, name, tuple(args))
        gw = gw2
        bad = query_mismatch(workload, target, impl, gw, gs, universe)
        if bad:
            rep.verdict, rep.failed_property, rep.query = "counterexample", 1, bad
            rep.witness = [(n, tuple(a)) for n, a in trace[:i + 1]]
            rep.witness_side = "workload"
            rep.detail = f"query {bad[0]} disagrees after step {i}"
            return rep
    return rep


def verify_state_matching(workload: Scheme, target: Scheme, impl: Implementation, start: RelationalState,
                          depth_w: int, depth_s: int | None = None, universe: Universe | None = None,
                          depth_back: int | None = None, depth_target: int | None = None,
                          max_states: int = 2_000_000) -> EquivalenceReport:
    """Bounded check of both state-matching properties.

    Property (1): each workload state within depth_w gets a target witness by
    expanding its BFS path (at most depth_s target commands); if the expansion
    disagrees, the target states within depth_s are searched exhaustively.
    Property (2): each target state within depth_target must have an
    equivalent workload state within depth_back.
    """
    if universe is None:
        raise ConfigError("verify_state_matching needs a bounded universe")
    tu = impl.map_universe(universe)
    instances = query_instances(workload, universe)
    depth_target = depth_w if depth_target is None else depth_target
    depth_back = depth_w + 2 if depth_back is None else depth_back
    rep = EquivalenceReport("verified-to-bound", impl.name, universe=dict(universe.sorts))

    wreach = reachable_states(workload, start, depth_w, universe, max_states)
    target_start = impl.map_state(start)
    # property (1): replay each state's BFS path through the expansion
    image = {start.canonical(): (target_start, 0)}
    longest = 0
    order = sorted(wreach.states, key=lambda k: wreach.level[k])
    target_reach = None
    target_vals = None
    for key in order:
        gw = wreach.states[key]
        if key not in image:
            pkey, (name, args) = wreach.parent[key]
            pstate, plen = image[pkey]
            gs, exp = run_expansion(impl, pstate, name, args)
            longest = max(longest, len(exp))
            image[key] = (gs, plen + len(exp))
        gs, used = image[key]
        want = workload_valuation(workload, gw, instances)
        if target_valuation(impl, gs, instances) == want and (depth_s is None or used <= depth_s):
            continue
        if target_reach is None:
            ds = depth_s if depth_s is not None else depth_w * max(1, longest)
            target_reach = reachable_states(target, target_start, ds, tu, max_states)
            target_vals = {target_valuation(impl, s, instances) for s in target_reach}
        if want not in target_vals:
            rep.verdict, rep.failed_property = "counterexample", 1
            rep.witness = wreach.trace_to(gw)
            rep.witness_side = "workload"
            rep.detail = "workload state has no query-equivalent target state within bound"
            rep.depths = {"depth_w": depth_w, "depth_s": depth_s}
            return rep
    ds = depth_s if depth_s is not None else depth_w * max(1, longest)
    rep.depths = {"depth_w": depth_w, "depth_s": ds, "depth_target": depth_target, "depth_back": depth_back}
    rep.stats = {"workload_states": len(wreach), "longest_expansion": longest}

    # property (2)
    treach = reachable_states(target, target_start, depth_target, tu, max_states)
    need = {}
    for s in treach:
        v = target_valuation(impl, s, instances)
        need.setdefault(v, s)
    wvals = {workload_valuation(workload, s, instances) for s in wreach}
    pending = {v: s for v, s in need.items() if v not in wvals}
    if pending and depth_back > depth_w:
        pending = _cover_backwards(workload, start, depth_back, universe, instances, pending, max_states)
    rep.stats.update(target_states=len(treach), target_valuations=len(need))
    if pending:
        v, s = min(pending.items(), key=lambda kv: treach.level[kv[1].canonical()])
        rep.verdict, rep.failed_property = "counterexample", 2
        rep.witness = treach.trace_to(s)
        rep.witness_side = "target"
        nearest = min(wvals, key=lambda w: (len(w ^ v), sorted(map(repr, w))))
        diff = sorted(v ^ nearest, key=repr)
        rep.query = diff[0] if diff else None
        rep.detail = "target state has no query-equivalent workload state within bound"
    return rep


def _cover_backwards(workload, start, depth, universe, instances, pending, max_states):
    """BFS the workload level by level, stopping once every pending valuation is matched."""
    from .core import successors
    seen = {start.canonical()}
    frontier = [start]
    pending = dict(pending)
    for _ in range(depth):
        nxt = []
        for s in frontier:
            for _, _, t in successors(workload, s, universe):
                k = t.canonical()
                if k in seen:
                    continue
                seen.add(k)
                if len(seen) > max_states:
                    raise BoundTooLarge(f"{workload.name}: more than {max_states} states while matching "
                                        f"target valuations")
                pending.pop(workload_valuation(workload, t, instances), None)
                if not pending:
                    return pending
                nxt.append(t)
        if not nxt:
            break
        frontier = nxt
    return pending
