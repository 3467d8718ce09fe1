"""Cost-analysis drivers: single runs, Monte Carlo batches, and confidence-bounded estimation."""

from __future__ import annotations

import heapq
import json
import math
import multiprocessing as mp
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as _stats

from . import kernels
from .core import INF, Atom, RelationalState, Scheme, StateBuilder, format_value, run_command
from .cost import CostFunction
from .errors import AcsimError, ConfigError
from .invocation import (Actor, BindContext, Invocation, instantiate_params, next_action, start_run)
from .mapping import Implementation
from .wsat import InstancePool, record_execution, wsat

STREAM_START = 1 << 20
STREAM_COST = 1 << 21


@dataclass(frozen=True)
class SchemeSetup:
    name: str
    impl: Implementation
    costs: Mapping[str, CostFunction]  # measure name -> cost function, in column order
    metrics: Optional[Callable] = None  # (driver, lane) -> dict


@dataclass(frozen=True)
class RunSetup:
    start: RelationalState
    invocation: Invocation
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimConfig:
    workload: Scheme
    schemes: tuple
    goal_time: float
    step: float
    invocation: Optional[Invocation] = None
    start: Optional[RelationalState] = None
    sampler: Optional[Callable] = None  # (rng) -> RunSetup
    seed: int = 0
    trace_sharing: bool = False
    time_measure: str = "time"
    log_level: str = "events"  # "full" | "events" | "none"
    stable_commands: frozenset = frozenset()  # workload commands that never change the actor set
    observer: Optional[Callable] = None  # () -> object with on_event(driver, ev) and metrics(driver)

    def __post_init__(self):
        if not (self.step > 0):
            raise ConfigError(f"step must be > 0, got {self.step}")
        if not (self.goal_time >= 0):
            raise ConfigError(f"goal_time must be >= 0, got {self.goal_time}")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        names = list(self.schemes[0].costs)
        for s in self.schemes:
            if self.time_measure not in s.costs:
                raise ConfigError(f"scheme {s.name!r}: the time measure {self.time_measure!r} is missing")
            if list(s.costs) != names:
                raise ConfigError(f"scheme {s.name!r}: measures {list(s.costs)} differ from {names}")
        if self.log_level not in ("full", "events", "none"):
            raise ConfigError(f"log_level must be full, events or none, got {self.log_level!r}")
        if self.sampler is None and (self.start is None or self.invocation is None):
            raise ConfigError("either a start-state sampler or a fixed start state and invocation is needed")

    @property
    def measures(self) -> list:
        return list(self.schemes[0].costs)

    def setup_for(self, run: int) -> RunSetup:
        if self.sampler is None:
            return RunSetup(self.start, self.invocation)
        return self.sampler(np.random.default_rng(derive_seed(self.seed, run, STREAM_START)))


@dataclass
class RunRecord:
    run: int
    scheme: str
    seed: int
    totals: dict
    events: list = field(default_factory=list)
    wsat: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    error: Optional[str] = None
    error_kind: Optional[str] = None


def derive_seed(master: int, run: int, stream: int) -> int:
    """Child seed from (master, run, stream) through SeedSequence's hash mixing."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(run), int(stream)))
    return int(ss.generate_state(1, np.uint64)[0])


def _fmt_args(args):
    return [format_value(a) for a in args]


class Lane:
    """One candidate scheme's target state, fed by a driver's workload executions."""

    def __init__(self, setup: SchemeSetup, start: RelationalState, log_level: str, cost_seed: int = 0):
        self.setup = setup
        # stochastic cost functions draw here, never from the trace stream
        self.cost_rng = np.random.default_rng(cost_seed)
        self.impl = setup.impl
        self.target = StateBuilder(setup.impl.map_state(start))
        self.costs = list(setup.costs.items())
        self.totals = {m: cf.measure.zero for m, cf in self.costs}
        self.events = []
        self.log_level = log_level
        self.size_excl = setup.impl.target.population_relations
        self.max_size = self.target.size(self.size_excl)
        self.am_calls = 0
        self.target_commands = 0

    def apply(self, name, args, ev) -> dict:
        """Expand one fired workload command, run it on the target, and price every step."""
        target = self.target
        tscheme = self.impl.target
        exp = self.impl.expand_checked(name, args, target)
        ev_cost = {m: cf.measure.zero for m, cf in self.costs}
        expanded = []
        for tname, targs in exp:
            rng = self.cost_rng
            pre = [(m, cf.measure, cf(tname, targs, target, rng)) for m, cf in self.costs if not cf.post_state]
            tf = run_command(tscheme, target, tname, targs)
            for m, meas, v in pre:
                ev_cost[m] = meas.combine(ev_cost[m], v)
            for m, cf in self.costs:
                if cf.post_state:
                    ev_cost[m] = cf.measure.combine(ev_cost[m], cf(tname, targs, target, rng))
            aux = tscheme.commands[tname].aux
            self.am_calls += aux
            self.target_commands += 1
            if self.log_level == "full":
                expanded.append([tname, _fmt_args(targs), bool(tf)] + (["am-call"] if aux else []))
        size = target.size(self.size_excl)
        if size > self.max_size:
            self.max_size = size
        for m, cf in self.costs:
            self.totals[m] = cf.measure.combine(self.totals[m], ev_cost[m])
        if self.log_level != "none":
            ev = dict(ev)
            if self.log_level == "full":
                ev["expanded"] = expanded
            else:
                ev["n_expanded"] = len(exp)
            ev["cost"] = {m: cf.measure.to_json(ev_cost[m]) for m, cf in self.costs}
            self.events.append(ev)
        return ev_cost

    def log(self, ev):
        if self.log_level != "none":
            self.events.append(ev)


class Driver:
    """Step loop over one workload shadow state; lanes receive every fired workload command."""

    def __init__(self, config: SimConfig, setup: RunSetup, lanes: Sequence[Lane], seed: int):
        self.config = config
        self.workload = config.workload
        self.inv = setup.invocation
        self.wf = self.inv.workflow
        self.setup = setup
        self.lanes = list(lanes)
        self.rng = np.random.default_rng(seed)
        self.shadow = StateBuilder(setup.start)
        self.pool = InstancePool(self.wf)
        self.runs: dict = {}
        self.version: dict = {}
        self.heap: list = []
        self.minted = 0
        self.max_shadow = self.shadow.size(self.workload.population_relations)
        self.counts = {"executed": 0, "blocked": 0, "starved": 0, "noop": 0}
        self.observer = config.observer() if config.observer else None
        self.eligible: dict = {}
        self.time_measure = config.time_measure

    # -- actor bookkeeping
    @staticmethod
    def _key(actor: Actor):
        return (actor.principal.sort, actor.principal.id, actor.role)

    def _schedule(self, run, after_step: int):
        x = max(run.next_fire, run.busy_until)
        if x == INF:
            return
        dt = self.config.step
        j = max(after_step + 1, math.ceil(x / dt))
        while j * dt < x:
            j += 1
        v = self.version[run.actor]
        heapq.heappush(self.heap, (j, self._key(run.actor), v, run.actor))

    def refresh(self, now: float, step_index: int):
        current = sorted(self.inv.extract(self.shadow), key=self._key)
        want = set(current)
        for a in [a for a in self.runs if a not in want]:
            del self.runs[a]
            self.version[a] = self.version.get(a, 0) + 1
        for a in current:
            if a not in self.runs:
                run = start_run(a, self.inv.machine_for(a), now, self.rng)
                self.runs[a] = run
                self.version[a] = self.version.get(a, 0) + 1
                self._schedule(run, step_index)
        elig: dict = {}
        for a in current:
            for name in self.runs[a].machine.actions():
                elig.setdefault(name, []).append(a.principal)
        self.eligible = elig

    def mint(self, sort, prefix):
        self.minted += 1
        return Atom(sort, f"{prefix}{self.minted}")

    # -- one delivered label
    def handle(self, run, action, refine, now: float) -> float:
        actor = run.actor
        base = {"t": now, "actor": str(actor), "action": action.name, "busy_before": run.busy_until}
        inst = None
        if action.target is None and action.name not in self.wf:
            return 0.0  # plain idle state
        if action.name in self.wf:
            inst = wsat(self.pool, self.wf, action.name, actor.principal, self.eligible, now)
            if inst is None:
                return self._skip(base, "blocked")
        if action.target is None:
            if inst is not None:
                record_execution(self.pool, inst, action.name, actor.principal)
                base["instance"] = inst.id
            return self._skip(base, "noop")
        ctx = BindContext(self.workload, actor, named=inst.params if inst else {},
                          bindings=inst.bindings if inst else {}, mint=self.mint)
        drawn = instantiate_params(action, refine, self.shadow, self.rng, ctx)
        if drawn is None:
            return self._skip(base, "starved")
        args, named = drawn
        base["args"] = _fmt_args(args)
        if action.kind == "query":
            base["answer"] = bool(self.workload.query(action.target).entail(self.shadow, args))
            return self._skip(base, "query")
        fired = run_command(self.workload, self.shadow, action.target, args)
        if not fired:
            base["fired"] = False
            return self._skip(base, "noop")
        if inst is not None:
            record_execution(self.pool, inst, action.name, actor.principal, named)
            base["instance"] = inst.id
        base["kind"] = "exec"
        base["fired"] = True
        self.counts["executed"] += 1
        size = self.shadow.size(self.workload.population_relations)
        if size > self.max_shadow:
            self.max_shadow = size
        busy = 0.0
        for k, lane in enumerate(self.lanes):
            c = lane.apply(action.target, args, base)
            if k == 0:
                busy = c[self.time_measure]
        if self.observer is not None:
            self.observer.on_event(self, base, run)
        return busy

    def _skip(self, ev, kind) -> float:
        ev["kind"] = kind
        self.counts[kind] = self.counts.get(kind, 0) + 1
        for lane in self.lanes:
            lane.log(dict(ev))
        if self.observer is not None:
            self.observer.on_event(self, ev, None)
        return 0.0

    def run(self):
        dt = self.config.step
        steps = int(math.floor(self.config.goal_time / dt + 1e-9))
        self.refresh(0.0, 0)
        stable = self.config.stable_commands
        for j in range(1, steps + 1):
            if not self.heap or self.heap[0][0] > j:
                if not self.heap or self.heap[0][0] > steps:
                    break
                continue
            now = j * dt
            due = []
            while self.heap and self.heap[0][0] == j:
                _, _, v, actor = heapq.heappop(self.heap)
                if actor in self.runs and self.version[actor] == v:
                    due.append(actor)
            touched = False
            for actor in due:
                run = self.runs[actor]
                if run.busy_until > now:
                    self._schedule(run, j)
                    continue
                for action, refine in next_action(run, now, self.rng):
                    busy = self.handle(run, action, refine, now)
                    if busy > 0:
                        run.busy_until = max(run.busy_until, now) + busy
                    if action.target is not None and action.target not in stable:
                        touched = True
                self._schedule(run, j)
            if touched:
                self.refresh(now, j)


def _lane_record(config, driver, lane, run_index, seed, wall_ms) -> RunRecord:
    metrics = {"max_shadow_size": driver.max_shadow, "max_state_size": lane.max_size,
               "state_overhead": lane.max_size - driver.max_shadow,
               "am_calls": lane.am_calls, "target_commands": lane.target_commands,
               **{f"events_{k}": v for k, v in sorted(driver.counts.items())}}
    metrics.update(driver.setup.info)
    if driver.observer is not None:
        metrics.update(driver.observer.metrics(driver))
    if lane.setup.metrics is not None:
        metrics.update(lane.setup.metrics(driver, lane))
    return RunRecord(run_index, lane.setup.name, seed, dict(lane.totals), lane.events,
                     driver.pool.summary(), metrics, wall_ms)


def simulate(config: SimConfig, run: int = 0, setup: RunSetup | None = None) -> list:
    """One simulation run; returns one RunRecord per candidate scheme."""
    setup = setup or config.setup_for(run)
    out = []
    if config.trace_sharing:
        t0 = _time.perf_counter()
        seed = derive_seed(config.seed, run, 0)
        lanes = [Lane(s, setup.start, config.log_level, derive_seed(config.seed, run, STREAM_COST + k))
                 for k, s in enumerate(config.schemes)]
        drv = Driver(config, setup, lanes, seed)
        drv.run()
        wall = (_time.perf_counter() - t0) * 1000
        return [_lane_record(config, drv, lane, run, seed, wall) for lane in lanes]
    for k, s in enumerate(config.schemes):
        t0 = _time.perf_counter()
        seed = derive_seed(config.seed, run, k + 1)
        lane = Lane(s, setup.start, config.log_level, derive_seed(config.seed, run, STREAM_COST + k))
        drv = Driver(config, setup, [lane], seed)
        drv.run()
        out.append(_lane_record(config, drv, lane, run, seed, (_time.perf_counter() - t0) * 1000))
    return out


def _safe(config, run):
    try:
        return simulate(config, run)
    except AcsimError as e:
        kind = "config" if isinstance(e, ConfigError) else "invariant"
        return [RunRecord(run, s.name, derive_seed(config.seed, run, k + 1), {}, error=str(e), error_kind=kind)
                for k, s in enumerate(config.schemes)]


_MC_CONFIG = None


def _mc_worker(run):
    return _safe(_MC_CONFIG, run)


def monte_carlo(config: SimConfig, runs: int, workers: int = 1, first: int = 0) -> list:
    """Independent runs first..first+runs-1, returned in run order.

    A run that aborts yields records carrying ``error``; its siblings still finish.
    """
    global _MC_CONFIG
    if runs < 1:
        raise ConfigError("Monte Carlo needs at least one run")
    idx = range(first, first + runs)
    if workers <= 1:
        return [_safe(config, i) for i in idx]
    _MC_CONFIG = config
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers) as pool:
            return pool.map(_mc_worker, idx, chunksize=1)
    finally:
        _MC_CONFIG = None


# -- statistics --------------------------------------------------------------------------

def t_quantile(df: int, p: float) -> float:
    if df < 1:
        raise ValueError(f"t_quantile needs df >= 1, got {df}")
    if not 0 < p < 1:
        raise ValueError(f"t_quantile needs 0 < p < 1, got {p}")
    return float(_stats.t.ppf(p, df))


@dataclass
class CiReport:
    mean: float
    variance: float
    n: int
    half_width: float
    u: float
    v: float
    terminated_by: str  # "tolerance" or "cap"
    diagnostic: str = ""
    samples: list = field(default_factory=list)

    def interval(self):
        return (self.mean - self.half_width, self.mean + self.half_width)


def ci_loop(sample: Callable[[int], float], u: float, v: float, max_runs: int, min_runs: int = 2) -> CiReport:
    """Draw until t_{n-1,(1+u)/2} * sqrt(S^2/n) <= v * mean, or max_runs."""
    if not (0 < u < 1 and 0 < v < 1):
        raise ConfigError(f"confidence and tolerance must lie in (0, 1), got u={u}, v={v}")
    if max_runs < 2:
        raise ConfigError("max_runs must be >= 2")
    n, mean, m2 = 0, 0.0, 0.0
    xs = []
    hw = INF
    while n < max_runs:
        x = float(sample(n))
        xs.append(x)
        n += 1
        d = x - mean
        mean += d / n
        m2 += d * (x - mean)
        if n < max(2, min_runs):
            continue
        hw = t_quantile(n - 1, (1 + u) / 2) * math.sqrt(m2 / (n - 1) / n)
        if mean != 0 and hw <= v * abs(mean):
            return CiReport(mean, m2 / (n - 1), n, hw, u, v, "tolerance", samples=xs)
    diag = "mean is zero; relative tolerance undefined" if mean == 0 else "run cap reached"
    return CiReport(mean, m2 / (n - 1) if n > 1 else 0.0, n, hw, u, v, "cap", diag, xs)


def ci_run(config: SimConfig, projection: Callable[[list], float], u: float, v: float, max_runs: int) -> CiReport:
    return ci_loop(lambda i: projection(simulate(config, i)), u, v, max_runs)


def measure_projection(scheme: str, measure: str):
    def proj(records):
        for r in records:
            if r.scheme == scheme:
                val = r.totals[measure]
                return float(val if not isinstance(val, tuple) else val[0])
        raise ConfigError(f"no records for scheme {scheme!r}")
    return proj


def summarize(records) -> dict:
    """Per scheme and measure: n, mean, sample variance, min, max."""
    flat = [r for rs in records for r in (rs if isinstance(rs, list) else [rs])]
    if not flat:
        raise ConfigError("summarize needs at least one record")
    by: dict = {}
    for r in flat:
        if r.error:
            continue
        for m, val in r.totals.items():
            if isinstance(val, tuple):
                for i, x in enumerate(val):
                    by.setdefault(r.scheme, {}).setdefault(f"{m}[{i}]", []).append(float(x))
            else:
                by.setdefault(r.scheme, {}).setdefault(m, []).append(float(val))
    out = {}
    for s, ms in by.items():
        out[s] = {}
        for m, xs in ms.items():
            n, mean, m2, lo, hi = kernels.moments(np.asarray(xs))
            out[s][m] = {"n": n, "mean": mean, "variance": m2 / (n - 1) if n > 1 else 0.0, "min": lo, "max": hi}
    return out


# -- logs --------------------------------------------------------------------------------------

def _json_value(v):
    if isinstance(v, tuple):
        return [_json_value(x) for x in v]
    if isinstance(v, float) and v == INF:
        return "inf"
    return v


def record_lines(rec: RunRecord, measures_json=None) -> list:
    """JSON Lines for one record: events, then one summary line per measure, then metrics."""
    dumps = lambda d: json.dumps(d, sort_keys=True, separators=(",", ":"))
    head = {"run": rec.run, "scheme": rec.scheme}
    lines = [dumps({"type": "event", **head, **ev}) for ev in rec.events]
    for m, total in rec.totals.items():
        lines.append(dumps({"type": "summary", **head, "measure": m, "total": _json_value(total),
                            "seed": rec.seed}))
    tail = {"type": "metrics", **head, "seed": rec.seed, "wsat": rec.wsat,
            "metrics": {k: _json_value(v) for k, v in rec.metrics.items()}}
    if rec.error:
        tail["error"] = rec.error
    lines.append(dumps(tail))
    return lines


def write_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            for line in record_lines(rec):
                fh.write(line + "\n")


def refold(record: RunRecord, measures: Mapping, order=None) -> dict:
    """Recompute totals from the logged per-event costs in a chosen association order."""
    evs = [e for e in record.events if "cost" in e]
    if order is not None:
        evs = [evs[i] for i in order]
    out = {}
    for m, meas in measures.items():
        vals = [e["cost"][m] for e in evs]
        vals = [tuple(v) if isinstance(v, list) else v for v in vals]
        out[m] = meas.fold(vals)
    return out
