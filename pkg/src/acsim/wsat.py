"""Reference monitor for workflow satisfiability with = / != constraints."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import kernels
from .errors import InvariantBreach


@dataclass
class WorkflowInstance:
    id: int
    task: int
    created_at: float
    bindings: dict = field(default_factory=dict)  # step -> actor principal
    params: dict = field(default_factory=dict)  # named variables fixed so far


@dataclass
class SearchStats:
    calls: int = 0
    candidates: int = 0
    worst_bound_ratio: float = 0.0  # max over calls of candidates / |actors|^steps


class InstancePool:
    def __init__(self, workflow):
        self.workflow = workflow
        self.open = {t: deque() for t in range(len(workflow.tasks))}
        self.created = [0] * len(workflow.tasks)
        self.completed = [0] * len(workflow.tasks)
        self.abandoned = [0] * len(workflow.tasks)
        self.stats = SearchStats()
        self._next_id = 0

    def __len__(self):
        return sum(len(q) for q in self.open.values())

    def new_instance(self, task: int, now: float) -> WorkflowInstance:
        inst = WorkflowInstance(self._next_id, task, now)
        self._next_id += 1
        return inst

    def summary(self) -> dict:
        return {"created": list(self.created), "completed": list(self.completed),
                "abandoned": list(self.abandoned), "open": [len(self.open[t]) for t in self.open]}


def _eligible(actors, step):
    if isinstance(actors, Mapping):
        return actors.get(step, ())
    return actors


def _reduced_domains(steps, bindings, actors):
    """Per-step candidate lists with interchangeable unbound actors collapsed.

    Constraints only compare actors for (in)equality, so unbound actors sharing
    the same eligibility signature are interchangeable; keeping as many of them
    as there are free steps preserves satisfiability.
    """
    free = [s for s in steps if s not in bindings]
    bound_actors = set(bindings.values())
    elig = {s: list(dict.fromkeys(_eligible(actors, s))) for s in free}
    universe = list(dict.fromkeys(a for s in free for a in elig[s]))
    sig = {}
    for a in universe:
        if a in bound_actors:
            continue
        key = tuple(a in set(elig[s]) for s in free)
        sig.setdefault(key, []).append(a)
    keep = set(bound_actors)
    for members in sig.values():
        keep.update(members[:len(free)])
    return {s: [a for a in elig[s] if a in keep] for s in free}


def is_satisfiable(workflow, instance: Optional[WorkflowInstance], proposed, actors,
                   stats: SearchStats | None = None, reduce: bool = True) -> bool:
    """Can the task still be completed once ``proposed = (step, actor)`` is bound?"""
    step, who = proposed if proposed is not None else (None, None)
    task = workflow.task_of(step) if step is not None else instance.task
    steps = workflow.tasks[task]
    bindings = dict(instance.bindings) if instance is not None else {}
    if step is not None:
        bindings[step] = who
    if reduce:
        doms = _reduced_domains(steps, bindings, actors)
    else:
        doms = {s: list(dict.fromkeys(_eligible(actors, s))) for s in steps if s not in bindings}
    code = {}
    for a in list(bindings.values()) + [a for d in doms.values() for a in d]:
        code.setdefault(a, len(code))
    n = len(steps)
    pos = {s: i for i, s in enumerate(steps)}
    width = max([1] + [len(d) for d in doms.values()])
    dom = np.zeros((n, width), np.int64)
    dsize = np.zeros(n, np.int64)
    for s in steps:
        i = pos[s]
        if s in bindings:
            dom[i, 0] = code[bindings[s]]
            dsize[i] = 1
        else:
            vals = [code[a] for a in doms[s]]
            dom[i, :len(vals)] = vals
            dsize[i] = len(vals)
    cons = workflow.constraints_of(task)
    ckind = np.array([0 if op == "=" else 1 for op, _, _ in cons], np.int64)
    ca = np.array([pos[a] for _, a, _ in cons], np.int64)
    cb = np.array([pos[b] for _, _, b in cons], np.int64)
    found, count = kernels.search(dom, dsize, ckind, ca, cb)
    if stats is not None:
        stats.calls += 1
        stats.candidates += count
        n_actors = len(set(a for s in steps if s not in bindings for a in _eligible(actors, s)))
        free = sum(1 for s in steps if s not in bindings)
        bound = max(1, n_actors) ** free
        stats.worst_bound_ratio = max(stats.worst_bound_ratio, count / bound)
    return found


def brute_force_satisfiable(workflow, task: int, bindings: dict, actors) -> bool:
    """Oracle: enumerate every assignment of the free steps and test the constraints directly."""
    steps = workflow.tasks[task]
    free = [s for s in steps if s not in bindings]
    for combo in itertools.product(*(list(_eligible(actors, s)) for s in free)):
        full = dict(bindings)
        full.update(zip(free, combo))
        ok = True
        for op, a, b in workflow.constraints_of(task):
            if (full[a] == full[b]) != (op == "="):
                ok = False
                break
        if ok:
            return True
    return False


def _ready(workflow, inst, step) -> bool:
    return step not in inst.bindings and all(p in inst.bindings for p in workflow.preds[step])


def wsat(pool: InstancePool, workflow, action: str, actor, actors, now: float = 0.0):
    """Pick the workflow instance this execution belongs to, or None if no admissible one exists.

    The returned instance is not committed; call record_execution once the
    action has run.
    """
    task = workflow.task_of(action)
    queue = pool.open[task]
    roots = [s for s in workflow.tasks[task] if workflow.is_root(s)]
    scan = workflow.preds[action] or len(roots) > 1
    if scan:
        for inst in list(queue):
            if not _ready(workflow, inst, action):
                continue
            if is_satisfiable(workflow, inst, (action, actor), actors, pool.stats):
                return inst
            # lazy abandonment: nobody can finish this instance any more
            if not is_satisfiable(workflow, inst, None, actors, pool.stats):
                queue.remove(inst)
                pool.abandoned[task] += 1
    if workflow.is_root(action):
        inst = pool.new_instance(task, now)
        if is_satisfiable(workflow, inst, (action, actor), actors, pool.stats):
            return inst
    return None


def record_execution(pool: InstancePool, instance: WorkflowInstance, step: str, actor, params=None) -> bool:
    """Commit a vetted binding; returns True when this completed the instance."""
    wf = pool.workflow
    if step in instance.bindings:
        raise InvariantBreach(f"workflow instance {instance.id}: step {step!r} bound twice")
    missing = [p for p in wf.preds[step] if p not in instance.bindings]
    if missing:
        raise InvariantBreach(f"workflow instance {instance.id}: {step!r} bound before {missing}")
    queue = pool.open[instance.task]
    if not instance.bindings:
        pool.created[instance.task] += 1
        queue.append(instance)
    instance.bindings[step] = actor
    if params:
        instance.params.update(params)
    if len(instance.bindings) == len(wf.tasks[instance.task]):
        queue.remove(instance)
        pool.completed[instance.task] += 1
        return True
    return False
