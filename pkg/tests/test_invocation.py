import math

import numpy as np
import pytest

from acsim.core import INF, Atom
from acsim.errors import ConfigError, InfiniteCycleError
from acsim.invocation import (SELF, Action, Actor, ActorMachine, BindContext, ConstrainedWorkflow, Var,
                              instantiate_params, next_action, sample_exponential, start_run)
from acsim.schemes import gms

ACTOR = Actor(gms.user("u1"), "member")


def test_sample_exponential_examples():
    assert sample_exponential(2.0, u=0.5) == pytest.approx(math.log(2) / 2, abs=1e-5)
    assert sample_exponential(1.0, u=1.0) == 0.0
    rng = np.random.default_rng(1)
    xs = [sample_exponential(4.0, rng) for _ in range(10**5)]
    assert np.mean(xs) == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("rate", [0.0, -1.0, INF])
def test_sample_exponential_rejects_bad_rates(rate):
    with pytest.raises(ValueError):
        sample_exponential(rate, u=0.5)


def _loop_machine(rate):
    a = Action("a")
    return ActorMachine("loop", {"s": (a, {})}, {"s": (("s", rate),)}, "s")


def test_self_loop_fires_at_its_rate():
    r = 0.5
    duration = 1e4 / r
    rng = np.random.default_rng(3)
    run = start_run(ACTOR, _loop_machine(r), 0.0, rng)
    n = 0
    while run.next_fire <= duration:
        assert next_action(run, run.next_fire, rng)
        n += 1
    assert abs(n - r * duration) / (r * duration) < 0.05


def test_edge_choice_proportional_to_rate():
    a, b, c = Action("a"), Action("b"), Action("c")
    m = ActorMachine("fork", {"s": (a, {}), "x": (b, {}), "y": (c, {})},
                     {"s": (("x", 3.0), ("y", 1.0)), "x": (("s", INF),), "y": (("s", INF),)}, "s")
    rng = np.random.default_rng(5)
    run = start_run(ACTOR, m, 0.0, rng)
    hits = {"b": 0, "c": 0}
    for _ in range(10**4):
        labels = next_action(run, run.next_fire, rng)
        hits[labels[0][0].name] += 1
    assert hits["b"] / 10**4 == pytest.approx(0.75, abs=0.02)


def test_immediate_edge_delivers_both_labels_together():
    work, rest = Action("work", "Post", (SELF, Var("G"), Var("M"))), Action("rest")
    m = ActorMachine("m", {"idle": (rest, {}), "w": (work, {}), "r": (rest, {})},
                     {"idle": (("w", 1.0),), "w": (("r", INF),), "r": (("w", 1.0),)}, "idle")
    rng = np.random.default_rng(0)
    run = start_run(ACTOR, m, 0.0, rng)
    labels = next_action(run, run.next_fire, rng)
    assert [a.name for a, _ in labels] == ["work", "rest"]
    assert run.state == "r"


def test_not_due_returns_nothing():
    rng = np.random.default_rng(0)
    run = start_run(ACTOR, _loop_machine(1e-9), 0.0, rng)
    assert next_action(run, 1.0, rng) == []


def test_immediate_cycle_aborts():
    a = Action("a")
    m = ActorMachine("cyc", {"s": (a, {}), "x": (a, {}), "y": (a, {})},
                     {"s": (("x", 1.0),), "x": (("y", INF),), "y": (("x", INF),)}, "s")
    rng = np.random.default_rng(0)
    run = start_run(ACTOR, m, 0.0, rng)
    with pytest.raises(InfiniteCycleError):
        next_action(run, run.next_fire, rng)


def test_refinement_may_not_rebind_fixed_positions():
    act = Action("p", "Post", (gms.user("u"), Var("G"), Var("M")))
    with pytest.raises(ConfigError):
        ActorMachine("bad", {"s": (act, {0: gms.user("v")})}, {}, "s")


def test_noop_action_has_no_parameters():
    with pytest.raises(ConfigError):
        Action("x", None, (SELF,))


def test_action_check_sorts():
    scheme = gms.gms_scheme()
    Action("ok", "Post", (SELF, Var("G"), Var("M"))).check(scheme)
    with pytest.raises(ConfigError):
        Action("bad", "Post", (SELF, Var("U"), Var("M"))).check(scheme)
    with pytest.raises(ConfigError):
        Action("bad", "Post", (SELF, Var("G"))).check(scheme)


def test_instantiate_params():
    scheme = gms.gms_scheme()
    u1, u2, g1 = gms.user("u1"), gms.user("u2"), gms.group("g1")
    state = gms.single_group_start(2)
    rng = np.random.default_rng(0)
    bound = Action("ga", "GrantAdmin", (u1, u2, g1))
    assert instantiate_params(bound, {}, state, rng, BindContext(scheme))[0] == (u1, u2, g1)
    free_group = Action("ga", "GrantAdmin", (u1, u2, Var("G")))
    assert instantiate_params(free_group, {}, state, rng, BindContext(scheme))[0] == (u1, u2, g1)
    # the executing actor fills an unnamed leading variable
    act = Action("ga", "GrantAdmin", (Var("U"), u2, g1))
    assert instantiate_params(act, {}, state, rng, BindContext(scheme, ACTOR))[0] == (u1, u2, g1)
    assert instantiate_params(act, {0: u2}, state, rng, BindContext(scheme, ACTOR))[0] == (u2, u2, g1)


def test_instantiate_params_starves_on_empty_population():
    scheme = gms.gms_scheme()
    act = Action("ga", "GrantAdmin", (gms.user("u1"), gms.user("u2"), Var("G")))
    assert instantiate_params(act, {}, gms.gms_state(), np.random.default_rng(0), BindContext(scheme)) is None


def test_named_variable_is_shared_within_instance():
    scheme = gms.gms_scheme()
    state = gms.single_group_start(4)
    act = Action("ga", "GrantAdmin", (SELF, Var("U", "x"), Var("G")))
    ctx = BindContext(scheme, ACTOR, named={"x": gms.user("u3")})
    args, fresh = instantiate_params(act, {}, state, np.random.default_rng(0), ctx)
    assert args[1] == gms.user("u3") and fresh == {}


def test_workflow_validation():
    a, b = Action("a"), Action("b")
    with pytest.raises(ConfigError):
        ConstrainedWorkflow.build([a, b], depends=[("a", "b"), ("b", "a")])
    with pytest.raises(ConfigError):
        ConstrainedWorkflow.build([a, b], constraints=[("!=", "a", "b")])  # two separate tasks
    with pytest.raises(ConfigError):
        ConstrainedWorkflow.build([a, b], depends=[("a", "b")], constraints=[("<", "a", "b")])
    wf = ConstrainedWorkflow.build([a, b, Action("c")], depends=[("a", "b")])
    assert len(wf.tasks) == 2 and wf.task_of("a") == wf.task_of("b") != wf.task_of("c")
    assert wf.is_root("a") and not wf.is_root("b")
