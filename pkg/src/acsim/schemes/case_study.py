"""Group messaging case study: actor machines, the COI leave workflow, costs, metrics, and a population sampler.

The machine topologies are a reconstruction; every rate is a parameter.
Rates are given per simulated hour and converted to per second here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import INF, RelationalState
from ..cost import CostFunction, NatAdd, NatMax, RealTime
from ..errors import ConfigError
from ..invocation import (SELF, Action, ActorMachine, ActorOf, ConstrainedWorkflow, Fresh, Invocation, Var,
                          Actor)
from ..sim import RunSetup, SchemeSetup, SimConfig
from . import gms, rbac_u

GROUP = gms.group("g1")

DEFAULT_RATES = {
    "post": 2.0,  # messages per member-hour
    "join": 0.5,  # member additions per admin-hour
    "remove": 0.5,  # member removals per admin-hour
    "leave": 0.05,  # voluntary leaves per member-hour
    "coi": 0.25,  # COI leave requests per member-hour
    "serve": 6.0,  # attempts per admin-hour at the next COI step
}
DEFAULT_P_STRICT = 0.5
DEFAULT_COMMAND_SECONDS = 0.5

COI_STEPS = ("RequestLeave", "GrantTempAdmin", "COILeave", "COIReturn", "RevokeTempAdmin")


# -- parameter domains ---------------------------------------------------------

def _non_members(state, ctx):
    members = set(gms.current_members(state, GROUP))
    return [u for u in gms.population(state, "U") if u not in members]


def _removable(state, ctx):
    admins = {u for u, g in state.rel("A") if g == GROUP}
    return [u for u in gms.current_members(state, GROUP) if u not in admins]


def _temp_admin_candidates(state, ctx):
    leaver = ctx.bindings.get("RequestLeave")
    admins = {u for u, g in state.rel("A") if g == GROUP}
    return [u for u in gms.current_members(state, GROUP) if u not in admins and u != leaver]


# -- actions ---------------------------------------------------------------------

IDLE = Action("idle")
POST = Action("Post", "Post", (SELF, GROUP, Fresh("M")))
LEAVE = Action("Leave", "SRemoveMember", (SELF, SELF, GROUP))
REQUEST_LEAVE = Action("RequestLeave")
S_ADD = Action("StrictAdd", "SAddMember", (SELF, Var("U", domain=_non_members), GROUP))
L_ADD = Action("LiberalAdd", "LAddMember", (SELF, Var("U", domain=_non_members), GROUP))
S_REMOVE = Action("StrictRemove", "SRemoveMember", (SELF, Var("U", domain=_removable), GROUP))
L_REMOVE = Action("LiberalRemove", "LRemoveMember", (SELF, Var("U", domain=_removable), GROUP))
COI_LEAVE = Action("COILeave", "LRemoveMember", (SELF, ActorOf("RequestLeave"), GROUP))
COI_RETURN = Action("COIReturn", "LAddMember", (SELF, ActorOf("RequestLeave"), GROUP))
GRANT_TEMP = Action("GrantTempAdmin", "GrantAdmin",
                    (SELF, Var("U", "coi_temp", domain=_temp_admin_candidates), GROUP))
REVOKE_TEMP = Action("RevokeTempAdmin", "RevokeAdmin", (SELF, Var("U", "coi_temp"), GROUP))


def coi_workflow() -> ConstrainedWorkflow:
    acts = [REQUEST_LEAVE, GRANT_TEMP, COI_LEAVE, COI_RETURN, REVOKE_TEMP]
    return ConstrainedWorkflow.build(
        acts, depends=list(zip(COI_STEPS, COI_STEPS[1:])),
        constraints=[("!=", "RequestLeave", "GrantTempAdmin"), ("=", "GrantTempAdmin", "RevokeTempAdmin")])


def _machine(name, actions_rates):
    """Hub machine: idle fires each action at its rate and returns immediately."""
    labels = {"idle": (IDLE, {})}
    edges = {"idle": []}
    for action, rate in actions_rates:
        labels[action.name] = (action, {})
        edges["idle"].append((action.name, rate))
        edges[action.name] = ((("idle", INF)),)
    edges["idle"] = tuple(edges["idle"])
    return ActorMachine(name, labels, edges, "idle")


def actor_machines(rates: dict, p_strict: float = DEFAULT_P_STRICT) -> dict:
    missing = [k for k in DEFAULT_RATES if k not in rates]
    if missing:
        raise ConfigError(f"case study: missing rate parameters {missing}")
    for k, v in rates.items():
        if k not in DEFAULT_RATES:
            raise ConfigError(f"case study: unknown rate {k!r}")
        if not (v >= 0):
            raise ConfigError(f"case study: rate {k!r} must be >= 0, got {v}")
    if not 0 <= p_strict <= 1:
        raise ConfigError(f"case study: p_strict must lie in [0, 1], got {p_strict}")
    r = {k: v / 3600.0 for k, v in rates.items()}
    member = [(POST, r["post"]), (LEAVE, r["leave"]), (REQUEST_LEAVE, r["coi"])]
    admin = member + [(S_ADD, r["join"] * p_strict), (L_ADD, r["join"] * (1 - p_strict)),
                      (S_REMOVE, r["remove"] * p_strict), (L_REMOVE, r["remove"] * (1 - p_strict)),
                      (COI_LEAVE, r["serve"]), (COI_RETURN, r["serve"])]
    owner = admin + [(GRANT_TEMP, r["serve"]), (REVOKE_TEMP, r["serve"])]
    strip = lambda xs: [(a, x) for a, x in xs if x > 0]
    return {"member": _machine("member", strip(member)), "admin": _machine("admin", strip(admin)),
            "owner": _machine("owner", strip(owner))}


def extract_actors(state) -> list:
    """Owners, admins, and current members of the group, each with one role."""
    owners = {u for u, g in state.rel("O") if g == GROUP}
    admins = {u for u, g in state.rel("A") if g == GROUP}
    members = {t[0] for t in state.rel("R") if t[1] == GROUP and t[3] == INF}
    out = []
    for u in gms.population(state, "U"):
        if u in owners:
            out.append(Actor(u, "owner"))
        elif u in admins:
            out.append(Actor(u, "admin"))
        elif u in members:
            out.append(Actor(u, "member"))
    return out


def gms_invocation(rates: dict | None = None, p_strict: float = DEFAULT_P_STRICT) -> Invocation:
    rates = dict(DEFAULT_RATES if rates is None else rates)
    return Invocation(coi_workflow(), extract_actors, actor_machines(rates, p_strict), lambda a: a.role)


def start_state(n_users: int, n_admins: int = 1, member_fraction: float = 0.5) -> RelationalState:
    """u1 owns g1; u2..u_{n_admins} administer it; the first member_fraction of users are members."""
    if n_users < 1 or not 1 <= n_admins <= n_users:
        raise ConfigError(f"case study: need 1 <= admins <= users, got users={n_users} admins={n_admins}")
    us = [gms.user(f"u{i + 1}") for i in range(n_users)]
    n_members = max(n_admins, int(round(member_fraction * n_users)))
    return gms.gms_state(users=us, groups=[GROUP], owners=[(us[0], GROUP)],
                         admins=[(u, GROUP) for u in us[:n_admins]],
                         members=[(u, GROUP, 0, INF) for u in us[:n_members]], tc=1)


# -- sampler ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseStudyParams:
    users: tuple = (5, 100)  # inclusive range
    admins: tuple = (1, 5)
    member_fraction: float = 0.5
    rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))  # value or [lo, hi]
    p_strict: float = DEFAULT_P_STRICT
    command_seconds: float = DEFAULT_COMMAND_SECONDS

    def validate(self):
        for k in ("users", "admins"):
            lo, hi = getattr(self, k)
            if not (isinstance(lo, int) and isinstance(hi, int) and 1 <= lo <= hi):
                raise ConfigError(f"case study: {k} must be an integer range [lo, hi] with 1 <= lo <= hi")
        if not 0 <= self.member_fraction <= 1:
            raise ConfigError("case study: member_fraction must lie in [0, 1]")
        if not self.command_seconds > 0:
            raise ConfigError("case study: command_seconds must be > 0")
        # fail early on names and ranges
        actor_machines({k: (v[0] if isinstance(v, (list, tuple)) else v) for k, v in self.rates.items()},
                       self.p_strict)


def _draw(v, rng):
    if isinstance(v, (list, tuple)):
        lo, hi = v
        return float(lo) if lo == hi else float(rng.uniform(lo, hi))
    return float(v)


def make_sampler(params: CaseStudyParams):
    params.validate()
    fixed_rates = all(not isinstance(v, (list, tuple)) for v in params.rates.values())
    shared = gms_invocation(params.rates, params.p_strict) if fixed_rates else None

    def sample(rng) -> RunSetup:
        n = int(rng.integers(params.users[0], params.users[1] + 1))
        a = int(rng.integers(params.admins[0], min(params.admins[1], n) + 1)) if params.admins[0] <= n else n
        rates = {k: _draw(v, rng) for k, v in sorted(params.rates.items())}
        inv = shared or gms_invocation(rates, params.p_strict)
        return RunSetup(start_state(n, a, params.member_fraction), inv, {"users": n, "admins": a})
    return sample


# -- costs and metrics -----------------------------------------------------------------------

MEASURES = ("time", "am_calls", "state_size")


def case_study_costs(impl, command_seconds: float = DEFAULT_COMMAND_SECONDS) -> dict:
    target = impl.target
    excl = target.population_relations
    aux = {n for n, c in target.commands.items() if c.aux}
    return {
        "time": CostFunction(RealTime(), lambda name, args, st: command_seconds),
        "am_calls": CostFunction(NatAdd(), lambda name, args, st: 1 if name in aux else 0),
        "state_size": CostFunction(NatMax(), lambda name, args, st: st.size(excl), post_state=True),
    }


def baseline_size(kind: str, shadow) -> int | None:
    """Storage for a naive encoding of the current accesses."""
    pairs = gms.access_pairs(shadow)
    if kind == "dac":
        return len(pairs)
    if kind == "rbac":
        # one role per user: UA holds one row per user, PA one row per (message, user) access
        return len(shadow.rel("U")) + len(pairs)
    return None


def lane_metrics(kind: str):
    def metrics(driver, lane):
        users = len(driver.shadow.rel("U"))
        out = {"baseline_size": baseline_size(kind, driver.shadow), "roles": None, "role_user_ratio": None}
        if kind == "rbac":
            roles = rbac_u.role_count(lane.target)
            out["roles"] = roles
            out["role_user_ratio"] = roles / users if users else None
        return out
    return metrics


class CoiObserver:
    """Counts COI step executions and the admin work they cost."""

    def __init__(self):
        self.steps = {s: 0 for s in COI_STEPS}

    def on_event(self, driver, ev, run):
        if ev.get("kind") in ("exec", "noop") and ev["action"] in self.steps and "instance" in ev:
            self.steps[ev["action"]] += 1

    def metrics(self, driver):
        pool = driver.pool
        task = driver.wf.task_of("RequestLeave") if "RequestLeave" in driver.wf else None
        out = {"coi_attempted": pool.created[task] if task is not None else 0,
               "coi_completed": pool.completed[task] if task is not None else 0,
               "temp_admin_work": sum(v for k, v in self.steps.items() if k != "RequestLeave")}
        return out


KINDS = {"rbac_u": "rbac", "dac_v": "dac", "sd3gm": "sd3"}


def scheme_setup(scheme_name: str, command_seconds: float = DEFAULT_COMMAND_SECONDS) -> SchemeSetup:
    from . import implementation_for
    impl = implementation_for(scheme_name)
    return SchemeSetup(scheme_name, impl, case_study_costs(impl, command_seconds),
                       lane_metrics(KINDS.get(scheme_name, scheme_name)))


def case_study_config(params: CaseStudyParams | None = None, schemes=("rbac_u", "dac_v", "sd3gm"),
                      goal_time: float = 8 * 3600.0, step: float = 1.0, seed: int = 0,
                      trace_sharing: bool = False, log_level: str = "events") -> SimConfig:
    params = params or CaseStudyParams()
    return SimConfig(
        workload=gms.gms_scheme(),
        schemes=tuple(scheme_setup(s, params.command_seconds) for s in schemes),
        goal_time=goal_time, step=step, sampler=make_sampler(params), seed=seed,
        trace_sharing=trace_sharing, log_level=log_level, stable_commands=frozenset({"Post"}),
        observer=CoiObserver,
    )


# -- the single-group views scenario -------------------------------------------------------------

def views_scenario():
    """Six events in one group after which three members see three different message sets.

    Returns (start state, trace). u1 creates g1 and posts, u2 joins strictly and
    posts, u3 joins strictly and posts.
    """
    u1, u2, u3 = (gms.user(f"u{i}") for i in (1, 2, 3))
    m1, m2, m3 = (gms.message(f"m{i}") for i in (1, 2, 3))
    start = gms.gms_state(users=[u1, u2, u3], tc=1)
    trace = [
        ("CreateGroup", (u1, GROUP)),
        ("Post", (u1, GROUP, m1)),
        ("SAddMember", (u1, u2, GROUP)),
        ("Post", (u2, GROUP, m2)),
        ("SAddMember", (u1, u3, GROUP)),
        ("Post", (u3, GROUP, m3)),
    ]
    return start, trace
