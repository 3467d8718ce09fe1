"""SD3-GM: the fixed two-rule SD3 policy for group messaging, evaluated directly."""

from ..core import INF, Atom, CommandDef, QueryDef, RelationalState, Scheme
from ..mapping import Implementation
from . import gms

RULES = (Atom("Rule", "ACCESS"), Atom("Rule", "CURRMEMBER"))

RELATIONS = {"OWN": ("U", "G"), "ADMIN": ("U", "G"), "MEMBER": ("U", "G", "T", "T"),
             "POST": ("G", "M", "T"), "TIME": ("T",), "RULE": ("Rule",)}


def now(st) -> int:
    (t,), = st.rel("TIME")
    return t


def _advance(st):
    t = now(st)
    st.discard("TIME", (t,))
    st.add("TIME", (t + 1,))


def currmember(st, u, g) -> bool:
    return any(x[1] == g and x[3] == INF for x in st.lookup("MEMBER", 0, u))


def create_group(st, args):
    u, g = args
    st.add("OWN", (u, g))
    st.add("ADMIN", (u, g))
    st.add("MEMBER", (u, g, 0, INF))
    return True


def grant_admin(st, args):
    o, u, g = args
    if (o, g) not in st.rel("OWN"):
        return False
    st.add("ADMIN", (u, g))
    return True


def revoke_admin(st, args):
    o, u, g = args
    if (o, g) not in st.rel("OWN") and o != u:
        return False
    st.discard("ADMIN", (u, g))
    return True


def s_add(st, args):
    a, u, g = args
    if (a, g) not in st.rel("ADMIN"):
        return False
    st.add("MEMBER", (u, g, now(st), INF))
    _advance(st)
    return True


def l_add(st, args):
    a, u, g = args
    if (a, g) not in st.rel("ADMIN"):
        return False
    st.add("MEMBER", (u, g, 0, INF))
    return True


def s_remove(st, args):
    a, u, g = args
    if (a, g) not in st.rel("ADMIN") and a != u:
        return False
    st.discard_where("MEMBER", lambda t: t[0] == u and t[1] == g)
    return True


def l_remove(st, args):
    a, u, g = args
    if (a, g) not in st.rel("ADMIN"):
        return False
    tc = now(st)
    for t in [t for t in st.rel("MEMBER") if t[0] == u and t[1] == g and t[3] == INF]:
        st.discard("MEMBER", t)
        st.add("MEMBER", (u, g, t[2], tc))
    _advance(st)
    return True


def post(st, args):
    u, g, m = args
    if not currmember(st, u, g) or st.lookup("POST", 1, m):
        return False
    st.add("POST", (g, m, now(st)))
    _advance(st)
    return True


def access(state, args) -> bool:
    """ACCESS(U, M) <- MEMBER(U, G, T1, T2), POST(G, M, T), LESSEQ(T1, T), LESSEQ(T, T2)."""
    u, m = args
    for g, _, t in state.lookup("POST", 1, m):
        if any(x[1] == g and x[2] <= t <= x[3] for x in state.lookup("MEMBER", 0, u)):
            return True
    return False


def population(state, sort):
    if sort == "U":
        return sorted({t[0] for r in ("OWN", "ADMIN", "MEMBER") for t in state.rel(r)})
    if sort == "G":
        return sorted({t[1] for r in ("OWN", "ADMIN", "MEMBER") for t in state.rel(r)})
    if sort == "M":
        return sorted({t[1] for t in state.rel("POST")})
    return []


def sd3gm_scheme() -> Scheme:
    U3 = ("U", "U", "G")
    return Scheme.build(
        "sd3gm", RELATIONS,
        [
            CommandDef("CreateGroup", ("U", "G"), create_group),
            CommandDef("GrantAdmin", U3, grant_admin),
            CommandDef("RevokeAdmin", U3, revoke_admin),
            CommandDef("SAddMember", U3, s_add),
            CommandDef("LAddMember", U3, l_add),
            CommandDef("SRemoveMember", U3, s_remove),
            CommandDef("LRemoveMember", U3, l_remove),
            CommandDef("Post", ("U", "G", "M"), post),
        ],
        [QueryDef("Access", ("U", "M"), access)],
        population=population,
    )


def map_state(g: RelationalState) -> RelationalState:
    return RelationalState({
        "OWN": g.rel("O"), "ADMIN": g.rel("A"), "MEMBER": g.rel("R"), "POST": g.rel("TX"),
        "TIME": {(g.scalar("Tc"),)}, "RULE": {(r,) for r in RULES},
    })


def sigma_s(workload=None, target=None) -> Implementation:
    return Implementation(
        "sigma_s", workload or gms.gms_scheme(), target or sd3gm_scheme(),
        map_state=map_state, expand=lambda name, args, st: [(name, args)],
        queries={"Access": ("Access", lambda a: a)},
    )
