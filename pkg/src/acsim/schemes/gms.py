"""GMS: the group messaging workload scheme."""

from collections import defaultdict

from ..core import INF, Atom, CommandDef, QueryDef, RelationalState, Scheme, StateBuilder

RELATIONS = {
    "U": ("U",), "G": ("G",),
    "O": ("U", "G"), "A": ("U", "G"),
    "R": ("U", "G", "T", "T"), "TX": ("G", "M", "T"),
}


def user(i) -> Atom:
    return Atom("U", str(i))


def group(i) -> Atom:
    return Atom("G", str(i))


def message(i) -> Atom:
    return Atom("M", str(i))


def _tick(st):
    st.set_scalar("Tc", st.scalar("Tc") + 1)


def create_group(st: StateBuilder, args):
    u, g = args
    st.add("G", (g,))
    st.add("O", (u, g))
    st.add("A", (u, g))
    st.add("R", (u, g, 0, INF))
    return True


def grant_admin(st, args):
    o, u, g = args
    if (o, g) not in st.rel("O"):
        return False
    st.add("A", (u, g))
    return True


def revoke_admin(st, args):
    o, u, g = args
    if (o, g) not in st.rel("O") and o != u:
        return False
    st.discard("A", (u, g))
    return True


def s_add_member(st, args):
    a, u, g = args
    if (a, g) not in st.rel("A"):
        return False
    st.add("R", (u, g, st.scalar("Tc"), INF))
    _tick(st)
    return True


def l_add_member(st, args):
    a, u, g = args
    if (a, g) not in st.rel("A"):
        return False
    st.add("R", (u, g, 0, INF))
    return True


def s_remove_member(st, args):
    a, u, g = args
    if (a, g) not in st.rel("A") and a != u:
        return False
    st.discard_where("R", lambda t: t[0] == u and t[1] == g)
    return True


def l_remove_member(st, args):
    a, u, g = args
    if (a, g) not in st.rel("A"):
        return False
    tc = st.scalar("Tc")
    for t in [t for t in st.rel("R") if t[0] == u and t[1] == g and t[3] == INF]:
        st.discard("R", t)
        st.add("R", (u, g, t[2], tc))
    # the closed interval ends at tc, so the next post must be stamped later
    _tick(st)
    return True


def is_member(state, u, g) -> bool:
    return any(t[1] == g and t[3] == INF for t in state.lookup("R", 0, u))


def is_posted(state, m) -> bool:
    return bool(state.lookup("TX", 1, m))


def post(st, args):
    u, g, m = args
    if not is_member(st, u, g) or is_posted(st, m):
        return False
    st.add("TX", (g, m, st.scalar("Tc")))
    _tick(st)
    return True


def access(state, args) -> bool:
    u, m = args
    for g, _, t in state.lookup("TX", 1, m):
        for r in state.lookup("R", 0, u):
            if r[1] == g and r[2] <= t <= r[3]:
                return True
    return False


def access_pairs(state) -> set:
    """All (user, message) pairs for which Access holds."""
    by_group = defaultdict(list)
    for u, g, lo, hi in state.rel("R"):
        by_group[g].append((u, lo, hi))
    out = set()
    for g, m, t in state.rel("TX"):
        for u, lo, hi in by_group.get(g, ()):
            if lo <= t <= hi:
                out.add((u, m))
    return out


def current_members(state, g) -> list:
    return sorted({t[0] for t in state.lookup("R", 1, g) if t[3] == INF})


def group_messages(state, g) -> list:
    return sorted(m for g2, m, _ in state.rel("TX") if g2 == g)


def population(state, sort):
    if sort == "U":
        return sorted(t[0] for t in state.rel("U"))
    if sort == "G":
        return sorted(t[0] for t in state.rel("G"))
    if sort == "M":
        return sorted({t[1] for t in state.rel("TX")})
    return []


def gms_scheme() -> Scheme:
    U3 = ("U", "U", "G")
    return Scheme.build(
        "gms", RELATIONS,
        [
            CommandDef("CreateGroup", ("U", "G"), create_group),
            CommandDef("GrantAdmin", U3, grant_admin),
            CommandDef("RevokeAdmin", U3, revoke_admin),
            CommandDef("SAddMember", U3, s_add_member),
            CommandDef("LAddMember", U3, l_add_member),
            CommandDef("SRemoveMember", U3, s_remove_member),
            CommandDef("LRemoveMember", U3, l_remove_member),
            CommandDef("Post", ("U", "G", "M"), post),
        ],
        [QueryDef("Access", ("U", "M"), access)],
        scalars=("Tc",), population=population, population_relations=("U", "G"),
    )


def gms_state(users=(), groups=(), owners=(), admins=(), members=(), posts=(), tc=0) -> RelationalState:
    """Convenience constructor; ``members`` holds (u, g, lo, hi) rows, ``posts`` (g, m, t) rows."""
    rels = {
        "U": {(u,) for u in users}, "G": {(g,) for g in groups},
        "O": set(owners), "A": set(admins), "R": set(members), "TX": set(posts),
    }
    for u, g in owners:
        rels["G"].add((g,))
    return RelationalState(rels, {"Tc": tc})


def single_group_start(n_users: int, n_members: int = 1, gid="g1") -> RelationalState:
    """Users u1..un; u1 owns and administers one group; the first n_members users are members."""
    us = [user(f"u{i + 1}") for i in range(n_users)]
    g = group(gid)
    return gms_state(users=us, groups=[g], owners=[(us[0], g)], admins=[(us[0], g)],
                     members=[(u, g, 0, INF) for u in us[:n_members]], tc=1)
