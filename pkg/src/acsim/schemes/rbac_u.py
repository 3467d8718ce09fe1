"""RBAC (NIST-style, no sessions), the group AM, and the GMS implementation sigma_R."""

from ..auxm import AuxiliaryMachine, augment
from ..core import Atom, CommandDef, QueryDef, RelationalState, Scheme, Universe
from ..mapping import Implementation
from . import gms

ADMIN = Atom("Role", "admin")


def member_role(g) -> Atom:
    return Atom("Role", f"m:{g.id}")


def owner_role(g) -> Atom:
    return Atom("Role", f"o:{g.id}")


def admin_role(g) -> Atom:
    return Atom("Role", f"a:{g.id}")


def message_role(m) -> Atom:
    return Atom("Role", f"r:{m.id}")


def perm(m) -> Atom:
    return Atom("P", m.id)


def _is_admin(st, a):
    return (a, ADMIN) in st.rel("UA")


def _guarded(fn):
    def effect(st, args):
        if not _is_admin(st, args[0]):
            return False
        fn(st, args)
        return True
    return effect


def access(state, args):
    u, p = args
    roles = state.rel("R")
    pa = state.rel("PA")
    for u2, r in state.rel("UA"):
        if u2 == u and (r,) in roles and (p, r) in pa:
            return True
    return False


def rbac_scheme() -> Scheme:
    return Scheme.build(
        "rbac",
        {"U": ("U",), "R": ("Role",), "P": ("P",), "UA": ("U", "Role"), "PA": ("P", "Role")},
        [
            CommandDef("AddRole", ("U", "Role"), _guarded(lambda st, a: st.add("R", (a[1],)))),
            CommandDef("DeleteRole", ("U", "Role"), _guarded(lambda st, a: st.discard("R", (a[1],)))),
            CommandDef("AssignUser", ("U", "U", "Role"), _guarded(lambda st, a: st.add("UA", (a[1], a[2])))),
            CommandDef("DeassignUser", ("U", "U", "Role"),
                       _guarded(lambda st, a: st.discard("UA", (a[1], a[2])))),
            CommandDef("GrantPermission", ("U", "P", "Role"),
                       _guarded(lambda st, a: st.add("PA", (a[1], a[2])))),
            CommandDef("RevokePermission", ("U", "P", "Role"),
                       _guarded(lambda st, a: st.discard("PA", (a[1], a[2])))),
        ],
        [
            QueryDef("Access", ("U", "P"), access),
            QueryDef("Assigned", ("U", "Role"), lambda s, a: (a[0], a[1]) in s.rel("UA"), access=False),
        ],
        population_relations=("U",),
    )


def group_am() -> AuxiliaryMachine:
    return AuxiliaryMachine(
        "U", {"G": ("G",), "GM": ("G", "P")},
        [
            CommandDef("CreateGroup", ("U", "G"), _guarded(lambda st, a: st.add("G", (a[1],)))),
            CommandDef("AssociateWithGroup", ("U", "G", "P"),
                       _guarded(lambda st, a: st.add("GM", (a[1], a[2])))),
        ],
    )


def rbac_u_scheme() -> Scheme:
    return augment(rbac_scheme(), group_am(), name="rbac_u")


def map_state(g: RelationalState) -> RelationalState:
    """Every user holds the admin role; group roles mirror O/A/current membership; r^m per message."""
    users = [t[0] for t in g.rel("U")]
    roles = {(ADMIN,)}
    ua = {(u, ADMIN) for u in users}
    pa = set()
    gm = set()
    groups = {t for t in g.rel("G")}
    for (grp,) in groups:
        roles.update({(member_role(grp),), (owner_role(grp),), (admin_role(grp),)})
    for u, grp in g.rel("O"):
        ua.add((u, owner_role(grp)))
    for u, grp in g.rel("A"):
        ua.add((u, admin_role(grp)))
    for u, grp, _, hi in g.rel("R"):
        if hi == gms.INF:
            ua.add((u, member_role(grp)))
    for grp, m, _ in g.rel("TX"):
        roles.add((message_role(m),))
        pa.add((perm(m), message_role(m)))
        gm.add((grp, perm(m)))
    for u, m in gms.access_pairs(g):
        ua.add((u, message_role(m)))
    return RelationalState({"U": {(u,) for u in users}, "R": roles, "UA": ua, "PA": pa,
                            "G": groups, "GM": gm})


def _msgs(target, g):
    return sorted(p for _, p in target.lookup("GM", 0, g))


def expand(name, args, target):
    if name == "CreateGroup":
        u, g = args
        out = [("CreateGroup", (u, g))]
        for r in (member_role(g), owner_role(g), admin_role(g)):
            out += [("AddRole", (u, r)), ("AssignUser", (u, u, r))]
        # joining an existing group as a new owner also exposes its history
        out += [("AssignUser", (u, u, message_role(p))) for p in _msgs(target, g)]
        return out
    if name == "GrantAdmin":
        u, u2, g = args
        return [("AssignUser", (u, u2, admin_role(g)))]
    if name == "RevokeAdmin":
        u, u2, g = args
        return [("DeassignUser", (u, u2, admin_role(g)))]
    if name == "SAddMember":
        u, u2, g = args
        return [("AssignUser", (u, u2, member_role(g)))]
    if name == "LAddMember":
        u, u2, g = args
        return [("AssignUser", (u, u2, member_role(g)))] + \
            [("AssignUser", (u, u2, message_role(p))) for p in _msgs(target, g)]
    if name == "SRemoveMember":
        u, u2, g = args
        return [("DeassignUser", (u, u2, member_role(g)))] + \
            [("DeassignUser", (u, u2, message_role(p))) for p in _msgs(target, g)]
    if name == "LRemoveMember":
        u, u2, g = args
        return [("DeassignUser", (u, u2, member_role(g)))]
    if name == "Post":
        u, g, m = args
        p, r = perm(m), message_role(m)
        mg = member_role(g)
        holders = sorted(u2 for u2, _ in target.lookup("UA", 1, mg))
        return [("AssociateWithGroup", (u, g, p)), ("AddRole", (u, r)), ("GrantPermission", (u, p, r))] + \
            [("AssignUser", (u, u2, r)) for u2 in holders]
    raise KeyError(name)


def map_universe(u: Universe) -> Universe:
    gs = u.sorts.get("G", ())
    ms = u.sorts.get("M", ())
    roles = [ADMIN] + [f(g) for g in gs for f in (member_role, owner_role, admin_role)] + \
        [message_role(m) for m in ms]
    return Universe({"U": u.sorts.get("U", ()), "G": gs, "P": tuple(perm(m) for m in ms), "Role": tuple(roles)})


def sigma_r(workload=None, target=None) -> Implementation:
    return Implementation(
        "sigma_r", workload or gms.gms_scheme(), target or rbac_u_scheme(),
        map_state=map_state, expand=expand,
        queries={"Access": ("Access", lambda a: (a[0], perm(a[1])))},
        map_universe=map_universe,
    )


def role_count(state) -> int:
    return len(state.rel("R"))
