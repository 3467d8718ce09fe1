"""Graham-Denning style DAC, the group AM V, and the GMS implementation sigma_D."""

from ..auxm import AuxiliaryMachine, augment
from ..core import Atom, CommandDef, QueryDef, RelationalState, Scheme, Universe
from ..mapping import Implementation
from . import gms

OWN = Atom("I", "own")
READ = Atom("I", "r")


def subj(u) -> Atom:
    return Atom("S", u.id)


def obj(m) -> Atom:
    return Atom("O", m.id)


def create_object(st, args):
    s, o = args
    if (o,) in st.rel("OBJ"):
        return False
    st.add("OBJ", (o,))
    st.add("M", (s, o, OWN))
    return True


def _owns(st, s, o):
    return (s, o, OWN) in st.rel("M")


def grant(st, args):
    s, t, o, i = args
    if not _owns(st, s, o) or i == OWN:
        return False
    st.add("M", (t, o, i))
    return True


def revoke(st, args):
    s, t, o, i = args
    if not _owns(st, s, o) or i == OWN:
        return False
    st.discard("M", (t, o, i))
    return True


def owner_of(state, o):
    for s, _, i in state.lookup("M", 1, o):
        if i == OWN:
            return s
    return None


def owners(state) -> dict:
    """object -> owning subject, from one pass over M."""
    return {o: s for s, o, i in state.rel("M") if i == OWN}


DAC_RELATIONS = {"S": ("S",), "OBJ": ("O",), "M": ("S", "O", "I")}


def dac_commands():
    return [
        CommandDef("CreateObject", ("S", "O"), create_object),
        CommandDef("Grant", ("S", "S", "O", "I"), grant),
        CommandDef("Revoke", ("S", "S", "O", "I"), revoke),
    ]


def dac_scheme() -> Scheme:
    return Scheme.build("dac", DAC_RELATIONS, dac_commands(),
                        [QueryDef("Access", ("S", "O", "I"), lambda st, a: tuple(a) in st.rel("M"))],
                        population_relations=("S",))


def _v_create_group(st, args):
    s, g = args
    st.add("G", (g,))
    st.add("W", (s, g))
    st.add("A", (s, g))
    st.add("B", (s, g))
    return True


def _v_if(rel, fn, self_ok=False):
    def effect(st, args):
        s, t, g = args
        if (s, g) not in st.rel(rel) and not (self_ok and s == t):
            return False
        fn(st, t, g)
        return True
    return effect


def _v_associate(st, args):
    s, g, o = args
    if (s, g) not in st.rel("B"):
        return False
    st.add("GM", (g, o))
    return True


def group_am_v() -> AuxiliaryMachine:
    return AuxiliaryMachine(
        "V", {"G": ("G",), "GM": ("G", "O"), "W": ("S", "G"), "A": ("S", "G"), "B": ("S", "G")},
        [
            CommandDef("CreateGroup", ("S", "G"), _v_create_group),
            CommandDef("AssociateWithGroup", ("S", "G", "O"), _v_associate),
            CommandDef("GrantAdmin", ("S", "S", "G"), _v_if("W", lambda st, t, g: st.add("A", (t, g)))),
            CommandDef("RevokeAdmin", ("S", "S", "G"),
                       _v_if("W", lambda st, t, g: st.discard("A", (t, g)), self_ok=True)),
            CommandDef("GrantMember", ("S", "S", "G"), _v_if("A", lambda st, t, g: st.add("B", (t, g)))),
            # self-removal mirrors the GMS SRemoveMember guard
            CommandDef("RevokeMember", ("S", "S", "G"),
                       _v_if("A", lambda st, t, g: st.discard("B", (t, g)), self_ok=True)),
        ],
    )


def dac_v_scheme() -> Scheme:
    return augment(dac_scheme(), group_am_v(), name="dac_v")


def map_state(g: RelationalState) -> RelationalState:
    rels = {"S": {(subj(t[0]),) for t in g.rel("U")}, "OBJ": set(), "M": set(),
            "G": set(g.rel("G")), "GM": set(),
            "W": {(subj(u), grp) for u, grp in g.rel("O")},
            "A": {(subj(u), grp) for u, grp in g.rel("A")},
            "B": {(subj(u), grp) for u, grp, _, hi in g.rel("R") if hi == gms.INF}}
    for grp, m, _ in g.rel("TX"):
        owners = sorted(u for u, g2 in g.rel("O") if g2 == grp)
        rels["OBJ"].add((obj(m),))
        rels["GM"].add((grp, obj(m)))
        if owners:
            rels["M"].add((subj(owners[0]), obj(m), OWN))
    for u, m in gms.access_pairs(g):
        rels["M"].add((subj(u), obj(m), READ))
    return RelationalState(rels)


def _objs(target, g):
    return sorted(o for _, o in target.lookup("GM", 0, g))


def _by_owner(target, cmd, who, objs):
    out = []
    for o in objs:
        s = owner_of(target, o)
        if s is not None:
            out.append((cmd, (s, who, o, READ)))
    return out


def expand(name, args, target):
    if name == "CreateGroup":
        u, g = args
        return [("CreateGroup", (subj(u), g))] + _by_owner(target, "Grant", subj(u), _objs(target, g))
    if name in ("GrantAdmin", "RevokeAdmin"):
        u, u2, g = args
        return [(name, (subj(u), subj(u2), g))]
    if name == "SAddMember":
        u, u2, g = args
        return [("GrantMember", (subj(u), subj(u2), g))]
    if name == "LAddMember":
        u, u2, g = args
        return [("GrantMember", (subj(u), subj(u2), g))] + _by_owner(target, "Grant", subj(u2), _objs(target, g))
    if name == "SRemoveMember":
        u, u2, g = args
        return [("RevokeMember", (subj(u), subj(u2), g))] + \
            _by_owner(target, "Revoke", subj(u2), _objs(target, g))
    if name == "LRemoveMember":
        u, u2, g = args
        return [("RevokeMember", (subj(u), subj(u2), g))]
    if name == "Post":
        u, g, m = args
        s, o = subj(u), obj(m)
        members = sorted(t for t, _ in target.lookup("B", 1, g))
        return [("CreateObject", (s, o)), ("AssociateWithGroup", (s, g, o))] + \
            [("Grant", (s, t, o, READ)) for t in members]
    raise KeyError(name)


def map_universe(u: Universe) -> Universe:
    return Universe({"S": tuple(subj(x) for x in u.sorts.get("U", ())),
                     "O": tuple(obj(x) for x in u.sorts.get("M", ())),
                     "I": (OWN, READ), "G": u.sorts.get("G", ())})


def sigma_d(workload=None, target=None) -> Implementation:
    return Implementation(
        "sigma_d", workload or gms.gms_scheme(), target or dac_v_scheme(),
        map_state=map_state, expand=expand,
        queries={"Access": ("Access", lambda a: (subj(a[0]), obj(a[1]), READ))},
        map_universe=map_universe,
    )
