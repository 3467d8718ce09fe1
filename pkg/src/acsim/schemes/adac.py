"""ADAC (DAC with administrators), DAC augmented with the admin AM, and sigma_adac."""

from ..auxm import AuxiliaryMachine, augment
from ..core import Atom, CommandDef, QueryDef, RelationalState, Scheme, Universe
from ..mapping import Implementation
from .dac_v import DAC_RELATIONS, OWN, _owns, create_object, dac_commands, dac_scheme, owners

DEFAULT_RIGHTS = (OWN, Atom("I", "r"))


def subjects(*ids):
    return tuple(Atom("S", i) for i in ids)


def objects(*ids):
    return tuple(Atom("O", i) for i in ids)


def _issuer_admin(fn):
    def effect(st, args):
        if (args[0],) not in st.rel("A"):
            return False
        return fn(st, args)
    return effect


def adac_access(state, args) -> bool:
    _, s, o, i = args
    if (s, o, i) in state.rel("M"):
        return True
    return (s,) in state.rel("A") and (o,) in state.rel("OBJ") and i != OWN


def _adac_grant_admin(st, args):
    st.add("A", (args[1],))
    return True


def _adac_revoke_admin(st, args):
    st.discard("A", (args[1],))
    return True


def adac_scheme() -> Scheme:
    return Scheme.build(
        "adac", {**DAC_RELATIONS, "A": ("S",)},
        dac_commands() + [
            CommandDef("GrantAdmin", ("S", "S"), _issuer_admin(_adac_grant_admin)),
            CommandDef("RevokeAdmin", ("S", "S"), _issuer_admin(_adac_revoke_admin)),
        ],
        [
            QueryDef("Access", ("S", "S", "O", "I"), adac_access),
            QueryDef("SubjectAdmin", ("S", "S"), lambda st, a: (a[1],) in st.rel("A"), access=False),
        ],
        population_relations=("S",),
    )


# -- the admin AM over DAC ---------------------------------------------------------

def _m_grant_admin(st, args):
    s, t = args
    if (t,) in st.rel("A"):
        return False
    st.add("A", (t,))
    for s2, o, i in list(st.rel("M")):
        if s2 == t and i != OWN:
            st.add("N", (t, o, i))
    return True


def _m_revoke_admin(st, args):
    s, t = args
    if (t,) not in st.rel("A"):
        return False
    st.discard("A", (t,))
    st.discard_where("N", lambda x: x[0] == t)
    return True


def _soft(add):
    def effect(st, args):
        s, t, o, i = args
        if not _owns(st, s, o) or i == OWN or (t,) not in st.rel("A"):
            return False
        (st.add if add else st.discard)("N", (t, o, i))
        return True
    return effect


def admin_am() -> AuxiliaryMachine:
    return AuxiliaryMachine(
        "M", {"A": ("S",), "N": ("S", "O", "I")},
        [
            CommandDef("GrantAdmin", ("S", "S"), _issuer_admin(_m_grant_admin)),
            CommandDef("RevokeAdmin", ("S", "S"), _issuer_admin(_m_revoke_admin)),
            CommandDef("SoftGrant", ("S", "S", "O", "I"), _soft(True)),
            CommandDef("SoftRevoke", ("S", "S", "O", "I"), _soft(False)),
        ],
        [
            QueryDef("SubjectAdmin", ("S", "S"), lambda st, a: (a[1],) in st.rel("A"), access=False),
            QueryDef("HiddenAccess", ("S", "S", "O", "I"), lambda st, a: tuple(a[1:]) in st.rel("N"),
                     access=False),
        ],
    )


def dac_m_scheme() -> Scheme:
    return augment(dac_scheme(), admin_am(), name="dac_m")


def dac_grant_all_scheme(rights=DEFAULT_RIGHTS) -> Scheme:
    """Deliberately unsafe extension: an owner can hand out every right, ownership included."""
    rights = tuple(rights)

    def grant_all(st, args):
        s, t, o = args
        if not _owns(st, s, o):
            return False
        for i in rights:
            st.add("M", (t, o, i))
        return True

    base = dac_scheme()
    return Scheme.build("dac_grant_all", base.relations,
                        list(base.commands.values()) + [CommandDef("GrantAll", ("S", "S", "O"), grant_all)],
                        list(base.queries.values()), population_relations=base.population_relations)


# -- sigma_adac: ADAC in DAC+M ---------------------------------------------------------

def make_map_state(rights):
    extra = [i for i in rights if i != OWN]

    def map_state(g: RelationalState) -> RelationalState:
        admins = {t[0] for t in g.rel("A")}
        m = set(g.rel("M"))
        n = {(s, o, i) for s, o, i in g.rel("M") if s in admins and i != OWN}
        for a in admins:
            for (o,) in g.rel("OBJ"):
                for i in extra:
                    m.add((a, o, i))
        return RelationalState({"S": g.rel("S"), "OBJ": g.rel("OBJ"), "M": m,
                                "A": g.rel("A"), "N": n})
    return map_state


def make_expand(rights):
    extra = [i for i in rights if i != OWN]

    def expand(name, args, target):
        admins = sorted(t[0] for t in target.rel("A"))
        if name == "CreateObject":
            s, o = args
            return [("CreateObject", (s, o))] + [("Grant", (s, a, o, i)) for a in admins for i in extra]
        if name in ("Grant", "Revoke"):
            s, t, o, i = args
            if t in admins:
                return [("SoftGrant" if name == "Grant" else "SoftRevoke", args)]
            return [(name, args)]
        if name == "GrantAdmin":
            s, t = args
            if t in admins:
                return []
            out = [("GrantAdmin", args)]
            owner = owners(target)
            for (o,) in sorted(target.rel("OBJ")):
                own = owner.get(o)
                for i in extra:
                    if (t, o, i) not in target.rel("M"):
                        out.append(("Grant", (own, t, o, i)))
            return out
        if name == "RevokeAdmin":
            s, t = args
            if t not in admins:
                return []
            hidden = target.rel("N")
            out = [("RevokeAdmin", args)]
            owner = owners(target)
            for s2, o, i in sorted(target.rel("M")):
                if s2 == t and i != OWN and (t, o, i) not in hidden:
                    out.append(("Revoke", (owner.get(o), t, o, i)))
            return out
        raise KeyError(name)
    return expand


def map_universe(u: Universe) -> Universe:
    return u


def sigma_adac(rights=DEFAULT_RIGHTS, workload=None, target=None) -> Implementation:
    return Implementation(
        "sigma_adac", workload or adac_scheme(), target or dac_m_scheme(),
        map_state=make_map_state(rights), expand=make_expand(rights),
        queries={"Access": ("Access", lambda a: a[1:]),
                 "SubjectAdmin": ("SubjectAdmin", lambda a: a)},
    )


__all__ = ["adac_scheme", "dac_m_scheme", "dac_grant_all_scheme", "sigma_adac", "admin_am", "create_object"]
