import pytest
from hypothesis import given, strategies as st

from acsim.core import (INF, And, Atom, CsaiInstance, Not, Or, Q, RelationalState, Scheme, StateBuilder, TRUE,
                        Universe, apply_command, enumerate_args, eval_csai, eval_query, format_value, parse_value,
                        reachable_states)
from acsim.errors import ConfigError
from acsim.schemes import dac_v, gms
from acsim.schemes.dac_v import OWN, READ

s, t = Atom("S", "s"), Atom("S", "t")
o = Atom("O", "o")


def dac_owning():
    return RelationalState({"S": {(s,), (t,)}, "OBJ": {(o,)}, "M": {(s, o, OWN)}})


def test_atoms_compare_by_sort_and_id():
    assert Atom("U", "x") == Atom("U", "x")
    assert Atom("U", "x") != Atom("G", "x")
    with pytest.raises(AttributeError):
        Atom("U", "x").id = "y"


def test_dac_grant_fires_with_ownership():
    out, fired = apply_command(dac_v.dac_scheme(), dac_owning(), "Grant", (s, t, o, READ))
    assert fired
    assert (t, o, READ) in out.rel("M")


def test_dac_grant_without_ownership_is_noop():
    start = dac_owning()
    out, fired = apply_command(dac_v.dac_scheme(), start, "Grant", (t, s, o, READ))
    assert not fired
    assert out.canonical() == start.canonical()


def test_gms_create_group():
    u, g = gms.user("u"), gms.group("g")
    out, fired = apply_command(gms.gms_scheme(), gms.gms_state(users=[u]), "CreateGroup", (u, g))
    assert fired
    assert out.rel("G") == {(g,)}
    assert out.rel("O") == {(u, g)} and out.rel("A") == {(u, g)}
    assert out.rel("R") == {(u, g, 0, INF)}


def test_gms_strict_join_hides_earlier_messages():
    sch = gms.gms_scheme()
    own, u, g = gms.user("o"), gms.user("u"), gms.group("g")
    m1, m2 = gms.message("m1"), gms.message("m2")
    state = gms.gms_state(users=[own, u])
    for name, args in [("CreateGroup", (own, g)), ("Post", (own, g, m1)), ("SAddMember", (own, u, g)),
                       ("Post", (own, g, m2))]:
        state, fired = apply_command(sch, state, name, args)
        assert fired
    assert (u, g, 1, INF) in state.rel("R")
    assert eval_query(sch, state, "Access", (u, m1)) is False
    assert eval_query(sch, state, "Access", (u, m2)) is True


def test_empty_state_entails_nothing():
    assert not eval_query(gms.gms_scheme(), RelationalState(), "Access", (gms.user("u"), gms.message("m")))


def test_dac_access_is_matrix_membership():
    st = RelationalState({"M": {(s, o, READ)}})
    assert eval_query(dac_v.dac_scheme(), st, "Access", (s, o, READ))
    assert not eval_query(dac_v.dac_scheme(), st, "Access", (t, o, READ))


def test_bad_arguments_are_config_errors():
    with pytest.raises(ConfigError):
        apply_command(dac_v.dac_scheme(), dac_owning(), "Grant", (s, t, o))
    with pytest.raises(ConfigError):
        apply_command(dac_v.dac_scheme(), dac_owning(), "Grant", (s, o, o, READ))
    with pytest.raises(ConfigError):
        apply_command(dac_v.dac_scheme(), dac_owning(), "Nope", ())


def test_enumerate_args():
    u = Universe.of(U=["u1", "u2"], G=[])
    assert list(enumerate_args(("U",), u)) == [(Atom("U", "u1"),), (Atom("U", "u2"),)]
    assert list(enumerate_args(("U", "G"), u)) == []
    assert len(list(enumerate_args(("U", "U"), u))) == 4


def test_reachability_depth_zero():
    r = reachable_states(dac_v.dac_scheme(), dac_owning(), 0, Universe.of(S=["s"], O=["o"]))
    assert len(r) == 1


def test_reachability_single_owner_depth_one():
    start = RelationalState({"S": {(s,)}, "OBJ": {(o,)}, "M": {(s, o, OWN)}})
    uni = Universe({"S": (s,), "O": (o,), "I": (OWN, READ)})
    r = reachable_states(dac_v.dac_scheme(), start, 1, uni)
    want = RelationalState({"S": {(s,)}, "OBJ": {(o,)}, "M": {(s, o, OWN), (s, o, READ)}})
    assert {x.canonical() for x in r} == {start.canonical(), want.canonical()}
    assert r.trace_to(want) == [("Grant", (s, s, o, READ))]


def test_reachability_closes_when_nothing_fires():
    # nobody owns anything and the only object already exists
    start = RelationalState({"S": {(s,)}, "OBJ": {(o,)}})
    uni = Universe({"S": (s,), "O": (o,), "I": (READ,)})
    r = reachable_states(dac_v.dac_scheme(), start, 5, uni)
    assert len(r) == 1 and r.closed


def test_csai():
    sch = dac_v.dac_scheme()
    start = RelationalState({"S": {(s,)}, "OBJ": {(o,)}, "M": {(s, o, OWN)}})
    uni = Universe({"S": (s,), "O": (o,), "I": (OWN, READ)})
    q = Q("Access", s, o, READ)
    assert eval_csai(sch, CsaiInstance(start, q, "exists"), 1, uni) is True
    assert eval_csai(sch, CsaiInstance(start, And(q, Not(q)), "exists"), 5, uni) is False
    assert eval_csai(sch, CsaiInstance(start, TRUE, "forall"), 0, uni) is None
    assert eval_csai(sch, CsaiInstance(start, Or(q, Not(q)), "forall"), 5, uni) is True
    with pytest.raises(ConfigError):
        eval_csai(sch, CsaiInstance(start, Q("Access", s, o), "exists"), 1, uni)


def test_builder_lookup_tracks_changes():
    b = StateBuilder(dac_owning())
    assert b.lookup("M", 1, o) == ((s, o, OWN),)
    b.add("M", (t, o, READ))
    assert set(b.lookup("M", 1, o)) == {(s, o, OWN), (t, o, READ)}
    b.discard("M", (s, o, OWN))
    assert b.lookup("M", 1, o) == ((t, o, READ),)
    assert b.freeze().lookup("M", 0, t) == ((t, o, READ),)


def test_unchanged_builder_returns_base():
    st = dac_owning()
    b = StateBuilder(st)
    b.add("M", (s, o, OWN))
    assert b.freeze() is st


values = st.one_of(st.integers(0, 50), st.just(INF),
                   st.builds(Atom, st.sampled_from("UGM"), st.text("abc123", min_size=1, max_size=3)))


@given(values)
def test_value_format_roundtrip(v):
    assert parse_value(format_value(v)) == v


@given(st.lists(st.tuples(values, values), max_size=8), st.randoms())
def test_canonical_encoding_ignores_insertion_order(rows, rnd):
    a = RelationalState({"R": rows})
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    b = StateBuilder()
    for r in shuffled:
        b.add("R", r)
    assert b.freeze().canonical() == a.canonical()
    assert RelationalState({"R": rows, "E": []}) == a


def test_infinity_tops_timestamps():
    assert all(INF > x for x in (0, 10, 10**12))


def test_duplicate_names_rejected():
    from acsim.core import CommandDef
    c = CommandDef("X", ("U",), lambda st, a: True)
    with pytest.raises(ConfigError):
        Scheme.build("bad", {}, [c, c], [])
