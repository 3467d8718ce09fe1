import pytest
from hypothesis import given, strategies as st

from acsim.cost import (CostFunction, NatAdd, NatMax, Order, RealTime, WorkRatio, combine, compare, constant_cost,
                        vector_of)
from acsim.errors import ConfigError

nat = st.integers(0, 10**6)
# dyadic rationals add exactly in binary floating point
dyadic = st.integers(0, 2**20).map(lambda k: k / 1024)
pair = st.tuples(nat, nat)

MEASURES = [(NatAdd(), nat), (NatMax(), nat), (RealTime(), dyadic), (WorkRatio(), pair),
            (vector_of([NatAdd(), NatMax(), RealTime()]), st.tuples(nat, nat, dyadic))]


def test_examples():
    assert combine(NatAdd(), 2, 3) == 5
    assert combine(NatMax(), 7, 3) == 7
    v = vector_of([NatAdd(), NatAdd()])
    assert combine(v, (2, 3), (1, 5)) == (3, 8)
    assert compare(NatAdd(), 3, 5) is Order.LE
    assert compare(v, (1, 5), (2, 3)) is Order.INCOMPARABLE
    assert vector_of([NatAdd(), NatMax()]).zero == (0, 0)
    with pytest.raises(ConfigError):
        vector_of([])


@pytest.mark.parametrize("measure,values", MEASURES, ids=lambda x: getattr(x, "name", ""))
def test_monoid_laws(measure, values):
    @given(values, values, values)
    def laws(a, b, c):
        m = measure
        ab = m.combine(a, b)
        assert m.contains(ab)
        assert m.combine(ab, c) == m.combine(a, m.combine(b, c))
        assert ab == m.combine(b, a)
        assert m.combine(a, m.zero) == a
        assert m.leq(a, ab) and m.leq(b, ab)
        assert m.compare(a, a) is Order.EQ
        if m.leq(a, b) and m.leq(b, a):
            assert a == b
        if m.leq(a, b) and m.leq(b, c):
            assert m.leq(a, c)
    laws()


def test_cost_function_sees_rng_only_when_asked():
    f = CostFunction(NatAdd(), lambda name, args, state: 1)
    g = CostFunction(NatAdd(), lambda name, args, state, rng: rng, uses_rng=True)
    assert f("X", (), None, rng="ignored") == 1
    assert g("X", (), None, rng=7) == 7


def test_constant_cost_default():
    f = constant_cost(NatAdd(), {"Grant": 2})
    assert f("Grant", (), None) == 2
    assert f("Revoke", (), None) == 0
