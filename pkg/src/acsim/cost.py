"""Cost algebra: ordered abelian monoids, product vectors, and cost functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Sequence

from .errors import ConfigError


class Order(enum.Enum):
    LE = "less-eq"
    GE = "greater-eq"
    EQ = "equal"
    INCOMPARABLE = "incomparable"

    def holds_le(self) -> bool:
        return self in (Order.LE, Order.EQ)


def _scalar_order(a, b) -> Order:
    if a == b:
        return Order.EQ
    return Order.LE if a < b else Order.GE


class CostMeasure:
    name = "measure"
    zero: object = 0

    def combine(self, a, b):
        raise NotImplementedError

    def compare(self, a, b) -> Order:
        raise NotImplementedError

    def contains(self, a) -> bool:
        raise NotImplementedError

    def fold(self, values: Iterable):
        return reduce(self.combine, values, self.zero)

    def leq(self, a, b) -> bool:
        return self.compare(a, b).holds_le()

    def to_json(self, v):
        return v

    def __repr__(self):
        return f"<{self.name}>"


class NatAdd(CostMeasure):
    """(N, +, <=)"""

    def __init__(self, name="nat_add"):
        self.name = name
        self.zero = 0

    def combine(self, a, b):
        return a + b

    def compare(self, a, b):
        return _scalar_order(a, b)

    def contains(self, a):
        return isinstance(a, int) and not isinstance(a, bool) and a >= 0


class NatMax(CostMeasure):
    """(N, max, <=): accrues a running maximum, e.g. peak state size."""

    def __init__(self, name="nat_max"):
        self.name = name
        self.zero = 0

    def combine(self, a, b):
        return a if a >= b else b

    def compare(self, a, b):
        return _scalar_order(a, b)

    def contains(self, a):
        return isinstance(a, int) and not isinstance(a, bool) and a >= 0


class RealTime(CostMeasure):
    """Non-negative seconds under +. Floating addition is only exact for dyadic values."""

    def __init__(self, name="time"):
        self.name = name
        self.zero = 0.0

    def combine(self, a, b):
        return a + b

    def compare(self, a, b):
        return _scalar_order(a, b)

    def contains(self, a):
        return isinstance(a, (int, float)) and a >= 0 and a != float("inf")


class WorkRatio(CostMeasure):
    """Pairs (work units, operations) added componentwise under the product order."""

    def __init__(self, name="work_ratio"):
        self.name = name
        self.zero = (0, 0)

    def combine(self, a, b):
        return (a[0] + b[0], a[1] + b[1])

    def compare(self, a, b):
        return _product_order([_scalar_order(x, y) for x, y in zip(a, b)])

    def contains(self, a):
        return (isinstance(a, tuple) and len(a) == 2
                and all(isinstance(x, int) and x >= 0 for x in a))

    def to_json(self, v):
        return list(v)


def _product_order(parts: Sequence[Order]) -> Order:
    le = all(p.holds_le() for p in parts)
    ge = all(p in (Order.GE, Order.EQ) for p in parts)
    if le and ge:
        return Order.EQ
    if le:
        return Order.LE
    if ge:
        return Order.GE
    return Order.INCOMPARABLE


class CostVector(CostMeasure):
    def __init__(self, measures: Sequence[CostMeasure], name=None):
        self.measures = tuple(measures)
        self.name = name or "vector(" + ",".join(m.name for m in self.measures) + ")"
        self.zero = tuple(m.zero for m in self.measures)

    def combine(self, a, b):
        return tuple(m.combine(x, y) for m, x, y in zip(self.measures, a, b))

    def compare(self, a, b):
        return _product_order([m.compare(x, y) for m, x, y in zip(self.measures, a, b)])

    def contains(self, a):
        return (isinstance(a, tuple) and len(a) == len(self.measures)
                and all(m.contains(x) for m, x in zip(self.measures, a)))

    def to_json(self, v):
        return [m.to_json(x) for m, x in zip(self.measures, v)]


def vector_of(measures: Sequence[CostMeasure]) -> CostVector:
    if not measures:
        raise ConfigError("vector_of needs at least one measure")
    return CostVector(measures)


def combine(measure: CostMeasure, a, b):
    return measure.combine(a, b)


def compare(measure: CostMeasure, a, b) -> Order:
    return measure.compare(a, b)


@dataclass(frozen=True)
class CostFunction:
    """Prices one target-scheme action instance.

    ``fn(name, args, state)`` sees the pre-state unless ``post_state`` is set,
    in which case it sees the state after the action ran. A stochastic
    function sets ``uses_rng`` and is called as ``fn(name, args, state, rng)``.
    """

    measure: CostMeasure
    fn: Callable
    post_state: bool = False
    uses_rng: bool = False

    def __call__(self, name, args, state, rng=None):
        if self.uses_rng:
            return self.fn(name, args, state, rng)
        return self.fn(name, args, state)


def constant_cost(measure: CostMeasure, table: dict, default=None) -> CostFunction:
    """Cost looked up by command name; ``default`` covers names not in the table."""
    dflt = measure.zero if default is None else default
    return CostFunction(measure, lambda name, args, state: table.get(name, dflt))
