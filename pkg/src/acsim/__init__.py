"""Access control scheme simulation: workloads, implementations, cost accrual, and bounded checks."""

from .core import (INF, Atom, CommandDef, QueryDef, RelationalState, Scheme, StateBuilder, Universe,
                   apply_command, eval_csai, eval_query, reachable_states)
from .cost import CostFunction, CostVector, NatAdd, NatMax, RealTime, WorkRatio
from .errors import AcsimError, BoundTooLarge, ConfigError, ImmutabilityViolation, InfiniteCycleError, InvariantBreach
from .mapping import Implementation, verify_state_matching
from .sim import SimConfig, ci_loop, ci_run, monte_carlo, simulate, summarize, t_quantile

__version__ = "0.1.0"
