"""Discrete factors (potentials) and the semiring-generic algebra on them.

A factor is a nonnegative table over an ordered scope of discrete variables.
Tables are stored as C-ordered numpy arrays, so the first scope variable is
the slowest-varying index of the flattened table. Factors are immutable:
every operation returns a new factor, and value buffers are marked read-only
so they can be shared freely across threads.

Factors carry a ``domain`` tag. Linear-domain factors hold the values
themselves; log-domain factors hold their logarithms, in which case product
becomes addition and sum-elimination becomes logsumexp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateDistributionError,
    EvidenceError,
    FactorDivisionError,
    IncompatibleVariableError,
    ScopeError,
)

LINEAR = "linear"
LOG = "log"


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with an ordered tuple of state labels."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if len(self.states) < 1:
            raise ValueError(f"variable {self.name!r} needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"variable {self.name!r} has duplicate state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index_of(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise EvidenceError(
                f"unknown state {state!r} for variable {self.name!r}; "
                f"valid states are {list(self.states)}"
            ) from None


def binary(name: str) -> Variable:
    """Convenience constructor for a two-state variable with states '0', '1'."""
    return Variable(name, ("0", "1"))


@dataclass(frozen=True)
class Semiring:
    """A commutative (aggregate, combine) operator pair with identities.

    ``combine`` plays the role of multiplication and ``aggregate`` the role
    of addition; aggregate must distribute over combine. The four standard
    instances are exposed as module constants.
    """

    kind: str
    combine: Callable[[np.ndarray, np.ndarray], np.ndarray]
    aggregate: Callable[..., np.ndarray] = field(repr=False)
    combine_identity: float = 1.0
    aggregate_identity: float = 0.0


SUM_PRODUCT = Semiring("sum_product", np.multiply, np.sum, 1.0, 0.0)
MAX_PRODUCT = Semiring("max_product", np.multiply, np.amax, 1.0, 0.0)
MIN_SUM = Semiring("min_sum", np.add, np.amin, 0.0, math.inf)
OR_AND = Semiring("or_and", np.fmin, np.amax, 1.0, 0.0)

SEMIRINGS = {s.kind: s for s in (SUM_PRODUCT, MAX_PRODUCT, MIN_SUM, OR_AND)}


class Factor:
    """A table over an ordered scope of variables.

    Args:
        scope: ordered sequence of Variables (no duplicates).
        values: array-like of shape ``tuple(cardinalities)`` or a flat table
            of the matching length, first scope variable slowest-varying.
        domain: "linear" (default) or "log".
    """

    __slots__ = ("scope", "table", "domain")

    def __init__(self, scope: Sequence[Variable], values, domain: str = LINEAR):
        scope = tuple(scope)
        names = [v.name for v in scope]
        if len(set(names)) != len(names):
            raise ScopeError(f"duplicate variables in scope {names}")
        if domain not in (LINEAR, LOG):
            raise ValueError(f"unknown domain tag {domain!r}")
        shape = tuple(v.cardinality for v in scope)
        table = np.asarray(values, dtype=float)
        if table.shape != shape:
            expected = int(np.prod(shape)) if shape else 1
            if table.size != expected:
                raise ValueError(
                    f"table has {table.size} entries, scope {names} requires {expected}"
                )
            table = table.reshape(shape).copy()
        else:
            table = table.copy()
        if domain == LINEAR and table.size and np.min(table) < 0:
            raise ValueError("linear-domain factor entries must be nonnegative")
        table.flags.writeable = False
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):
        raise AttributeError("factors are immutable")

    # -- introspection -------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.scope)

    @property
    def values(self) -> np.ndarray:
        """The flat table, first scope variable slowest-varying."""
        return self.table.reshape(-1)

    def variable(self, name: str) -> Variable:
        for v in self.scope:
            if v.name == name:
                return v
        raise ScopeError(f"variable {name!r} not in scope {list(self.names)}")

    def axis(self, name: str) -> int:
        return self.names.index(name)

    def __repr__(self):
        return f"Factor(scope={list(self.names)}, domain={self.domain})"

    def __call__(self, assignment: Mapping[str, str]) -> float:
        """Evaluate the factor at a (super)assignment given by state labels."""
        idx = tuple(v.index_of(assignment[v.name]) for v in self.scope)
        return float(self.table[idx])

    # -- domain conversion ----------------------------------------------

    def to_log(self) -> "Factor":
        if self.domain == LOG:
            return self
        with np.errstate(divide="ignore"):
            return Factor(self.scope, np.log(self.table), domain=LOG)

    def to_linear(self) -> "Factor":
        if self.domain == LINEAR:
            return self
        return Factor(self.scope, np.exp(self.table), domain=LINEAR)

    def to_energies(self) -> np.ndarray:
        """Negative log potentials (energies), as a plain array.

        The min-sum semiring operates on these; the conversion is always
        explicit, never implied by an operation.
        """
        if self.domain == LOG:
            return -self.table
        with np.errstate(divide="ignore"):
            return -np.log(self.table)


def _check_shared_variables(f: Factor, g: Factor) -> None:
    g_vars = {v.name: v for v in g.scope}
    for v in f.scope:
        other = g_vars.get(v.name)
        if other is not None and other.states != v.states:
            raise IncompatibleVariableError(
                f"variable {v.name!r} has states {list(v.states)} in one factor "
                f"and {list(other.states)} in the other"
            )


def product(f: Factor, g: Factor) -> Factor:
    """Factor product: scope is f's order followed by g's unseen variables.

    In the linear domain entries multiply; in the log domain they add.
    """
    if f.domain != g.domain:
        raise ValueError("cannot multiply factors with different domain tags")
    _check_shared_variables(f, g)
    scope = list(f.scope) + [v for v in g.scope if v.name not in f.names]
    names = [v.name for v in scope]
    a = _broadcast_to_scope(f, scope)
    b = _broadcast_to_scope(g, scope)
    op = np.add if f.domain == LOG else np.multiply
    return Factor(scope, op(a, b), domain=f.domain)


def product_all(factors: Iterable[Factor]) -> Factor:
    factors = list(factors)
    if not factors:
        raise ValueError("empty factor product")
    out = factors[0]
    for f in factors[1:]:
        out = product(out, f)
    return out


def _broadcast_to_scope(f: Factor, scope: Sequence[Variable]) -> np.ndarray:
    """View of f's table expanded (size-1 axes) to the given scope order."""
    names = [v.name for v in scope]
    src = f.table
    order = [f.names.index(n) for n in names if n in f.names]
    src = np.transpose(src, order) if order else src
    shape = [v.cardinality if v.name in f.names else 1 for v in scope]
    return src.reshape(shape)


def eliminate(f: Factor, variables: Iterable[str], semiring: Semiring = SUM_PRODUCT) -> Factor:
    """Aggregate out a set of variables, per the semiring's aggregate op.

    With sum_product this is marginalization; with max_product it yields
    max-marginals. Log-domain factors support sum_product (via logsumexp)
    and max_product only.
    """
    drop = sorted(set(variables))
    for name in drop:
        if name not in f.names:
            raise ScopeError(f"cannot eliminate {name!r}: not in scope {list(f.names)}")
    if not drop:
        return f
    axes = tuple(f.axis(n) for n in drop)
    keep = [v for v in f.scope if v.name not in drop]
    if f.domain == LOG:
        if semiring.kind == "sum_product":
            table = logsumexp(f.table, axis=axes) if f.table.size else f.table
        elif semiring.kind == "max_product":
            table = np.amax(f.table, axis=axes)
        else:
            raise ValueError(f"semiring {semiring.kind} undefined for log-domain factors")
    else:
        table = semiring.aggregate(f.table, axis=axes)
    return Factor(keep, table, domain=f.domain)


def reduce_factor(f: Factor, evidence: Mapping[str, str]) -> Factor:
    """Slice the factor at the evidence states, dropping those variables."""
    relevant = {k: v for k, v in evidence.items() if k in f.names}
    if not relevant:
        return f
    index: list = [slice(None)] * len(f.scope)
    for name, state in relevant.items():
        var = f.variable(name)
        index[f.axis(name)] = var.index_of(state)
    keep = [v for v in f.scope if v.name not in relevant]
    return Factor(keep, f.table[tuple(index)], domain=f.domain)


def normalize(f: Factor) -> tuple[Factor, float]:
    """Rescale a linear-domain factor to sum to 1; returns (factor, old sum)."""
    if f.domain != LINEAR:
        raise ValueError("normalize expects a linear-domain factor")
    total = float(np.sum(f.table))
    if total <= 0.0:
        raise DegenerateDistributionError("cannot normalize an all-zero factor")
    return Factor(f.scope, f.table / total), total


def divide(f: Factor, g: Factor) -> Factor:
    """Entrywise f / g with g broadcast over f's scope; 0/0 is defined as 0."""
    if f.domain != LINEAR or g.domain != LINEAR:
        raise ValueError("divide expects linear-domain factors")
    if not set(g.names) <= set(f.names):
        raise ScopeError(
            f"divisor scope {list(g.names)} not contained in {list(f.names)}"
        )
    _check_shared_variables(f, g)
    denom = _broadcast_to_scope(g, f.scope)
    denom = np.broadcast_to(denom, f.table.shape)
    zero_denom = denom == 0.0
    if np.any(zero_denom & (f.table != 0.0)):
        raise FactorDivisionError("nonzero entry divided by zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero_denom, 0.0, f.table / np.where(zero_denom, 1.0, denom))
    return Factor(f.scope, out)


def ones_like(scope: Sequence[Variable], domain: str = LINEAR) -> Factor:
    shape = tuple(v.cardinality for v in scope)
    fill = 0.0 if domain == LOG else 1.0
    return Factor(scope, np.full(shape, fill), domain=domain)


def align_to(f: Factor, scope_order: Sequence[str]) -> Factor:
    """Reorder f's axes to the given permutation of its scope names."""
    if sorted(scope_order) != sorted(f.names):
        raise ScopeError(f"{list(scope_order)} is not a permutation of {list(f.names)}")
    order = [f.names.index(n) for n in scope_order]
    scope = [f.scope[i] for i in order]
    return Factor(scope, np.transpose(f.table, order), domain=f.domain)


def assignments(scope: Sequence[Variable]) -> Iterable[dict[str, str]]:
    """All joint assignments to the scope, first variable slowest-varying."""
    if not scope:
        yield {}
        return
    shape = tuple(v.cardinality for v in scope)
    for flat in range(int(np.prod(shape))):
        idx = np.unravel_index(flat, shape)
        yield {v.name: v.states[i] for v, i in zip(scope, idx)}
