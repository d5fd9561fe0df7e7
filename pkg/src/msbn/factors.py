"""Discrete factor tables: the unit of all belief arithmetic.

A factor is a nonnegative table over an ordered scope of named discrete
variables.  Values are stored as a numpy array whose axes follow the scope
order, so the C-order flattening is row-major with the first scope variable
as the most significant digit.
"""

from __future__ import annotations

import numpy as np

DEFAULT_CELL_BUDGET = 2 ** 22


class FactorError(Exception):
    pass


class ScopeOverflow(FactorError):
    """A factor product would exceed the configured cell budget."""


class VariableAbsent(FactorError):
    """A named variable is not in the factor's scope."""


class Factor:
    """Nonnegative table over an ordered scope of discrete variables."""

    __slots__ = ("scope", "cards", "values")

    def __init__(self, scope, cards, values, check=True):
        self.scope = tuple(scope)
        self.cards = tuple(int(c) for c in cards)
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.cards:
            arr = arr.reshape(self.cards)
        self.values = arr
        if check:
            if len(set(self.scope)) != len(self.scope):
                raise FactorError("duplicate variable in scope: %r" % (self.scope,))
            if len(self.scope) != len(self.cards):
                raise FactorError("scope/cardinality length mismatch")
            if np.any(arr < 0):
                raise FactorError("negative value in factor over %r" % (self.scope,))

    @property
    def size(self):
        return self.values.size

    def card_of(self, name):
        return self.cards[self.scope.index(name)]

    def is_unit(self):
        return bool(np.all(self.values == 1.0))

    def total(self):
        return float(np.sum(self.values))

    def __repr__(self):
        return "Factor(%s)" % ", ".join(self.scope)

    # -- arithmetic ---------------------------------------------------------

    def multiply(self, other, budget=DEFAULT_CELL_BUDGET):
        """Pointwise product; result scope is the name-sorted union."""
        scope = tuple(sorted(set(self.scope) | set(other.scope)))
        cards = {}
        for f in (self, other):
            for n, c in zip(f.scope, f.cards):
                if cards.setdefault(n, c) != c:
                    raise FactorError("cardinality mismatch for %r" % n)
        shape = tuple(cards[n] for n in scope)
        ncells = int(np.prod(shape)) if shape else 1
        if budget is not None and ncells > budget:
            raise ScopeOverflow(
                "product over %d variables needs %d cells (budget %d)"
                % (len(scope), ncells, budget)
            )
        a = _expand(self, scope)
        b = _expand(other, scope)
        return Factor(scope, shape, a * b, check=False)

    def marginalize_out(self, names, check=True):
        """Sum the given variables out of the table."""
        names = set(names)
        if check:
            missing = names - set(self.scope)
            if missing:
                raise VariableAbsent(sorted(missing))
        if not names:
            return self
        axes = tuple(i for i, n in enumerate(self.scope) if n in names)
        scope = tuple(n for n in self.scope if n not in names)
        cards = tuple(c for n, c in zip(self.scope, self.cards) if n not in names)
        return Factor(scope, cards, self.values.sum(axis=axes), check=False)

    def marginalize_onto(self, keep):
        return self.marginalize_out(set(self.scope) - set(keep), check=False)

    def normalized(self):
        z = self.total()
        if z <= 0:
            raise FactorError("cannot normalize a zero factor")
        return Factor(self.scope, self.cards, self.values / z, check=False)

    def reorder(self, scope):
        """Same table with axes permuted to the given scope order."""
        if tuple(scope) == self.scope:
            return self
        perm = tuple(self.scope.index(n) for n in scope)
        cards = tuple(self.cards[i] for i in perm)
        return Factor(scope, cards, np.transpose(self.values, perm), check=False)

    def allclose(self, other, atol=1e-12):
        a = self.reorder(tuple(sorted(self.scope)))
        b = other.reorder(tuple(sorted(other.scope)))
        return a.scope == b.scope and np.allclose(a.values, b.values, rtol=0, atol=atol)


def _expand(factor, scope):
    """View of the factor's array broadcastable over the given scope order."""
    idx = {n: i for i, n in enumerate(scope)}
    perm = sorted(range(len(factor.scope)), key=lambda i: idx[factor.scope[i]])
    arr = np.transpose(factor.values, perm)
    shape = [1] * len(scope)
    for i in perm:
        shape[idx[factor.scope[i]]] = factor.cards[i]
    return arr.reshape(shape)


def unit_factor():
    return Factor((), (), np.array(1.0), check=False)


def indicator(name, card, state):
    """Evidence factor: 1 at the observed state, 0 elsewhere."""
    v = np.zeros(card)
    v[state] = 1.0
    return Factor((name,), (card,), v, check=False)


def product(factors, budget=DEFAULT_CELL_BUDGET):
    """Fold a collection of factors into a single table."""
    result = unit_factor()
    for f in factors:
        result = result.multiply(f, budget=budget)
    return result


class CellMeter:
    """Tracks the live and peak factor-cell footprint of a propagation."""

    def __init__(self):
        self.current = 0
        self.peak = 0

    def hold(self, n):
        self.current += n
        if self.current > self.peak:
            self.peak = self.current

    def drop(self, n):
        self.current -= n
