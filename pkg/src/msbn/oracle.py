"""Brute-force ground truth by full joint enumeration.

Deliberately shares no code with the propagation engines: tables are built
with raw numpy broadcasting over the full state space, so any agreement
between an engine and this module is meaningful.
"""

from __future__ import annotations

import numpy as np

DEFAULT_STATE_BOUND = 2 ** 24


class OracleError(Exception):
    pass


class StateSpaceTooLarge(OracleError):
    pass


class ImpossibleEvidence(OracleError):
    pass


class JointTable:
    """Full joint over all variables, in lexicographic variable order."""

    def __init__(self, names, cards, values):
        self.names = tuple(names)
        self.cards = tuple(cards)
        self.values = values

    def total(self):
        # numpy's pairwise summation keeps reordering error below 1e-12
        # at desk scale.
        return float(np.sum(self.values))

    def marginal(self, name):
        axis = self.names.index(name)
        axes = tuple(i for i in range(len(self.names)) if i != axis)
        return np.sum(self.values, axis=axes)


def joint_enumerate(msbn, evidence=None, bound=DEFAULT_STATE_BOUND):
    """Materialize the product of all owned CPTs, zeroed against evidence."""
    names = sorted(msbn.variables)
    cards = [msbn.cardinality(n) for n in names]
    size = 1
    for c in cards:
        size *= c
    if size > bound:
        raise StateSpaceTooLarge("%d cells exceeds bound %d" % (size, bound))
    axis = {n: i for i, n in enumerate(names)}
    table = np.ones(cards)
    for subnet in msbn.subnets:
        for x in sorted(subnet.owned):
            f = subnet.cpts[x]
            shape = [1] * len(names)
            for n, c in zip(f.scope, f.cards):
                shape[axis[n]] = c
            order = sorted(range(len(f.scope)), key=lambda i: axis[f.scope[i]])
            table = table * np.transpose(f.values, order).reshape(shape)
    for n, state in (evidence or {}).items():
        mask_shape = [1] * len(names)
        mask_shape[axis[n]] = cards[axis[n]]
        mask = np.zeros(cards[axis[n]])
        mask[state] = 1.0
        table = table * mask.reshape(mask_shape)
    return JointTable(names, cards, table)


def oracle_posterior(msbn, name, evidence=None, bound=DEFAULT_STATE_BOUND):
    """Exact P(name | evidence) and P(evidence) by summation."""
    joint = joint_enumerate(msbn, evidence, bound)
    if name not in joint.names:
        raise OracleError("unknown variable %r" % name)
    p_e = joint.total()
    if p_e <= 0.0:
        raise ImpossibleEvidence("P(e) = %g" % p_e)
    return joint.marginal(name) / p_e, p_e
