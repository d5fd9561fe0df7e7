"""Propagation engines: Shafer-Shenoy and lazy, single-tree and extended.

The single-tree engines run on one junction tree.  The extended engines run
on a linked junction forest: inter-subnet messages are computed by the
directed message JFs (one local collect propagation per JT, rooted at the
linkage host) and absorbed through linkages; a final local propagation per
inference JT calibrates every cluster.

No normalization happens mid-propagation; the evidence probability is read
once from any calibrated cluster.
"""

from __future__ import annotations

import numpy as np

from .factors import (DEFAULT_CELL_BUDGET, CellMeter, Factor, indicator,
                      product)
from .graphs import full_propagate

EVIDENCE_ZERO_TOL = 1e-12
UNDERFLOW_LIMIT = 1e-300


class EngineError(Exception):
    pass


class ImpossibleEvidence(EngineError):
    pass


class NotCalibrated(EngineError):
    pass


class UnknownVariable(EngineError):
    pass


class NumericUnderflow(EngineError):
    pass


def _check_underflow(factor):
    if factor.size and 0.0 < float(np.max(factor.values)) < UNDERFLOW_LIMIT:
        raise NumericUnderflow("message over %r underflowed" % (factor.scope,))


def _smallest_cluster(clusters, subset, cards):
    hits = [i for i, c in enumerate(clusters) if subset <= c]
    if not hits:
        return None
    def weight(i):
        w = 1
        for n in clusters[i]:
            w *= cards.get(n, 2)
        return w
    return min(hits, key=lambda i: (weight(i), tuple(sorted(clusters[i]))))


# ---------------------------------------------------------------------------
# Lazy factor-set marginalization
# ---------------------------------------------------------------------------

def lazy_message(local, incoming, sepset, budget=DEFAULT_CELL_BUDGET, meter=None):
    """Union the factor sets and eliminate every variable not in the sepset.

    Each elimination multiplies only the factors mentioning the variable and
    sums it out; the result is a set of factors with scopes inside the
    sepset.  All-ones factors are dropped; zeros are kept.
    """
    sepset = set(sepset)
    live = [f for f in list(local) + [g for fs in incoming for g in fs]
            if not f.scope or not f.is_unit()]
    while True:
        elim = sorted({v for f in live for v in f.scope} - sepset)
        if not elim:
            break
        v = min(elim, key=lambda v: (_elim_fill(live, v, sepset), v))
        touching = [f for f in live if v in f.scope]
        rest = [f for f in live if v not in f.scope]
        prod = product(touching, budget=budget)
        if meter:
            meter.hold(prod.size)
        res = prod.marginalize_out({v}, check=False)
        _check_underflow(res)
        if meter:
            meter.hold(res.size)
            meter.drop(prod.size)
        live = rest + [res]
    return [f for f in live if not (f.scope and f.is_unit())]


def _elim_fill(live, v, sepset):
    """Min-fill score over the factor-graph adjacency of the live set."""
    nbrs = set()
    for f in live:
        if v in f.scope:
            nbrs |= set(f.scope)
    nbrs.discard(v)
    adj = {n: set() for n in nbrs}
    for f in live:
        sc = [n for n in f.scope if n in nbrs]
        for i in range(len(sc)):
            for j in range(i + 1, len(sc)):
                adj[sc[i]].add(sc[j])
                adj[sc[j]].add(sc[i])
    ns = sorted(nbrs)
    fill = 0
    for i in range(len(ns)):
        for j in range(i + 1, len(ns)):
            if ns[j] not in adj[ns[i]]:
                fill += 1
    return fill


def _combine(factors, budget, meter):
    prod = product(factors, budget=budget)
    if meter:
        meter.hold(prod.size)
    return prod


# ---------------------------------------------------------------------------
# Single junction-tree sessions
# ---------------------------------------------------------------------------

class JTSession:
    """Calibrated state of one junction tree."""

    def __init__(self, jt, cards, mode, budget=DEFAULT_CELL_BUDGET, meter=None):
        self.jt = jt
        self.cards = dict(cards)
        self.mode = mode
        self.budget = budget
        self.meter = meter or CellMeter()
        self.evidence = {}
        self.status = "fresh"
        self.p_evidence = None
        self.pots = {}      # cluster -> Factor (ss) or list of Factors (lazy)
        self.messages = {}  # directed (c, d) -> Factor or list

    def cluster_belief(self, c):
        """Unnormalized P(cluster, e) as a single factor."""
        if self.status != "calibrated":
            raise NotCalibrated(self.status)
        nbrs = self.jt.neighbors()
        if self.mode == "ss":
            parts = [self.pots[c]] + [self.messages[(m, c)] for m in nbrs[c]]
        else:
            parts = list(self.pots[c])
            for m in nbrs[c]:
                parts.extend(self.messages[(m, c)])
        return _combine(parts, self.budget, self.meter)

    def query(self, name):
        if self.status != "calibrated":
            raise NotCalibrated(self.status)
        if name not in self.cards:
            raise UnknownVariable(name)
        c = _smallest_cluster(self.jt.clusters, {name}, self.cards)
        belief = self.cluster_belief(c)
        marg = belief.marginalize_onto({name})
        z = marg.total()
        if abs(z) <= EVIDENCE_ZERO_TOL:
            raise ImpossibleEvidence(name)
        return marg.values / z, self.p_evidence


def _assign_to_clusters(jt, factors, cards):
    pots = {c: [] for c in range(len(jt.clusters))}
    for f in factors:
        c = _smallest_cluster(jt.clusters, set(f.scope), cards)
        if c is None:
            raise EngineError("no cluster contains scope %r" % (f.scope,))
        pots[c].append(f)
    return pots

def _propagate_jt(jt, factors, cards, evidence, mode, budget, meter):
    session = JTSession(jt, cards, mode, budget, meter)
    session.evidence = dict(evidence or {})
    for name, state in session.evidence.items():
        if name not in cards:
            raise UnknownVariable(name)
        factors = list(factors) + [indicator(name, cards[name], state)]
    sets = _assign_to_clusters(jt, factors, cards)
    if mode == "ss":
        for c, fs in sets.items():
            pot = product(fs, budget=budget).multiply(
                _ones_over(jt.clusters[c], cards), budget=budget)
            if meter:
                meter.hold(pot.size)
            session.pots[c] = pot
    else:
        session.pots = {c: [f for f in fs if not f.is_unit()] for c, fs in sets.items()}

    nbrs = jt.neighbors()

    def send(c, d, incoming):
        sep = jt.sepset((min(c, d), max(c, d)))
        if mode == "ss":
            prod = _combine([session.pots[c]] + list(incoming.values()),
                            budget, meter)
            msg = prod.marginalize_onto(sep)
            _check_underflow(msg)
            if meter:
                meter.hold(msg.size)
                meter.drop(prod.size)
            return msg
        msg = lazy_message(session.pots[c], list(incoming.values()), sep,
                           budget, meter)
        return msg

    messages, _ = full_propagate(list(range(len(jt.clusters))), nbrs, send)
    session.messages = messages
    session.status = "collected"
    session.status = "calibrated"
    belief0 = session.cluster_belief(0)
    session.p_evidence = belief0.total()
    if abs(session.p_evidence) <= EVIDENCE_ZERO_TOL:
        raise ImpossibleEvidence("P(e) = %g" % session.p_evidence)
    return session


def _ones_over(scope, cards):
    scope = tuple(sorted(scope))
    shape = tuple(cards.get(n, 2) for n in scope)
    return Factor(scope, shape, np.ones(shape), check=False)


def ss_propagate_jt(jt, cpts, cards, evidence=None, budget=DEFAULT_CELL_BUDGET,
                    meter=None):
    """Shafer-Shenoy propagation: per-cluster belief tables."""
    return _propagate_jt(jt, cpts, cards, evidence, "ss", budget, meter)


def lazy_propagate_jt(jt, cpts, cards, evidence=None, budget=DEFAULT_CELL_BUDGET,
                      meter=None):
    """Lazy propagation: per-cluster factor sets, products deferred to queries."""
    return _propagate_jt(jt, cpts, cards, evidence, "lazy", budget, meter)


# ---------------------------------------------------------------------------
# Linked junction forest sessions
# ---------------------------------------------------------------------------

class LJFSession:
    """Evidence, buffers, and calibration state over one compiled LJF."""

    def __init__(self, ljf, mode, budget=DEFAULT_CELL_BUDGET, meter=None):
        self.ljf = ljf
        self.mode = mode
        self.budget = budget
        self.meter = meter or CellMeter()
        self.cards = {n: v.cardinality for n, v in ljf.msbn.variables.items()}
        self.evidence = {}
        self.status = "fresh"
        self.p_evidence = None
        # (struct key, jt index, cluster index) -> list of extra factors
        self.extra = {}
        # linkage index -> submessage (Factor or factor list)
        self.linkage_msgs = {}
        # subnet id -> calibrated JTSession for its inference JT
        self.local = {}

    # -- construction helpers ------------------------------------------------

    def _site_factors(self, key, t, c):
        """CPTs assigned to one cluster of one structure, plus extras."""
        msbn = self.ljf.msbn
        sid = key[1]
        subnet = msbn.subnet(sid)
        out = []
        for x, site in self.ljf.cpt_sites[key].items():
            if site == (t, c):
                out.append(subnet.cpts[x])
        out.extend(self.extra.get((key, t, c), ()))
        return out

    def _linkage_factors_into(self, key, t, c):
        out = []
        for li in self._links_into(key):
            l = self.ljf.linkages[li]
            if (l.dest_jt, l.dest_cluster) == (t, c) and li in self.linkage_msgs:
                msg = self.linkage_msgs[li]
                out.extend(msg if isinstance(msg, list) else [msg])
        return out

    def _links_into(self, key):
        return [i for i, l in enumerate(self.ljf.linkages) if l.dest_struct == key]

    def _cluster_inputs(self, key, t, c):
        return self._site_factors(key, t, c) + self._linkage_factors_into(key, t, c)


def enter_evidence(session, evidence, at_subnet=None):
    """Attach indicator factors in every structure of the holding subnet.

    By default the owner subnet of each variable holds the indicator;
    `at_subnet` overrides the placement (a map variable -> subnet id).
    """
    if session.status != "fresh":
        raise EngineError("evidence must be entered before propagation")
    msbn = session.ljf.msbn
    for name, state in evidence.items():
        if name not in msbn.variables:
            raise UnknownVariable(name)
        sid = (at_subnet or {}).get(name) or msbn.owner_of(name)
        if name not in msbn.subnet(sid).nodes:
            raise UnknownVariable("%s is not in subnet %s" % (name, sid))
        ind = indicator(name, session.cards[name], state)
        for key in session.ljf.structures_of(sid):
            best = None
            for t, jt in enumerate(session.ljf.jts_of(key)):
                for c, cluster in enumerate(jt.clusters):
                    if name in cluster:
                        w = 1
                        for n in cluster:
                            w *= session.cards.get(n, 2)
                        k = (w, tuple(sorted(cluster)), t, c)
                        if best is None or k < best[0]:
                            best = (k, t, c)
            session.extra.setdefault((key, best[1], best[2]), []).append(ind)
        session.evidence[name] = state
    return session


def _collect_to_root(session, key, t, jt, root):
    """Local collect propagation toward one cluster; returns its belief."""
    nbrs = jt.neighbors()
    msgs = {}

    def visit(c, parent):
        incoming = []
        for m in nbrs[c]:
            if m != parent:
                visit(m, c)
                incoming.append(msgs[(m, c)])
        if parent is None:
            return
        sep = jt.sepset((min(c, parent), max(c, parent)))
        inputs = session._cluster_inputs(key, t, c)
        if session.mode == "ss":
            prod = _combine(inputs + incoming, session.budget, session.meter)
            msg = prod.marginalize_onto(sep)
            _check_underflow(msg)
            session.meter.hold(msg.size)
            session.meter.drop(prod.size)
            msgs[(c, parent)] = msg
        else:
            msgs[(c, parent)] = lazy_message(
                inputs, [m if isinstance(m, list) else [m] for m in incoming],
                sep, session.budget, session.meter)

    visit(root, None)
    inputs = session._cluster_inputs(key, t, root)
    incoming = [msgs[(m, root)] for m in nbrs[root]]
    if session.mode == "ss":
        return _combine(inputs + incoming, session.budget, session.meter)
    out = list(inputs)
    for m in incoming:
        out.extend(m)
    return out


def _send_hyper_message(session, i, j):
    """Compute every i -> j submessage from the message JF and deliver it."""
    ljf = session.ljf
    jf = ljf.message_jfs[(i, j)]
    key = ("M", i, j)
    for t, jt in enumerate(jf.jts):
        host = jf.hosts[t]
        belief = _collect_to_root(session, key, t, jt, host)
        outgoing = [li for li, l in enumerate(ljf.linkages)
                    if l.source_struct == key and l.source_jt == t]
        for li in outgoing:
            label = ljf.linkages[li].label
            if li in session.linkage_msgs:
                raise EngineError("linkage written twice in one session")
            if session.mode == "ss":
                msg = belief.marginalize_onto(label)
                _check_underflow(msg)
                session.meter.hold(msg.size)
                session.linkage_msgs[li] = msg
            else:
                session.linkage_msgs[li] = lazy_message(
                    belief, [], label, session.budget, session.meter)
        if session.mode == "ss":
            session.meter.drop(belief.size)


def _propagate_ljf(ljf, evidence, mode, budget, meter, evidence_at=None):
    session = LJFSession(ljf, mode, budget, meter)
    if evidence:
        enter_evidence(session, evidence, at_subnet=evidence_at)
    if mode == "ss":
        _hold_initial_tables(session)

    nbrs = ljf.msbn.neighbors()

    def send(i, j, incoming):
        _send_hyper_message(session, i, j)
        return "sent"

    full_propagate(list(nbrs), nbrs, send)
    session.status = "collected"

    for s in ljf.msbn.subnets:
        key = ("T", s.id)
        jt = ljf.inference_jts[s.id]
        inner = JTSession(jt, session.cards, mode, budget, session.meter)

        def send_local(c, d, incoming, key=key, jt=jt):
            sep = jt.sepset((min(c, d), max(c, d)))
            inputs = session._cluster_inputs(key, 0, c)
            if mode == "ss":
                prod = _combine(inputs + list(incoming.values()),
                                budget, session.meter)
                msg = prod.marginalize_onto(sep)
                _check_underflow(msg)
                session.meter.hold(msg.size)
                session.meter.drop(prod.size)
                return msg
            return lazy_message(inputs, list(incoming.values()), sep,
                                budget, session.meter)

        messages, _ = full_propagate(
            list(range(len(jt.clusters))), jt.neighbors(), send_local)
        inner.messages = messages
        inner.pots = {c: (_combine(session._cluster_inputs(key, 0, c),
                                   budget, session.meter)
                          if mode == "ss"
                          else session._cluster_inputs(key, 0, c))
                      for c in range(len(jt.clusters))}
        inner.evidence = session.evidence
        inner.status = "calibrated"
        session.local[s.id] = inner

    first = ljf.msbn.subnets[0].id
    session.p_evidence = session.local[first].cluster_belief(0).total()
    for sid, inner in session.local.items():
        inner.p_evidence = session.p_evidence
    session.status = "calibrated"
    if abs(session.p_evidence) <= EVIDENCE_ZERO_TOL:
        raise ImpossibleEvidence("P(e) = %g" % session.p_evidence)
    return session


def _hold_initial_tables(session):
    """S-S materializes one belief table per cluster of every structure."""
    ljf = session.ljf
    for s in ljf.msbn.subnets:
        for key in ljf.structures_of(s.id):
            for t, jt in enumerate(ljf.jts_of(key)):
                for c, cluster in enumerate(jt.clusters):
                    w = 1
                    for n in cluster:
                        w *= session.cards.get(n, 2)
                    session.meter.hold(w)


def extended_ss_propagate(ljf, evidence=None, budget=DEFAULT_CELL_BUDGET,
                          meter=None, evidence_at=None):
    """Extended Shafer-Shenoy propagation over a linked junction forest."""
    return _propagate_ljf(ljf, evidence, "ss", budget, meter, evidence_at)


def extended_lazy_propagate(ljf, evidence=None, budget=DEFAULT_CELL_BUDGET,
                            meter=None, evidence_at=None):
    """Extended lazy propagation: factor sets on every sepset and linkage."""
    return _propagate_ljf(ljf, evidence, "lazy", budget, meter, evidence_at)


def query_posterior(session, name):
    """Normalized P(name | e) plus P(e), from a calibrated session."""
    if isinstance(session, JTSession):
        return session.query(name)
    if session.status != "calibrated":
        raise NotCalibrated(session.status)
    msbn = session.ljf.msbn
    if name not in msbn.variables:
        raise UnknownVariable(name)
    sid = msbn.owner_of(name)
    return session.local[sid].query(name)


def query_posterior_at(session, name, sid):
    """Posterior read from a specific subnet's inference JT (consistency checks)."""
    return session.local[sid].query(name)


def subnet_joint_belief(session, sid):
    """B over N_i: the subnet's own tables times its incoming submessages.

    Internal sepset messages are deliberately excluded so every factor of
    the joint system belief is counted exactly once.
    """
    ljf = session.ljf
    key = ("T", sid)
    jt = ljf.inference_jts[sid]
    parts = []
    for c in range(len(jt.clusters)):
        parts.extend(session._cluster_inputs(key, 0, c))
    belief = product(parts, budget=None)
    missing = ljf.msbn.subnet(sid).nodes - set(belief.scope)
    if missing:
        belief = belief.multiply(_ones_over(missing, session.cards), budget=None)
    return belief
