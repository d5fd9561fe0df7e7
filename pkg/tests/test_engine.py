import numpy as np
import pytest

from msbn.compile import compile_msbn
from msbn.engine import (ImpossibleEvidence, NumericUnderflow, UnknownVariable,
                         extended_lazy_propagate, extended_ss_propagate,
                         lazy_message, lazy_propagate_jt, query_posterior,
                         query_posterior_at, ss_propagate_jt,
                         subnet_joint_belief)
from msbn.factors import Factor
from msbn.fileformat import parse_msbn
from msbn.graphs import build_junction_tree, max_cliques, moralize, \
    triangulate_local
from msbn.oracle import joint_enumerate, oracle_posterior
from msbn.random_nets import random_bn, random_msbn


def _flat_jt(net):
    cards = {n: v.cardinality for n, v in net.variables.items()}
    g, _ = triangulate_local(moralize(net.union_dag()), keep=set(), cards=cards)
    return build_junction_tree(max_cliques(g)), cards


def _all_cpts(net):
    return [s.cpts[x] for s in net.subnets for x in sorted(s.owned)]


def test_lazy_message_keeps_factorization():
    # [PAPER] a cluster {a,c,d,e,g} with tables B(a,g), B(c,e) and received
    # tables B'(c,e), B(a,d) sends, toward the {d,e,g} sepset, exactly the
    # two tables sum_a B(a,d)B(a,g) and sum_c B(c,e)B'(c,e).
    rng = np.random.default_rng(8)
    b_ag = Factor(("a", "g"), (2, 2), rng.random((2, 2)))
    b_ce = Factor(("c", "e"), (2, 2), rng.random((2, 2)))
    b2_ce = Factor(("c", "e"), (2, 2), rng.random((2, 2)))
    b_ad = Factor(("a", "d"), (2, 2), rng.random((2, 2)))
    out = lazy_message([b_ag, b_ce], [[b2_ce], [b_ad]], {"d", "e", "g"})
    scopes = sorted(tuple(sorted(f.scope)) for f in out)
    assert scopes == [("d", "g"), ("e",)]
    by_scope = {tuple(sorted(f.scope)): f for f in out}
    want_dg = b_ad.multiply(b_ag).marginalize_out({"a"})
    want_e = b_ce.multiply(b2_ce).marginalize_out({"c"})
    assert by_scope[("d", "g")].allclose(want_dg)
    assert by_scope[("e",)].allclose(want_e)


def test_lazy_message_drops_units_keeps_zeros():
    unit = Factor(("a",), (2,), [1.0, 1.0])
    zero = Factor(("a",), (2,), [0.0, 0.0])
    out = lazy_message([unit, zero], [], {"a"})
    assert len(out) == 1 and out[0].allclose(zero)


@pytest.mark.parametrize("seed", range(8))
def test_single_tree_engines_match_oracle(seed):
    net = random_bn(seed)
    jt, cards = _flat_jt(net)
    names = sorted(net.variables)
    ev = {names[0]: 1}
    s1 = ss_propagate_jt(jt, _all_cpts(net), cards, ev)
    s2 = lazy_propagate_jt(jt, _all_cpts(net), cards, ev)
    for q in names:
        want, p_want = oracle_posterior(net, q, ev)
        for sess in (s1, s2):
            got, p_got = sess.query(q)
            assert np.max(np.abs(got - want)) < 1e-9
            assert abs(p_got - p_want) < 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_extended_engines_match_oracle(seed):
    net = random_msbn(seed)
    ljf = compile_msbn(net)
    names = sorted(net.variables)
    ev = {names[-1]: 0}
    for prop in (extended_ss_propagate, extended_lazy_propagate):
        sess = prop(ljf, ev)
        for q in names:
            got, p_got = query_posterior(sess, q)
            want, p_want = oracle_posterior(net, q, ev)
            assert np.max(np.abs(got - want)) < 1e-9
            assert abs(p_got - p_want) < 1e-9


def test_chain_fixture_hand_values(fixtures_dir):
    # [DERIVED] Bayes inversion by hand: P(a=0 | c=1) = 0.132/0.3 = 0.44.
    net = parse_msbn((fixtures_dir / "chain.msbn").read_text()).to_msbn()
    sess = extended_lazy_propagate(compile_msbn(net), {"c": 1})
    got, p_e = query_posterior(sess, "a")
    assert got[0] == pytest.approx(0.44)
    assert p_e == pytest.approx(0.3)
    got_b, _ = query_posterior(sess, "b")
    assert got_b[0] == pytest.approx(1.0 / 6.0)


def test_evidence_placement_equivalence():
    # Entering evidence on a shared variable at any holding subnet gives
    # identical posteriors everywhere.
    net = random_msbn(1)
    ljf = compile_msbn(net)
    shared = [n for n in sorted(net.variables)
              if sum(1 for s in net.subnets if n in s.dag.nodes) > 1]
    v = shared[0]
    holders = [s.id for s in net.subnets if v in s.dag.nodes]
    assert len(holders) > 1
    for prop in (extended_ss_propagate, extended_lazy_propagate):
        base = None
        for h in holders:
            sess = prop(ljf, {v: 1}, evidence_at={v: h})
            vals = np.concatenate(
                [query_posterior(sess, q)[0] for q in sorted(net.variables)])
            if base is None:
                base = vals
            else:
                assert np.max(np.abs(vals - base)) < 1e-12


def test_query_from_any_sharing_subnet_agrees():
    net = random_msbn(4)
    ljf = compile_msbn(net)
    sess = extended_ss_propagate(ljf, {sorted(net.variables)[0]: 0})
    for q in sorted(net.variables):
        holders = [s.id for s in net.subnets if q in s.dag.nodes]
        vals = [query_posterior_at(sess, q, h)[0] for h in holders]
        for v in vals[1:]:
            assert np.max(np.abs(v - vals[0])) < 1e-12


def test_p_evidence_same_from_every_cluster():
    net = random_msbn(6)
    ljf = compile_msbn(net)
    ev = {sorted(net.variables)[2]: 1}
    for prop in (extended_ss_propagate, extended_lazy_propagate):
        sess = prop(ljf, ev)
        for sid, inner in sess.local.items():
            for c in range(len(inner.jt.clusters)):
                total = inner.cluster_belief(c).total()
                assert abs(total - sess.p_evidence) < 1e-12


def test_subnet_joint_belief_equals_global_marginal():
    net = random_msbn(2)
    ljf = compile_msbn(net)
    ev = {sorted(net.variables)[1]: 0}
    sess = extended_ss_propagate(ljf, ev)
    joint = joint_enumerate(net, ev)
    for s in net.subnets:
        belief = subnet_joint_belief(sess, s.id)
        axes = tuple(i for i, n in enumerate(joint.names)
                     if n not in s.dag.nodes)
        want = np.sum(joint.values, axis=axes)
        got = belief.reorder(tuple(sorted(belief.scope))).values
        assert np.max(np.abs(got - want)) < 1e-9


def test_impossible_evidence_raises(fixtures_dir):
    net = parse_msbn((fixtures_dir / "impossible.msbn").read_text()).to_msbn()
    ljf = compile_msbn(net)
    with pytest.raises(ImpossibleEvidence):
        extended_lazy_propagate(ljf, {"b": 0, "c": 1})


def test_unknown_evidence_variable_raises():
    ljf = compile_msbn(random_msbn(0))
    with pytest.raises(UnknownVariable):
        extended_ss_propagate(ljf, {"ghost": 0})


def test_underflow_guard():
    # A subnormal but nonzero message (below 1e-300) must be reported, not
    # silently flushed to an impossible-evidence zero.
    text = ("msbn 1\n[variables]\na 2\nb 2\nc 2\n[subnet S0]\n"
            "nodes: a b c\narc: a b\narc: b c\n"
            "cpt: a : 1e-310 1.0\n"
            "cpt: b | a : 1.0 0.5 0.0 0.5\n"
            "cpt: c | b : 0.5 0.5 0.5 0.5\n[links]\n")
    net = parse_msbn(text).to_msbn()
    ljf = compile_msbn(net)
    with pytest.raises(NumericUnderflow):
        extended_ss_propagate(ljf, {"a": 0})


def test_query_before_unknown_variable():
    sess = extended_ss_propagate(compile_msbn(random_msbn(0)))
    with pytest.raises(UnknownVariable):
        query_posterior(sess, "ghost")
