"""Acceptance suite: one test and one printed pass/fail line per criterion.

All tolerances are pinned here.  Fixture seeds are committed; every random
draw is derived from them, so the suite is reproducible run to run.
"""

import random
import time

import numpy as np

from msbn.compile import compile_msbn, storage_stats
from msbn.engine import (extended_lazy_propagate, extended_ss_propagate,
                         lazy_propagate_jt, query_posterior,
                         query_posterior_at, ss_propagate_jt,
                         subnet_joint_belief)
from msbn.factors import CellMeter
from msbn.fileformat import (MsbnParseError, document_from_msbn, parse_msbn,
                             serialize_msbn)
from msbn.graphs import (build_junction_tree, is_chordal, max_cliques,
                         moralize, separator_fills_oracle, triangulate_local)
from msbn.oracle import joint_enumerate
from msbn.random_nets import random_bn, random_msbn, random_sectioned_graph

ORACLE_TOL = 1e-9
CROSS_ENGINE_TOL = 1e-12
JOINT_BELIEF_TOL = 1e-9
CONSISTENCY_TOL = 1e-12
ORACLE_SUITE_SECONDS = 60.0

N_ORACLE_FIXTURES = 100
N_COMPILE_FIXTURES = 200
N_JOINT_BELIEF_FIXTURES = 20
N_SECTIONED_GRAPHS = 50
N_ORDERS_PER_GRAPH = 10
N_FUZZ_INPUTS = 10 ** 5
N_ROUND_TRIP_DOCS = 100

_cache = {}


def _net(seed):
    if ("net", seed) not in _cache:
        _cache[("net", seed)] = random_msbn(seed)
    return _cache[("net", seed)]


def _ljf(seed):
    if ("ljf", seed) not in _cache:
        _cache[("ljf", seed)] = compile_msbn(_net(seed))
    return _cache[("ljf", seed)]


def _scenarios(net, seed):
    """Three evidence scenarios: none, one variable, three variables."""
    rng = np.random.default_rng(10_000 + seed)
    names = sorted(net.variables)
    out = [{}]
    for k in (1, 3):
        picks = rng.choice(len(names), size=min(k, len(names)), replace=False)
        out.append({names[int(i)]: int(rng.integers(0, net.cardinality(names[int(i)])))
                    for i in picks})
    return out


def _oracle_posteriors(net, evidence):
    joint = joint_enumerate(net, evidence)
    p_e = joint.total()
    return {n: joint.marginal(n) / p_e for n in joint.names}, p_e


REPORT_LINES = []


def _report(n, ok, detail):
    line = "criterion %d: %s - %s" % (n, "PASS" if ok else "FAIL", detail)
    REPORT_LINES.append(line)
    print(line)


def test_criterion_1_oracle_equivalence():
    t0 = time.time()
    failures = []
    for seed in range(N_ORACLE_FIXTURES):
        net = _net(seed)
        ljf = _ljf(seed)
        for evidence in _scenarios(net, seed):
            want, p_want = _oracle_posteriors(net, evidence)
            for label, prop in (("ext-ss", extended_ss_propagate),
                                ("ext-lazy", extended_lazy_propagate)):
                sess = prop(ljf, evidence)
                for q in sorted(net.variables):
                    got, p_got = query_posterior(sess, q)
                    err = float(np.max(np.abs(got - want[q])))
                    if err > ORACLE_TOL or abs(p_got - p_want) > ORACLE_TOL:
                        failures.append((seed, label, q, err))
    elapsed = time.time() - t0
    ok = not failures and elapsed <= ORACLE_SUITE_SECONDS
    _report(1, ok, "%d fixtures x 3 scenarios x 2 engines vs oracle @ %g; "
            "%d mismatches; %.1fs" % (N_ORACLE_FIXTURES, ORACLE_TOL,
                                      len(failures), elapsed))
    assert not failures, failures[:5]
    assert elapsed <= ORACLE_SUITE_SECONDS


def test_criterion_2_engine_cross_equivalence():
    failures = []
    for seed in range(N_ORACLE_FIXTURES):
        net = _net(seed)
        ljf = _ljf(seed)
        for evidence in _scenarios(net, seed):
            s1 = extended_ss_propagate(ljf, evidence)
            s2 = extended_lazy_propagate(ljf, evidence)
            for q in sorted(net.variables):
                a, _ = query_posterior(s1, q)
                b, _ = query_posterior(s2, q)
                if float(np.max(np.abs(a - b))) > CROSS_ENGINE_TOL:
                    failures.append((seed, q))
    # Single-subnet fixtures: all four engines.
    for seed in range(20):
        net = random_bn(seed)
        cards = {n: v.cardinality for n, v in net.variables.items()}
        cpts = [s.cpts[x] for s in net.subnets for x in sorted(s.owned)]
        g, _ = triangulate_local(moralize(net.union_dag()), keep=set(),
                                 cards=cards)
        jt = build_junction_tree(max_cliques(g))
        ljf = compile_msbn(net)
        ev = _scenarios(net, seed)[1]
        sessions = [ss_propagate_jt(jt, cpts, cards, ev),
                    lazy_propagate_jt(jt, cpts, cards, ev),
                    extended_ss_propagate(ljf, ev),
                    extended_lazy_propagate(ljf, ev)]
        for q in sorted(net.variables):
            vals = []
            for sess in sessions:
                got, _ = (sess.query(q) if hasattr(sess, "jt")
                          else query_posterior(sess, q))
                vals.append(got)
            for v in vals[1:]:
                if float(np.max(np.abs(v - vals[0]))) > CROSS_ENGINE_TOL:
                    failures.append(("bn", seed, q))
    _report(2, not failures,
            "ext-ss vs ext-lazy @ %g on %d fixtures; 4 engines on 20 "
            "single-subnet fixtures; %d mismatches"
            % (CROSS_ENGINE_TOL, N_ORACLE_FIXTURES, len(failures)))
    assert not failures, failures[:5]


def test_criterion_3_subnet_joint_belief_identity():
    # The calibrated belief of each inference JT over its subnet's variables
    # must equal the global joint (all CPTs times evidence) marginalized
    # onto those variables.
    fixtures = []
    seed = 0
    while len(fixtures) < N_JOINT_BELIEF_FIXTURES:
        net = random_msbn(seed, n_vars=8 + (seed % 3))
        if len(net.variables) <= 12:
            fixtures.append((seed, net))
        seed += 1
    failures = []
    for seed, net in fixtures:
        ljf = compile_msbn(net)
        evidence = _scenarios(net, seed)[1]
        sess = extended_ss_propagate(ljf, evidence)
        joint = joint_enumerate(net, evidence)
        for s in net.subnets:
            belief = subnet_joint_belief(sess, s.id)
            axes = tuple(i for i, n in enumerate(joint.names)
                         if n not in s.dag.nodes)
            want = np.sum(joint.values, axis=axes)
            got = belief.reorder(tuple(sorted(belief.scope))).values
            err = float(np.max(np.abs(got - want)))
            if err > JOINT_BELIEF_TOL:
                failures.append((seed, s.id, err))
    _report(3, not failures,
            "calibrated subnet beliefs vs materialized joint marginals @ %g "
            "on %d fixtures (<= 12 binary variables); %d mismatches"
            % (JOINT_BELIEF_TOL, len(fixtures), len(failures)))
    assert not failures, failures[:5]


def test_criterion_4_fillin_message_determinism():
    failures = []
    for seed in range(N_SECTIONED_GRAPHS):
        node_sets, links, union = random_sectioned_graph(seed)
        rng = random.Random(20_000 + seed)
        for a, b in links:
            sep = node_sets[a] & node_sets[b]
            for side_nodes in (node_sets[a], node_sets[b]):
                side = union.subgraph(side_nodes)
                oracle = separator_fills_oracle(side, sep)
                elim = sorted(side.nodes - sep)
                for _ in range(N_ORDERS_PER_GRAPH):
                    order = elim[:]
                    rng.shuffle(order)
                    _, got = triangulate_local(side, keep=sep, order=order)
                    if got != oracle:
                        failures.append((seed, a, b, order))
    _report(4, not failures,
            "%d sectioned graphs x %d random elimination orders per side, "
            "exact set match vs reachability oracle; %d mismatches"
            % (N_SECTIONED_GRAPHS, N_ORDERS_PER_GRAPH, len(failures)))
    assert not failures, failures[:3]


def test_criterion_5_structural_suite():
    failures = []
    for seed in range(N_COMPILE_FIXTURES):
        net = _net(seed)
        try:
            ljf = _ljf(seed)
        except Exception as e:  # any compile crash is a structural failure
            failures.append((seed, repr(e)))
            continue
        ok = True
        for g in ljf.g_star.values():
            ok &= is_chordal(g)[0]
        for (i, j), g in ljf.g_dir.items():
            ok &= is_chordal(g.subgraph(net.separator(i, j)))[0]
        for jt in ljf.inference_jts.values():
            ok &= jt.check_running_intersection()
        for jf in ljf.message_jfs.values():
            for jt in jf.jts:
                ok &= jt.check_running_intersection()
        for s in net.subnets:
            for key in ljf.structures_of(s.id):
                ok &= set(ljf.cpt_sites[key]) == set(s.owned)
        for l in ljf.linkages:
            src = ljf.message_jfs[(l.source_struct[1], l.source_struct[2])]
            ok &= l.label <= src.jts[l.source_jt].clusters[l.source_cluster]
            ok &= l.label <= ljf.jts_of(l.dest_struct)[l.dest_jt].clusters[l.dest_cluster]
        if not ok:
            failures.append((seed, "structural check"))
    _report(5, not failures,
            "chordality, running intersection, total CPT assignment, covered "
            "linkages over %d compilations; %d failures"
            % (N_COMPILE_FIXTURES, len(failures)))
    assert not failures, failures[:5]


def test_criterion_6_space_claims():
    order_failures = []
    for seed in range(N_COMPILE_FIXTURES):
        st = storage_stats(_net(seed), _ljf(seed))
        if not (st.lazy_parameters <= st.full_cpt_values
                <= st.hugin_table_cells):
            order_failures.append((seed, st))
    wins = 0
    ratios = []
    for seed in range(N_ORACLE_FIXTURES):
        ljf = _ljf(seed)
        evidence = _scenarios(_net(seed), seed)[1]
        m_ss, m_lazy = CellMeter(), CellMeter()
        extended_ss_propagate(ljf, evidence, meter=m_ss)
        extended_lazy_propagate(ljf, evidence, meter=m_lazy)
        if m_lazy.peak <= m_ss.peak:
            wins += 1
        ratios.append(m_lazy.peak / m_ss.peak)
    ok = not order_failures and wins >= 95
    _report(6, ok,
            "lazy<=full<=hugin on %d/%d fixtures; lazy peak cells <= ss peak "
            "on %d/%d runs; mean peak ratio %.3f (max %.3f)"
            % (N_COMPILE_FIXTURES - len(order_failures), N_COMPILE_FIXTURES,
               wins, N_ORACLE_FIXTURES, float(np.mean(ratios)), max(ratios)))
    assert not order_failures, order_failures[:5]
    assert wins >= 95


def test_criterion_7_consistency():
    failures = []
    for seed in range(N_ORACLE_FIXTURES):
        net = _net(seed)
        ljf = _ljf(seed)
        evidence = _scenarios(net, seed)[2]
        for prop in (extended_ss_propagate, extended_lazy_propagate):
            sess = prop(ljf, evidence)
            for q in sorted(net.variables):
                holders = [s.id for s in net.subnets if q in s.dag.nodes]
                vals = [query_posterior_at(sess, q, h)[0] for h in holders]
                for v in vals[1:]:
                    if float(np.max(np.abs(v - vals[0]))) > CONSISTENCY_TOL:
                        failures.append((seed, q, "posterior"))
            for sid, inner in sess.local.items():
                for c in range(len(inner.jt.clusters)):
                    total = inner.cluster_belief(c).total()
                    if abs(total - sess.p_evidence) > CONSISTENCY_TOL:
                        failures.append((seed, sid, c, "p_evidence"))
    _report(7, not failures,
            "shared-variable posteriors and per-cluster P(e) @ %g across %d "
            "fixtures x both engines; %d mismatches"
            % (CONSISTENCY_TOL, N_ORACLE_FIXTURES, len(failures)))
    assert not failures, failures[:5]


def _fuzz_corpus(n):
    rng = random.Random(424242)
    valid = serialize_msbn(document_from_msbn(random_msbn(7, n_subnets=4)))
    lines = valid.splitlines()
    for _ in range(n):
        kind = rng.randrange(3)
        if kind == 0:
            yield bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        elif kind == 1:
            yield "".join(rng.choice(" \t\n[]:|#abcdefgh0123456789.msbn-")
                          for _ in range(rng.randrange(0, 120))).encode()
        else:
            k = rng.randrange(1, 12)
            yield ("\n".join(rng.choice(lines) for _ in range(k))).encode()


def test_criterion_8_parser_robustness():
    crashes = 0
    for blob in _fuzz_corpus(N_FUZZ_INPUTS):
        try:
            parse_msbn(blob)
        except MsbnParseError:
            pass
        except Exception:
            crashes += 1
    round_trip_failures = 0
    for seed in range(N_ROUND_TRIP_DOCS):
        doc = document_from_msbn(random_msbn(seed))
        text = serialize_msbn(doc)
        doc2 = parse_msbn(text)
        if doc.canonical() != doc2.canonical() or serialize_msbn(doc2) != text:
            round_trip_failures += 1
    ok = crashes == 0 and round_trip_failures == 0
    _report(8, ok, "%d fuzz inputs, %d crashes; %d round-trip documents, "
            "%d failures" % (N_FUZZ_INPUTS, crashes, N_ROUND_TRIP_DOCS,
                             round_trip_failures))
    assert crashes == 0
    assert round_trip_failures == 0
