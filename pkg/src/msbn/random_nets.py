"""Seeded random fixtures: MSBNs, single Bayesian networks, and sectioned
undirected graphs.

Every generator is deterministic in its seed; the test and acceptance
suites commit their seeds, so runs are reproducible.
"""

from __future__ import annotations

import numpy as np

from .factors import Factor
from .graphs import LabeledGraph
from .model import Dag, Subnet, Variable, make_msbn


def _random_tree(rng, n):
    """Edges of a random labeled tree on 0..n-1."""
    return [(int(rng.integers(0, i)), i) for i in range(1, n)]


def _occurrence_star(rng, tree_nbrs, share_p):
    """A variable's occurrence set: one subnet, or a star around a center.

    Keeping occurrence sets star-shaped guarantees that choosing the
    variable's parents inside the center subnet satisfies the d-sepset
    condition on every hyperlink it spans.
    """
    n = len(tree_nbrs)
    center = int(rng.integers(0, n))
    occ = {center}
    if rng.random() < share_p and tree_nbrs[center]:
        extra = 1 if rng.random() < 0.8 else min(2, len(tree_nbrs[center]))
        picks = rng.choice(len(tree_nbrs[center]), size=extra, replace=False)
        occ |= {tree_nbrs[center][int(k)] for k in picks}
    return center, occ


def _random_cpt(rng, name, card, parents, cards):
    shape = [card] + [cards[p] for p in parents]
    cols = rng.gamma(1.0, 1.0, size=shape) + 1e-3
    cols = cols / cols.sum(axis=0, keepdims=True)
    return Factor([name] + list(parents), shape, cols)


def random_msbn(seed, n_subnets=None, n_vars=None, card=2, share_p=0.45,
                parent_probs=(0.15, 0.3, 0.35, 0.2)):
    """A valid random hypertree MSBN with binary variables by default."""
    rng = np.random.default_rng(seed)
    if n_subnets is None:
        n_subnets = int(rng.integers(3, 6))
    if n_vars is None:
        n_vars = int(rng.integers(8, 15))
    tree = _random_tree(rng, n_subnets)
    tree_nbrs = {i: [] for i in range(n_subnets)}
    for a, b in tree:
        tree_nbrs[a].append(b)
        tree_nbrs[b].append(a)

    names = ["v%02d" % i for i in range(n_vars)]
    cards = {n: card for n in names}
    center = {}
    occ = {}
    for i, name in enumerate(names):
        if i < n_subnets:
            # Seed one variable per subnet so no subnet is empty.
            c = i
            o = {c}
            if rng.random() < share_p and tree_nbrs[c]:
                o.add(tree_nbrs[c][int(rng.integers(0, len(tree_nbrs[c])))])
        else:
            c, o = _occurrence_star(rng, tree_nbrs, share_p)
        center[name] = c
        occ[name] = o

    # Every hyperlink needs a nonempty separator: widen one private variable
    # of an endpoint (keeps the occurrence set a star), or mint a new one.
    members = {i: {n for n in names if i in occ[n]} for i in range(n_subnets)}
    for a, b in tree:
        if not members[a] & members[b]:
            pool = sorted(n for n in names
                          if len(occ[n]) == 1 and center[n] in (a, b))
            if pool:
                pick = pool[int(rng.integers(0, len(pool)))]
            else:
                pick = "v%02d" % len(names)
                names.append(pick)
                cards[pick] = card
                occ[pick] = {a}
                center[pick] = a
            occ[pick] |= {a, b}
            members[a].add(pick)
            members[b].add(pick)

    members = {i: sorted(n for n in names if i in occ[n]) for i in range(n_subnets)}

    # Parents: drawn from earlier variables living in the center subnet.
    parents = {}
    probs = np.asarray(parent_probs) / np.sum(parent_probs)
    for i, name in enumerate(names):
        pool = [m for m in members[center[name]] if m < name]
        k = min(len(pool), int(rng.choice(len(probs), p=probs)))
        if k:
            picks = rng.choice(len(pool), size=k, replace=False)
            parents[name] = tuple(pool[int(j)] for j in sorted(picks))
        else:
            parents[name] = ()

    subnets = []
    for i in range(n_subnets):
        nodes = set(members[i])
        arcs = [(p, c) for c in members[i] for p in parents[c] if p in nodes]
        dag = Dag.from_arcs(nodes, arcs)
        owned = frozenset(n for n in members[i] if center[n] == i)
        cpts = {n: _random_cpt(rng, n, cards[n], parents[n], cards)
                for n in sorted(owned)}
        subnets.append(Subnet("S%d" % i, dag, cpts, owned))

    variables = [Variable(n, cards[n]) for n in names]
    links = [("S%d" % a, "S%d" % b) for a, b in tree]
    return make_msbn(variables, subnets, links)


def random_bn(seed, n_vars=None, card=2, parent_probs=(0.2, 0.35, 0.3, 0.15)):
    """A single-subnet MSBN, i.e. an ordinary Bayesian network."""
    return random_msbn(seed, n_subnets=1, n_vars=n_vars, card=card,
                       share_p=0.0, parent_probs=parent_probs)


def random_sectioned_graph(seed, n_sections=None, n_nodes=None, edge_p=0.45):
    """A random undirected graph sectioned over a hypertree.

    Returns (node_sets, links, union_graph); per-section subgraphs are the
    union graph induced on each node set, so separators span identical
    subgraphs by construction.
    """
    rng = np.random.default_rng(seed)
    if n_sections is None:
        n_sections = int(rng.integers(2, 5))
    if n_nodes is None:
        n_nodes = int(rng.integers(6, 13))
    tree = _random_tree(rng, n_sections)
    tree_nbrs = {i: [] for i in range(n_sections)}
    for a, b in tree:
        tree_nbrs[a].append(b)
        tree_nbrs[b].append(a)
    names = ["n%02d" % i for i in range(n_nodes)]
    occ = {}
    for i, name in enumerate(names):
        if i < n_sections:
            c, o = i, {i}
            if rng.random() < 0.5 and tree_nbrs[c]:
                o.add(tree_nbrs[c][int(rng.integers(0, len(tree_nbrs[c])))])
        else:
            _, o = _occurrence_star(rng, tree_nbrs, 0.5)
        occ[name] = o
    members = {i: sorted(n for n in names if i in occ[n]) for i in range(n_sections)}
    for a, b in tree:
        if not set(members[a]) & set(members[b]):
            pick = "n%02d" % len(names)
            names.append(pick)
            occ[pick] = {a, b}
    members = {i: sorted(n for n in names if i in occ[n]) for i in range(n_sections)}

    union = LabeledGraph(nodes=names)
    for i in range(n_sections):
        ms = members[i]
        for a in range(len(ms)):
            for b in range(a + 1, len(ms)):
                if rng.random() < edge_p:
                    union.add_edge(ms[a], ms[b])
    node_sets = {"S%d" % i: set(members[i]) for i in range(n_sections)}
    links = [("S%d" % a, "S%d" % b) for a, b in tree]
    return node_sets, links, union
