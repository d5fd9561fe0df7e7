"""Hypertree-distributed graph compilation steps.

Moral links and triangulation fill-ins travel as messages over the
hyperlinks so that every subnet ends up with graphs consistent with the
rest of the network without ever materializing the union graph.
"""

from __future__ import annotations

from .graphs import (FILLIN, MORAL, LabeledGraph, edge, full_propagate,
                     moralize, triangulate_local)


def propagate_moral_links(msbn):
    """Per-subnet moral graphs after a full collect+distribute propagation.

    Each subnet moralizes its own DAG once; a message over a hyperlink is
    the set of edges within the d-sepset of the sender's current graph.
    """
    local = {s.id: moralize(s.dag) for s in msbn.subnets}
    nbrs = msbn.neighbors()
    seps = {}
    for a, b in msbn.links:
        seps[(a, b)] = seps[(b, a)] = msbn.separator(a, b)

    def current(i, incoming):
        g = local[i].copy()
        for links in incoming.values():
            for u, v in links:
                if not g.has_edge(u, v):
                    g.add_edge(u, v, MORAL)
        return g

    def send(i, j, incoming):
        g = current(i, incoming)
        sep = seps[(i, j)]
        return frozenset(e for e in g.edges() if e[0] in sep and e[1] in sep)

    def finalize(i, incoming):
        return current(i, incoming)

    _, states = full_propagate(list(nbrs), nbrs, send, finalize=finalize)
    return states


def propagate_fillins(moral_graphs, msbn, cards=None):
    """Full fill-in propagation per the hypertree (dynamic regime).

    Returns (g_star, g_dir, messages):
      g_star[i]      -- subnet i's chordal graph after absorbing from all
                        neighbors and self-triangulating,
      g_dir[(i, j)]  -- subnet i's chordal graph used to compute messages
                        toward neighbor j (absorbs all neighbors except j,
                        keeps the d-sepset),
      messages[(i, j)] -- the fill-in pairs over the d-sepset sent i -> j.
    """
    nbrs = msbn.neighbors()
    seps = {}
    for a, b in msbn.links:
        seps[(a, b)] = seps[(b, a)] = msbn.separator(a, b)
    g_dir = {}

    def absorbed(i, incoming):
        g = moral_graphs[i].copy()
        for fills in incoming.values():
            for u, v in fills:
                if not g.has_edge(u, v):
                    g.add_edge(u, v, FILLIN)
        return g

    def send(i, j, incoming):
        g = absorbed(i, incoming)
        sep = seps[(i, j)]
        aug, _ = triangulate_local(g, keep=sep, cards=cards)
        g_dir[(i, j)] = aug
        # All fill-ins (received or produced here) lying within the d-sepset.
        return frozenset(
            e for e, tag in aug.tags.items()
            if tag == FILLIN and e[0] in sep and e[1] in sep)

    def finalize(i, incoming):
        g = absorbed(i, incoming)
        aug, _ = triangulate_local(g, keep=set(), cards=cards)
        return aug

    messages, g_star = full_propagate(list(nbrs), nbrs, send, finalize=finalize)
    return g_star, g_dir, messages


def union_moral_graph(msbn):
    """Moralization of the union DAG; the oracle for moral-link propagation."""
    return moralize(msbn.union_dag())


def fillin_message_oracle(msbn, moral_graphs, i, j):
    """Order-independent reference for the fill-in message i -> j.

    Builds the union of moral graphs on i's side of the hyperlink and reads
    off the d-sepset pairs connected through eliminated (non-separator)
    nodes.
    """
    nbrs = msbn.neighbors()
    side = set()
    stack = [i]
    seen = {j}
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        side.add(n)
        stack.extend(m for m in nbrs[n] if m not in seen)
    g = LabeledGraph()
    for s in side:
        for n in moral_graphs[s].nodes:
            g.add_node(n)
        for (u, v), tag in moral_graphs[s].tags.items():
            g.add_edge(u, v, tag)
    sep = sorted(msbn.separator(i, j))
    elim = g.nodes - set(sep)
    out = set()
    for a in range(len(sep)):
        for b in range(a + 1, len(sep)):
            u, v = sep[a], sep[b]
            if g.has_edge(u, v):
                continue
            frontier = [u]
            reached = {u}
            hit = False
            while frontier and not hit:
                n = frontier.pop()
                for m in g.adj[n]:
                    if m == v:
                        hit = True
                        break
                    if m in elim and m not in reached:
                        reached.add(m)
                        frontier.append(m)
            if hit:
                out.add(edge(u, v))
    return frozenset(out)
