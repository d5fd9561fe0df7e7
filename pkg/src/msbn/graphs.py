"""Undirected-graph machinery: moralization, elimination, chordality,
cliques, junction trees, and the generic tree message-passing scaffold.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

ORIGINAL = "original"
MORAL = "moral"
FILLIN = "fill-in"


class GraphError(Exception):
    pass


class NodeAbsent(GraphError):
    pass


class NotChordal(GraphError):
    pass


class RunningIntersectionUnsatisfiable(GraphError):
    pass


def edge(u, v):
    return (u, v) if u <= v else (v, u)


class LabeledGraph:
    """Undirected graph whose edges carry an original/moral/fill-in tag.

    Tags are stable: adding an edge that already exists keeps its first tag.
    """

    def __init__(self, nodes=(), edges=None):
        self.adj = {n: set() for n in nodes}
        self.tags = {}
        if edges:
            for item in edges:
                if len(item) == 3:
                    u, v, tag = item
                else:
                    (u, v), tag = item, ORIGINAL
                self.add_edge(u, v, tag)

    @property
    def nodes(self):
        return set(self.adj)

    def edges(self):
        return set(self.tags)

    def add_node(self, n):
        self.adj.setdefault(n, set())

    def add_edge(self, u, v, tag=ORIGINAL):
        if u == v:
            raise GraphError("self-loop on %r" % (u,))
        self.add_node(u)
        self.add_node(v)
        e = edge(u, v)
        if e not in self.tags:
            self.tags[e] = tag
        self.adj[u].add(v)
        self.adj[v].add(u)

    def has_edge(self, u, v):
        return edge(u, v) in self.tags

    def neighbors(self, n):
        try:
            return self.adj[n]
        except KeyError:
            raise NodeAbsent(n)

    def copy(self):
        g = LabeledGraph()
        g.adj = {n: set(s) for n, s in self.adj.items()}
        g.tags = dict(self.tags)
        return g

    def subgraph(self, keep):
        keep = set(keep)
        g = LabeledGraph(nodes=keep & self.nodes)
        for (u, v), tag in self.tags.items():
            if u in keep and v in keep:
                g.add_edge(u, v, tag)
        return g

    def is_complete(self, nodes):
        nodes = list(nodes)
        return all(
            self.has_edge(nodes[i], nodes[j])
            for i in range(len(nodes))
            for j in range(i + 1, len(nodes))
        )

    def __eq__(self, other):
        return isinstance(other, LabeledGraph) and self.adj == other.adj \
            and set(self.tags) == set(other.tags)

    def to_dot(self, name="G"):
        """Graphviz text export with the edge tag as an attribute."""
        lines = ["graph %s {" % name]
        for n in sorted(self.adj):
            lines.append('  "%s";' % n)
        for (u, v) in sorted(self.tags):
            lines.append('  "%s" -- "%s" [tag="%s"];' % (u, v, self.tags[(u, v)]))
        lines.append("}")
        return "\n".join(lines) + "\n"


def moralize(dag):
    """Moral graph: the DAG skeleton plus an edge between every co-parent pair."""
    g = LabeledGraph(nodes=dag.nodes)
    for child, parents in dag.parents.items():
        for p in parents:
            g.add_edge(p, child, ORIGINAL)
        ps = list(parents)
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                if not g.has_edge(ps[i], ps[j]):
                    g.add_edge(ps[i], ps[j], MORAL)
    return g


def eliminate(graph, node):
    """Eliminate one node: complete its neighborhood, then remove it.

    Returns (reduced graph, fill-ins added); the input is not modified.
    """
    if node not in graph.adj:
        raise NodeAbsent(node)
    g = graph.copy()
    fills = _eliminate_inplace(g.adj, node)
    for u, v in fills:
        g.tags[edge(u, v)] = FILLIN
    for e in list(g.tags):
        if node in e:
            del g.tags[e]
    return g, fills


def _eliminate_inplace(adj, node):
    """Complete node's neighborhood in adj and drop the node; return fill-ins."""
    nbrs = sorted(adj[node])
    fills = set()
    for i in range(len(nbrs)):
        for j in range(i + 1, len(nbrs)):
            u, v = nbrs[i], nbrs[j]
            if v not in adj[u]:
                adj[u].add(v)
                adj[v].add(u)
                fills.add(edge(u, v))
    for m in adj.pop(node):
        adj[m].discard(node)
    return fills


def _fill_count(adj, node):
    nbrs = list(adj[node])
    k = 0
    for i in range(len(nbrs)):
        for j in range(i + 1, len(nbrs)):
            if nbrs[j] not in adj[nbrs[i]]:
                k += 1
    return k


def _clique_weight(adj, node, cards):
    w = cards.get(node, 2)
    for m in adj[node]:
        w *= cards.get(m, 2)
    return w


def min_fill_order(graph, eliminable, cards=None):
    """Greedy elimination order of `eliminable` by minimum fill.

    Ties break by minimum resulting clique weight (product of cardinalities),
    then by lexicographic node name.
    """
    cards = cards or {}
    adj = {n: set(s) for n, s in graph.adj.items()}
    todo = set(eliminable)
    order = []
    while todo:
        best = min(
            todo,
            key=lambda n: (_fill_count(adj, n), _clique_weight(adj, n, cards), n),
        )
        order.append(best)
        _eliminate_inplace(adj, best)
        todo.discard(best)
    return order


def triangulate_local(graph, keep, cards=None, order=None):
    """Eliminate every node outside `keep`, injecting fill-ins back.

    Elimination is simulated on a working copy so the returned graph retains
    all nodes.  Returns (augmented graph, fill-ins with both ends in keep).
    """
    keep = set(keep)
    eliminable = sorted(graph.nodes - keep)
    if order is None:
        order = min_fill_order(graph, eliminable, cards)
    else:
        if sorted(order) != eliminable:
            raise GraphError("order must be a permutation of the eliminated set")
    adj = {n: set(s) for n, s in graph.adj.items()}
    fills = set()
    for n in order:
        fills |= _eliminate_inplace(adj, n)
    out = graph.copy()
    for u, v in sorted(fills):
        out.add_edge(u, v, FILLIN)
    sep_fills = {e for e in fills if e[0] in keep and e[1] in keep}
    return out, sep_fills


def separator_fills_oracle(graph, keep):
    """Order-independent reference for triangulate_local's separator fill-ins.

    A kept pair gains a fill-in iff it is not adjacent but connected by a
    path whose interior lies entirely in the eliminated set.
    """
    keep = sorted(set(keep))
    elim = graph.nodes - set(keep)
    out = set()
    for i in range(len(keep)):
        for j in range(i + 1, len(keep)):
            u, v = keep[i], keep[j]
            if graph.has_edge(u, v):
                continue
            # BFS from u through eliminated nodes only.
            frontier = [u]
            seen = {u}
            found = False
            while frontier and not found:
                n = frontier.pop()
                for m in graph.adj[n]:
                    if m == v:
                        found = True
                        break
                    if m in elim and m not in seen:
                        seen.add(m)
                        frontier.append(m)
            if found:
                out.add(edge(u, v))
    return out


def mcs_order(graph):
    """Maximum-cardinality search visit order, ties broken lexicographically."""
    weight = {n: 0 for n in graph.adj}
    order = []
    unvisited = set(graph.adj)
    while unvisited:
        n = min(unvisited, key=lambda x: (-weight[x], x))
        order.append(n)
        unvisited.discard(n)
        for m in graph.adj[n]:
            if m in unvisited:
                weight[m] += 1
    return order


def _peo_failure(graph, order):
    """First (node, a, b) where later neighbors a,b are non-adjacent, or None.

    `order` is read as an elimination order: reversed MCS visit order.
    """
    pos = {n: i for i, n in enumerate(order)}
    for n in order:
        later = sorted(m for m in graph.adj[n] if pos[m] > pos[n])
        for i in range(len(later)):
            for j in range(i + 1, len(later)):
                if not graph.has_edge(later[i], later[j]):
                    return n, later[i], later[j]
    return None


def _chordless_cycle(graph):
    """Some chordless cycle of length >= 4 in a non-chordal graph."""
    for v in sorted(graph.adj):
        nbrs = sorted(graph.adj[v])
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                a, b = nbrs[i], nbrs[j]
                if graph.has_edge(a, b):
                    continue
                banned = (graph.adj[v] | {v}) - {a, b}
                # Shortest a-b path avoiding v's other neighbors is induced.
                prev = {a: None}
                queue = [a]
                while queue:
                    n = queue.pop(0)
                    if n == b:
                        break
                    for m in sorted(graph.adj[n]):
                        if m not in prev and m not in banned:
                            prev[m] = n
                            queue.append(m)
                if b in prev:
                    path = [b]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return [v] + list(reversed(path))
    return None


def is_chordal(graph):
    """(True, perfect elimination order) or (False, chordless cycle >= 4)."""
    order = list(reversed(mcs_order(graph)))
    if _peo_failure(graph, order) is None:
        return True, order
    cycle = _chordless_cycle(graph)
    if cycle is None:  # pragma: no cover - PEO check and cycle search agree
        raise GraphError("PEO check failed but no chordless cycle found")
    return False, cycle


def max_cliques(graph):
    """Maximal cliques of a chordal graph, via its perfect elimination order."""
    ok, witness = is_chordal(graph)
    if not ok:
        raise NotChordal("chordless cycle: %s" % witness)
    pos = {n: i for i, n in enumerate(witness)}
    candidates = []
    for n in witness:
        c = frozenset({n} | {m for m in graph.adj[n] if pos[m] > pos[n]})
        candidates.append(c)
    cliques = []
    for c in candidates:
        if not any(c < d or c == d for d in cliques):
            cliques = [d for d in cliques if not d < c]
            cliques.append(c)
    return sorted(cliques, key=lambda c: tuple(sorted(c)))


@dataclass(frozen=True)
class JunctionTree:
    """Tree of clusters; sepsets are derived as endpoint intersections."""

    clusters: tuple  # of frozensets
    edges: tuple  # of (index, index) with i < j

    def sepset(self, e):
        i, j = e
        return self.clusters[i] & self.clusters[j]

    def neighbors(self):
        nbrs = {i: [] for i in range(len(self.clusters))}
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return {k: sorted(v) for k, v in nbrs.items()}

    def variables(self):
        out = set()
        for c in self.clusters:
            out |= c
        return out

    def check_running_intersection(self):
        """Explicit path check for every cluster pair."""
        nbrs = self.neighbors()
        n = len(self.clusters)
        if len(self.edges) != n - 1:
            return False
        prev = {0: None}
        queue = [0]
        while queue:
            x = queue.pop(0)
            for y in nbrs[x]:
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        if len(prev) != n:
            return False
        for a in range(n):
            for b in range(a + 1, n):
                inter = self.clusters[a] & self.clusters[b]
                path = self._path(a, b, nbrs)
                for k in range(len(path) - 1):
                    sep = self.clusters[path[k]] & self.clusters[path[k + 1]]
                    if not inter <= sep:
                        return False
        return True

    def _path(self, a, b, nbrs=None):
        nbrs = nbrs or self.neighbors()
        prev = {a: None}
        queue = [a]
        while queue:
            x = queue.pop(0)
            if x == b:
                break
            for y in nbrs[x]:
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        path = [b]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return list(reversed(path))

    def to_dot(self, name="JT"):
        lines = ["graph %s {" % name]
        for i, c in enumerate(self.clusters):
            lines.append('  c%d [label="%s"];' % (i, ",".join(sorted(c))))
        for i, j in sorted(self.edges):
            lines.append('  c%d -- c%d [label="%s"];'
                         % (i, j, ",".join(sorted(self.clusters[i] & self.clusters[j]))))
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_junction_tree(cliques):
    """Maximum-weight spanning tree on intersection sizes.

    Deterministic: clusters are name-sorted; equal-weight edges prefer the
    lexicographically smallest cluster pair.  Components of a disconnected
    input are joined by empty sepsets.
    """
    clusters = sorted({frozenset(c) for c in cliques}, key=lambda c: tuple(sorted(c)))
    n = len(clusters)
    if n == 0:
        raise GraphError("no cliques")
    cand = []
    for i in range(n):
        for j in range(i + 1, n):
            w = len(clusters[i] & clusters[j])
            cand.append((-w, tuple(sorted(clusters[i])), tuple(sorted(clusters[j])), i, j))
    cand.sort()
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for w, _, _, i, j in cand:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j))
    jt = JunctionTree(tuple(clusters), tuple(sorted(edges)))
    if not jt.check_running_intersection():
        raise RunningIntersectionUnsatisfiable(
            "cliques do not admit a junction tree: %r" % (clusters,))
    return jt


def full_propagate(nodes, neighbors, send, root=None, schedule="rooted",
                   rng=None, finalize=None):
    """Generic tree propagation: one message per directed edge.

    `send(node, target, incoming)` builds the message for one directed edge
    from the messages `incoming` (neighbor -> message) received from all
    other neighbors.  With schedule "rooted" a collect/distribute order is
    used; with "asynchronous" any ready edge may fire (shuffled by `rng`).
    Returns (messages, states) where states[n] = finalize(n, incoming_all).
    """
    nodes = list(nodes)
    if not nodes:
        return {}, {}
    messages = {}

    def incoming_for(n, excluding=None):
        return {m: messages[(m, n)] for m in neighbors[n]
                if m != excluding and (m, n) in messages}

    if schedule == "rooted":
        if root is None:
            root = sorted(nodes)[0]
        # Collect: post-order towards root.
        order = []
        stack = [(root, None)]
        while stack:
            n, parent = stack.pop()
            order.append((n, parent))
            for m in neighbors[n]:
                if m != parent:
                    stack.append((m, n))
        for n, parent in reversed(order):
            if parent is not None:
                messages[(n, parent)] = send(n, parent, incoming_for(n, parent))
        # Distribute: pre-order from root.
        for n, parent in order:
            for m in neighbors[n]:
                if m != parent:
                    messages[(n, m)] = send(n, m, incoming_for(n, m))
    elif schedule == "asynchronous":
        rng = rng or random.Random(0)
        pending = [(u, v) for u in nodes for v in neighbors[u]]
        while pending:
            rng.shuffle(pending)
            progressed = False
            for k, (u, v) in enumerate(pending):
                ready = all((m, u) in messages for m in neighbors[u] if m != v)
                if ready:
                    messages[(u, v)] = send(u, v, incoming_for(u, v))
                    pending.pop(k)
                    progressed = True
                    break
            if not progressed:
                raise GraphError("propagation deadlock; input is not a tree")
    else:
        raise ValueError("unknown schedule %r" % schedule)

    states = {}
    if finalize is not None:
        for n in nodes:
            states[n] = finalize(n, incoming_for(n))
    return messages, states
