"""Core domain types: variables, DAGs, subnets, and the hypertree MSBN.

All values are immutable after construction; the validators are pure and
return the same report for the same input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factors import Factor

CPT_NORMALIZATION_TOL = 1e-9


class ModelError(Exception):
    pass


class CycleDetected(ModelError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle: %s" % " -> ".join(self.cycle))


class DanglingParent(ModelError):
    def __init__(self, child, parent):
        self.child, self.parent = child, parent
        super().__init__("parent %r of %r is not a node" % (parent, child))


class DSepsetViolation(ModelError):
    def __init__(self, variable):
        self.variable = variable
        super().__init__(
            "parents of shared variable %r straddle both subnets" % variable
        )


class MissingCpt(ModelError):
    pass


class MultipleCpts(ModelError):
    pass


class UnnormalizedCpt(ModelError):
    def __init__(self, variable, parent_config, total):
        self.variable = variable
        self.parent_config = parent_config
        super().__init__(
            "CPT column of %r at parent config %r sums to %.12g"
            % (variable, parent_config, total)
        )


class MisplacedCpt(ModelError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    cardinality: int
    states: tuple | None = None

    def __post_init__(self):
        if self.cardinality < 2:
            raise ModelError("variable %r needs cardinality >= 2" % self.name)
        if self.states is not None and len(self.states) != self.cardinality:
            raise ModelError("state labels of %r do not match cardinality" % self.name)


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph with per-node ordered parent lists."""

    nodes: frozenset
    parents: dict  # name -> tuple of parent names

    @staticmethod
    def from_arcs(nodes, arcs):
        """Build from (parent, child) pairs, preserving arc order per child."""
        parents = {n: [] for n in nodes}
        for p, c in arcs:
            parents[c].append(p)
        return Dag(frozenset(nodes), {n: tuple(ps) for n, ps in parents.items()})

    def arcs(self):
        return [(p, c) for c in sorted(self.parents) for p in self.parents[c]]

    def children(self):
        out = {n: [] for n in self.nodes}
        for c, ps in self.parents.items():
            for p in ps:
                out[p].append(c)
        return out


def validate_dag(dag):
    """Raise CycleDetected or DanglingParent on a malformed DAG."""
    for child, ps in dag.parents.items():
        if child not in dag.nodes:
            raise DanglingParent(child, child)
        for p in ps:
            if p not in dag.nodes:
                raise DanglingParent(child, p)
    # Iterative DFS cycle check with path recovery.
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in dag.nodes}
    for start in sorted(dag.nodes):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(sorted(dag.parents.get(start, ()))))]
        color[start] = GREY
        path = [start]
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GREY:
                    i = path.index(nxt)
                    raise CycleDetected(path[i:] + [nxt])
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    path.append(nxt)
                    stack.append((nxt, iter(sorted(dag.parents.get(nxt, ())))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
                path.pop()


@dataclass(frozen=True)
class Subnet:
    """One section of the MSBN: a DAG plus the CPTs it owns.

    Non-owned occurrences of shared variables carry no table at all; the
    implied constant (all-ones) table is never materialized.
    """

    id: str
    dag: Dag
    cpts: dict  # variable name -> Factor with scope (var, *parents)
    owned: frozenset  # variable names whose real CPT lives here

    @property
    def nodes(self):
        return self.dag.nodes


@dataclass(frozen=True)
class HypertreeMSBN:
    subnets: tuple
    links: tuple  # unordered (subnet-id, subnet-id) pairs
    variables: dict = field(default_factory=dict)  # name -> Variable

    def subnet(self, sid):
        for s in self.subnets:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def separator(self, i, j):
        return self.subnet(i).nodes & self.subnet(j).nodes

    def neighbors(self):
        nbrs = {s.id: [] for s in self.subnets}
        for a, b in self.links:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return {k: sorted(v) for k, v in nbrs.items()}

    def union_dag(self):
        nodes = set()
        arcs = set()
        for s in self.subnets:
            nodes |= s.dag.nodes
            arcs |= set(s.dag.arcs())
        return Dag.from_arcs(nodes, sorted(arcs))

    def union_parents(self):
        return self.union_dag().parents

    def owner_of(self, name):
        for s in self.subnets:
            if name in s.owned:
                return s.id
        raise KeyError(name)

    def cardinality(self, name):
        return self.variables[name].cardinality

    def all_names(self):
        return sorted(self.variables)


def make_msbn(variables, subnets, links):
    """Assemble an MSBN value; structural validity is checked separately."""
    vmap = {v.name: v for v in variables}
    return HypertreeMSBN(tuple(subnets), tuple(tuple(l) for l in links), vmap)


def validate_d_sepset(subnet_i, subnet_j, union_parents=None):
    """Check Def.-7 style sharing between two subnets.

    Every shared variable must have all of its union-DAG parents inside at
    least one of the two subnets.
    """
    if union_parents is None:
        nodes = subnet_i.nodes | subnet_j.nodes
        arcs = set(subnet_i.dag.arcs()) | set(subnet_j.dag.arcs())
        union = Dag.from_arcs(nodes, sorted(arcs))
        validate_dag(union)
        union_parents = union.parents
    for x in sorted(subnet_i.nodes & subnet_j.nodes):
        ps = set(union_parents.get(x, ()))
        if not (ps <= subnet_i.nodes or ps <= subnet_j.nodes):
            raise DSepsetViolation(x)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self):
        return "%s: %s" % (self.code, self.detail)


def _tree_paths(ids, links):
    """All-pairs paths of a tree given as id list + edge pairs."""
    nbrs = {i: [] for i in ids}
    for a, b in links:
        nbrs[a].append(b)
        nbrs[b].append(a)
    paths = {}
    for src in ids:
        prev = {src: None}
        queue = [src]
        while queue:
            n = queue.pop(0)
            for m in nbrs[n]:
                if m not in prev:
                    prev[m] = n
                    queue.append(m)
        for dst in prev:
            path = [dst]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            paths[(src, dst)] = list(reversed(path))
    return paths


def validate_hypertree(msbn):
    """Full structural report; an empty list means the MSBN is valid."""
    report = []
    ids = [s.id for s in msbn.subnets]
    if len(set(ids)) != len(ids):
        report.append(Violation("DuplicateSubnetId", repr(ids)))
        return report

    known = set(ids)
    for a, b in msbn.links:
        if a not in known or b not in known:
            report.append(Violation("UnknownSubnet", "%s -- %s" % (a, b)))
            return report

    # Tree-ness: connected and |links| = |subnets| - 1, no repeats.
    edges = {frozenset(l) for l in msbn.links}
    if any(len(e) != 2 for e in edges):
        report.append(Violation("SelfLink", repr(msbn.links)))
        return report
    if len(edges) != len(msbn.links) or len(msbn.links) != len(ids) - 1:
        report.append(Violation("NotATree", "%d subnets, %d links" % (len(ids), len(msbn.links))))
        return report
    paths = _tree_paths(ids, msbn.links)
    if len(paths) != len(ids) ** 2:
        report.append(Violation("NotATree", "hypertree is disconnected"))
        return report

    for s in msbn.subnets:
        try:
            validate_dag(s.dag)
        except ModelError as e:
            report.append(Violation("InvalidSubnetDag", "%s: %s" % (s.id, e)))
    if report:
        return report

    union = msbn.union_dag()
    try:
        validate_dag(union)
    except ModelError as e:
        report.append(Violation("UnionDagCyclic", str(e)))
        return report
    uparents = union.parents

    # Running intersection over the hypertree.
    for a in ids:
        for b in ids:
            if a >= b:
                continue
            inter = msbn.subnet(a).nodes & msbn.subnet(b).nodes
            for mid in paths[(a, b)][1:-1]:
                if not inter <= msbn.subnet(mid).nodes:
                    report.append(Violation(
                        "RunningIntersection",
                        "%s ∩ %s ⊄ %s" % (a, b, mid)))

    # Per-hyperlink d-sepsets and identical separator subgraphs.
    for a, b in msbn.links:
        sa, sb = msbn.subnet(a), msbn.subnet(b)
        try:
            validate_d_sepset(sa, sb, uparents)
        except DSepsetViolation as e:
            report.append(Violation("DSepsetViolation", "%s--%s: %s" % (a, b, e.variable)))
        sep = sa.nodes & sb.nodes
        arcs_a = {(p, c) for p, c in sa.dag.arcs() if p in sep and c in sep}
        arcs_b = {(p, c) for p, c in sb.dag.arcs() if p in sep and c in sep}
        if arcs_a != arcs_b:
            report.append(Violation(
                "SeparatorSubgraphMismatch",
                "%s--%s: %r vs %r" % (a, b, sorted(arcs_a), sorted(arcs_b))))

    # Subnet arcs must be consistent with the union DAG restricted to N_i.
    for s in msbn.subnets:
        for p, c in s.dag.arcs():
            if (p, c) not in set(union.arcs()):
                report.append(Violation("ArcMismatch", "%s: %s->%s" % (s.id, p, c)))

    # Single ownership.
    owners = {}
    for s in msbn.subnets:
        for x in s.owned:
            owners.setdefault(x, []).append(s.id)
    for x in sorted(msbn.variables):
        got = owners.get(x, [])
        if len(got) == 0:
            report.append(Violation("NoOwner", x))
        elif len(got) > 1:
            report.append(Violation("MultipleOwners", "%s in %s" % (x, got)))
    for x, sids in owners.items():
        if x not in msbn.variables:
            report.append(Violation("UnknownVariable", x))
    return report


def check_cpt_assignment(msbn):
    """Verify ownership placement and per-column CPT normalization."""
    uparents = msbn.union_parents()
    seen = {}
    for s in msbn.subnets:
        for x in sorted(s.owned):
            if x in seen:
                raise MultipleCpts("%s owned by %s and %s" % (x, seen[x], s.id))
            seen[x] = s.id
            if x not in s.cpts:
                raise MissingCpt("%s owned by %s but has no table" % (x, s.id))
            family = {x} | set(uparents.get(x, ()))
            if not family <= s.nodes:
                raise MisplacedCpt(
                    "%s owned by %s which lacks parents %s"
                    % (x, s.id, sorted(family - s.nodes)))
            f = s.cpts[x]
            if f.scope[0] != x or set(f.scope[1:]) != set(uparents.get(x, ())):
                raise MisplacedCpt(
                    "CPT scope %r does not match family of %s" % (f.scope, x))
            sums = f.values.sum(axis=0)
            bad = np.abs(sums - 1.0) > CPT_NORMALIZATION_TOL
            if np.any(bad):
                idx = tuple(int(i) for i in np.argwhere(bad)[0])
                raise UnnormalizedCpt(x, idx, float(np.asarray(sums)[idx]))
        for x in s.cpts:
            if x not in s.owned:
                raise MultipleCpts("%s carries a table in non-owner %s" % (x, s.id))
    for x in sorted(msbn.variables):
        if x not in seen:
            raise MissingCpt(x)


def validate_msbn(msbn):
    """Structural report plus CPT assignment, as one violation list."""
    report = validate_hypertree(msbn)
    if report:
        return report
    try:
        check_cpt_assignment(msbn)
    except ModelError as e:
        report.append(Violation(type(e).__name__, str(e)))
    return report


def check_evidence(msbn, evidence):
    """Raise on evidence naming unknown variables or out-of-range states."""
    for name, state in evidence.items():
        if name not in msbn.variables:
            raise ModelError("evidence on unknown variable %r" % name)
        if not (0 <= state < msbn.cardinality(name)):
            raise ModelError(
                "evidence state %d out of range for %r" % (state, name))
