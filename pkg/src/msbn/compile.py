"""Compilation of an MSBN into a linked junction forest.

Per subnet: one inference junction tree, plus one message junction forest
per neighbor built by splicing candidate d-sepset cliques into the tree of
the completed-d-sepset triangulation.  Linkages wire sending hosts to
receiving clusters; CPTs are assigned to one cluster per structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import sectioned
from .graphs import (FILLIN, JunctionTree, build_junction_tree, is_chordal,
                     max_cliques, triangulate_local)
from .model import validate_msbn


class CompileError(Exception):
    pass


class AttachmentAmbiguous(CompileError):
    pass


class NoCoveringCluster(CompileError):
    pass


class NoContainingCluster(CompileError):
    pass


class InvalidMsbn(CompileError):
    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(str(v) for v in report))


def _cluster_key(c):
    return tuple(sorted(c))


def _weight(cluster, cards):
    w = 1
    for n in cluster:
        w *= cards.get(n, 2)
    return w


@dataclass(frozen=True)
class MessageJF:
    """Junction forest dedicated to one directed hyperlink."""

    source: str
    target: str
    dsepset: frozenset
    jts: tuple  # of JunctionTree
    hosts: tuple  # host cluster index per JT
    decomposed: bool = True  # False when the splice fell back to one host

    def host_clique(self, t):
        """The d-sepset clique read from JT t's host."""
        return self.jts[t].clusters[self.hosts[t]] & self.dsepset

    def clusters(self):
        for t, jt in enumerate(self.jts):
            for c, cluster in enumerate(jt.clusters):
                yield (t, c), cluster


@dataclass(frozen=True)
class Linkage:
    """Directed pairing of a sending host and a receiving cluster."""

    source_struct: tuple  # ("M", i, j)
    source_jt: int
    source_cluster: int
    dest_struct: tuple  # ("T", j) or ("M", j, k)
    dest_jt: int
    dest_cluster: int
    label: frozenset


@dataclass
class LinkedJunctionForest:
    msbn: object
    inference_jts: dict  # subnet id -> JunctionTree
    message_jfs: dict  # (i, j) -> MessageJF
    linkages: list
    cpt_sites: dict  # struct key -> {variable -> (jt index, cluster index)}
    g_star: dict = field(default_factory=dict)
    g_dir: dict = field(default_factory=dict)
    moral: dict = field(default_factory=dict)
    fillin_messages: dict = field(default_factory=dict)

    def structures_of(self, sid):
        """All structure keys belonging to one subnet."""
        out = [("T", sid)]
        for (i, j) in sorted(self.message_jfs):
            if i == sid:
                out.append(("M", i, j))
        return out

    def jts_of(self, key):
        if key[0] == "T":
            return (self.inference_jts[key[1]],)
        return self.message_jfs[(key[1], key[2])].jts

    def linkages_into(self, key):
        return [l for l in self.linkages if l.dest_struct == key]

    def serialize(self):
        """Canonical text rendering for --emit and golden tests."""
        lines = ["ljf 1"]
        for sid in sorted(self.inference_jts):
            jt = self.inference_jts[sid]
            lines.append("[inference-jt %s]" % sid)
            lines.extend(_render_jt(jt))
        for (i, j) in sorted(self.message_jfs):
            jf = self.message_jfs[(i, j)]
            lines.append("[message-jf %s -> %s]" % (i, j))
            lines.append("dsepset: %s" % " ".join(sorted(jf.dsepset)))
            for t, jt in enumerate(jf.jts):
                lines.append("jt %d host %s" % (t, ",".join(_cluster_key(jt.clusters[jf.hosts[t]]))))
                lines.extend(_render_jt(jt))
        lines.append("[linkages]")
        for l in sorted(self.linkages, key=lambda l: (
                l.source_struct, l.source_jt, l.source_cluster,
                l.dest_struct, l.dest_jt, l.dest_cluster)):
            lines.append("%s jt%d %s => %s jt%d %s label %s" % (
                _struct_name(l.source_struct), l.source_jt, l.source_cluster,
                _struct_name(l.dest_struct), l.dest_jt, l.dest_cluster,
                ",".join(sorted(l.label))))
        lines.append("[assignments]")
        for key in sorted(self.cpt_sites):
            for var in sorted(self.cpt_sites[key]):
                t, c = self.cpt_sites[key][var]
                lines.append("%s %s -> jt%d cluster%d" % (_struct_name(key), var, t, c))
        return "\n".join(lines) + "\n"


def _struct_name(key):
    if key[0] == "T":
        return "T(%s)" % key[1]
    return "T(%s->%s)" % (key[1], key[2])


def _render_jt(jt):
    lines = []
    for i, c in enumerate(jt.clusters):
        lines.append("cluster %d: %s" % (i, " ".join(sorted(c))))
    for i, j in jt.edges:
        lines.append("edge %d %d sepset %s" % (i, j, " ".join(sorted(jt.clusters[i] & jt.clusters[j]))))
    return lines


def build_inference_jt(g_star):
    """Junction tree over the maximal cliques of a chordal subnet graph."""
    return build_junction_tree(max_cliques(g_star))


def build_message_jf(g_dir, dsepset, source, target, cards=None):
    """Organize the cliques of a directed chordal graph into a message JF.

    Candidate clusters are the maximal cliques of the subgraph spanned by
    the d-sepset; the splice guarantees each submessage can be read from one
    host cluster.
    """
    dsepset = frozenset(dsepset)
    cards = cards or {}
    candidates = max_cliques(g_dir.subgraph(dsepset)) if dsepset else []

    if dsepset and g_dir.is_complete(dsepset):
        jt = build_junction_tree(max_cliques(g_dir))
        host = _smallest_containing(jt.clusters, dsepset, cards)
        return MessageJF(source, target, dsepset, (jt,), (host,))

    # Complete the d-sepset, re-triangulate with its nodes eliminated last,
    # and split the resulting JT at the completed-d-sepset cluster.
    gc = g_dir.copy()
    ds = sorted(dsepset)
    for a in range(len(ds)):
        for b in range(a + 1, len(ds)):
            if not gc.has_edge(ds[a], ds[b]):
                gc.add_edge(ds[a], ds[b], FILLIN)
    gc, _ = triangulate_local(gc, keep=dsepset, cards=cards)
    cliques = max_cliques(gc)
    if frozenset(dsepset) not in cliques:
        # The completed d-sepset sits inside a larger clique; splicing would
        # not decompose the message, so keep a single JT with one host.
        jt = build_junction_tree(cliques)
        host = _smallest_containing(jt.clusters, dsepset, cards)
        return MessageJF(source, target, dsepset, (jt,), (host,), decomposed=False)

    jt_full = build_junction_tree(cliques)
    del_idx = jt_full.clusters.index(frozenset(dsepset))
    nbrs = jt_full.neighbors()
    # Connected components after deleting the d-sepset cluster.
    comps = []
    seen = {del_idx}
    for start in nbrs[del_idx]:
        if start in seen:
            continue
        comp = set()
        stack = [start]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            comp.add(x)
            stack.extend(y for y in nbrs[x] if y not in seen)
        comps.append(comp)

    jts = []
    hosts = []
    used = set()
    for comp in sorted(comps, key=lambda c: min(_cluster_key(jt_full.clusters[i]) for i in c)):
        former = [x for x in sorted(comp) if x in nbrs[del_idx]]
        if len(former) != 1:
            raise AttachmentAmbiguous(
                "component touches deleted cluster %d times" % len(former))
        x = former[0]
        xset = jt_full.clusters[x]
        matches = [q for q in candidates if q & xset == dsepset & xset]
        if not matches:
            raise AttachmentAmbiguous(
                "no candidate matches former neighbor %r" % (_cluster_key(xset),))
        # Largest overlap with the former neighbor, then lexicographic.
        q = sorted(matches, key=lambda m: (-len(m & xset), _cluster_key(m)))[0]
        used.add(q)
        idx = {old: k for k, old in enumerate(sorted(comp))}
        clusters = [jt_full.clusters[old] for old in sorted(comp)]
        edges = sorted((min(idx[a], idx[b]), max(idx[a], idx[b]))
                       for a, b in jt_full.edges
                       if a in comp and b in comp)
        absorbing = [k for k, c in enumerate(clusters) if q <= c]
        if absorbing:
            host = sorted(absorbing, key=lambda k: (len(clusters[k]), _cluster_key(clusters[k])))[0]
        else:
            clusters.append(q)
            host = len(clusters) - 1
            edges.append((min(idx[x], host), max(idx[x], host)))
        jts.append(JunctionTree(tuple(clusters), tuple(sorted(edges))))
        hosts.append(host)

    for q in candidates:
        if q not in used:
            jts.append(JunctionTree((q,), ()))
            hosts.append(0)

    jf = MessageJF(source, target, dsepset, tuple(jts), tuple(hosts))
    for jt in jf.jts:
        if not jt.check_running_intersection():
            raise AttachmentAmbiguous("splice broke running intersection")
    return jf


def _smallest_containing(clusters, subset, cards):
    hits = [i for i, c in enumerate(clusters) if subset <= c]
    if not hits:
        raise NoCoveringCluster("no cluster contains %r" % (_cluster_key(subset),))
    return sorted(hits, key=lambda i: (_weight(clusters[i], cards), _cluster_key(clusters[i])))[0]


def build_linkages(inference_jts, message_jfs, msbn, cards=None):
    """One linkage per host cluster per receiving structure of the target."""
    cards = cards or {}
    nbrs = msbn.neighbors()
    linkages = []
    for (i, j) in sorted(message_jfs):
        jf = message_jfs[(i, j)]
        dests = [("T", j)] + [("M", j, k) for k in nbrs[j] if k != i]
        for t, jt in enumerate(jf.jts):
            host = jf.hosts[t]
            label = jf.host_clique(t)
            for dest in dests:
                if dest[0] == "T":
                    djts = (inference_jts[j],)
                else:
                    djts = message_jfs[(j, dest[2])].jts
                best = None
                for dt, djt in enumerate(djts):
                    for dc, cluster in enumerate(djt.clusters):
                        if label <= cluster:
                            key = (_weight(cluster, cards), _cluster_key(cluster), dt, dc)
                            if best is None or key < best[0]:
                                best = (key, dt, dc)
                if best is None:
                    raise NoCoveringCluster(
                        "no cluster of %s contains linkage label %r"
                        % (_struct_name(dest), _cluster_key(label)))
                linkages.append(Linkage(("M", i, j), t, host, dest,
                                        best[1], best[2], label))
    return linkages


def assign_cpts(msbn, inference_jts, message_jfs, cards=None):
    """variable -> cluster per structure; smallest containing cluster wins."""
    cards = cards or {}
    uparents = msbn.union_parents()
    sites = {}
    for s in msbn.subnets:
        structs = [("T", s.id)] + [("M", i, j) for (i, j) in sorted(message_jfs) if i == s.id]
        for key in structs:
            jts = (inference_jts[s.id],) if key[0] == "T" else message_jfs[(key[1], key[2])].jts
            table = {}
            for x in sorted(s.owned):
                family = frozenset({x} | set(uparents.get(x, ())))
                best = None
                for t, jt in enumerate(jts):
                    for c, cluster in enumerate(jt.clusters):
                        if family <= cluster:
                            k = (_weight(cluster, cards), _cluster_key(cluster), t, c)
                            if best is None or k < best[0]:
                                best = (k, t, c)
                if best is None:
                    raise NoContainingCluster(
                        "family of %s not covered in %s" % (x, _struct_name(key)))
                table[x] = (best[1], best[2])
            sites[key] = table
    return sites


@dataclass(frozen=True)
class StorageStats:
    lazy_parameters: int
    full_cpt_values: int
    hugin_table_cells: int


def storage_stats(msbn, ljf=None):
    """Parameter counts for the three storage regimes.

    `lazy_parameters` counts free CPT parameters (one copy per table),
    `full_cpt_values` counts full CPT cells, and `hugin_table_cells` counts
    the belief tables a HUGIN-style architecture materializes: one table per
    cluster of every structure in the linked junction forest.
    """
    cards = {n: v.cardinality for n, v in msbn.variables.items()}
    lazy = 0
    full = 0
    for s in msbn.subnets:
        for x in sorted(s.owned):
            f = s.cpts[x]
            parent_space = 1
            for c in f.cards[1:]:
                parent_space *= c
            lazy += (f.cards[0] - 1) * parent_space
            full += f.cards[0] * parent_space

    if ljf is None:
        ljf = compile_msbn(msbn)
    hugin = 0
    for jt in ljf.inference_jts.values():
        for cluster in jt.clusters:
            hugin += _weight(cluster, cards)
    for jf in ljf.message_jfs.values():
        for jt in jf.jts:
            for cluster in jt.clusters:
                hugin += _weight(cluster, cards)
    return StorageStats(lazy, full, hugin)


def _harmonize_separators(msbn, moral, cards):
    """Make every d-sepset subgraph chordal and identical on both sides.

    A direction graph only carries its own side's fill-ins, so two subnets
    can disagree about a d-sepset's internal edges, and the subgraph a
    message JF splices over may not be chordal.  Promoting all cross-link
    fill-ins (plus deterministic chords) to shared edges of both endpoint
    moral graphs and re-propagating until stable fixes both problems; the
    extra edges only ever enlarge clusters, so inference stays exact.
    """
    work = {sid: g.copy() for sid, g in moral.items()}
    first_messages = None
    while True:
        g_star, g_dir, fills = sectioned.propagate_fillins(work, msbn, cards)
        if first_messages is None:
            first_messages = fills
        changed = False
        for a, b in msbn.links:
            sep = msbn.separator(a, b)
            new = set()
            for u, v in fills[(a, b)] | fills[(b, a)]:
                if not work[a].has_edge(u, v):
                    new.add((u, v))
            sepg = work[a].subgraph(sep)
            for u, v in new:
                sepg.add_edge(u, v, FILLIN)
            ok, _ = is_chordal(sepg)
            if not ok:
                aug, _ = triangulate_local(sepg, keep=set(), cards=cards)
                new |= aug.edges() - sepg.edges()
            for u, v in sorted(new):
                work[a].add_edge(u, v, FILLIN)
                work[b].add_edge(u, v, FILLIN)
                changed = True
        if not changed:
            return work, g_star, g_dir, first_messages


def compile_msbn(msbn, validate=True):
    """End-to-end compilation into a linked junction forest."""
    if validate:
        report = validate_msbn(msbn)
        if report:
            raise InvalidMsbn(report)
    cards = {n: v.cardinality for n, v in msbn.variables.items()}
    moral = sectioned.propagate_moral_links(msbn)
    moral, g_star, g_dir, fills = _harmonize_separators(msbn, moral, cards)
    inference_jts = {sid: build_inference_jt(g) for sid, g in g_star.items()}
    message_jfs = {}
    for (i, j) in sorted(g_dir):
        message_jfs[(i, j)] = build_message_jf(
            g_dir[(i, j)], msbn.separator(i, j), i, j, cards)
    linkages = build_linkages(inference_jts, message_jfs, msbn, cards)
    sites = assign_cpts(msbn, inference_jts, message_jfs, cards)
    return LinkedJunctionForest(
        msbn=msbn,
        inference_jts=inference_jts,
        message_jfs=message_jfs,
        linkages=linkages,
        cpt_sites=sites,
        g_star=g_star,
        g_dir=g_dir,
        moral=moral,
        fillin_messages=fills,
    )
