"""The MSBN document format: a strict, line-oriented text grammar.

Grammar (one directive per line; blank lines and `#` comments allowed):

    msbn 1

    [variables]
    <name> <cardinality> [<state label> ...]

    [subnet <id>]
    nodes: <name> ...
    arc: <parent> <child>
    cpt: <var> [| <parent> ...] : <value> ...

    [links]
    <id> <id>

A subnet owns exactly the variables for which it declares a `cpt:` line;
values are row-major over the scope (variable first, then the listed
parents), so each column at a fixed parent configuration sums to one.
Serialization is canonical: names, arcs, and links are emitted sorted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .factors import Factor
from .model import Dag, Subnet, Variable, make_msbn

FORMAT_VERSION = 1


class MsbnParseError(Exception):
    """Positioned parse or semantic error."""

    def __init__(self, line, col, message):
        self.line = line
        self.col = col
        super().__init__("line %d, col %d: %s" % (line, col, message))


class MsbnSyntaxError(MsbnParseError):
    pass


class MsbnSemanticError(MsbnParseError):
    pass


@dataclass
class SubnetDoc:
    id: str
    nodes: list = field(default_factory=list)
    arcs: list = field(default_factory=list)  # (parent, child)
    cpts: list = field(default_factory=list)  # (var, parents tuple, values)


@dataclass
class MsbnDocument:
    version: int = FORMAT_VERSION
    variables: list = field(default_factory=list)  # (name, card, labels)
    subnets: list = field(default_factory=list)
    links: list = field(default_factory=list)

    def canonical(self):
        """Structurally equal documents compare equal through this view."""
        return (
            self.version,
            sorted(self.variables),
            sorted((s.id, sorted(s.nodes), sorted(s.arcs),
                    sorted((v, tuple(p), tuple(vals)) for v, p, vals in s.cpts))
                   for s in self.subnets),
            sorted(tuple(sorted(l)) for l in self.links),
        )

    def to_msbn(self):
        cards = {name: card for name, card, _ in self.variables}
        variables = [Variable(name, card, labels or None)
                     for name, card, labels in self.variables]
        subnets = []
        for sd in self.subnets:
            dag = Dag.from_arcs(sd.nodes, sorted(sd.arcs))
            cpts = {}
            for var, parents, values in sd.cpts:
                shape = [cards[var]] + [cards[p] for p in parents]
                cpts[var] = Factor([var] + list(parents), shape, values)
            subnets.append(Subnet(sd.id, dag, cpts,
                                  frozenset(v for v, _, _ in sd.cpts)))
        return make_msbn(variables, subnets, self.links)


def _tokens(line):
    return line.split()


def parse_msbn(text):
    """Parse a document or raise a positioned MsbnParseError."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MsbnSyntaxError(1, 1, "not valid UTF-8: %s" % e)
    doc = MsbnDocument()
    section = None
    current = None
    saw_header = False
    names = set()
    cards = {}
    subnet_ids = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        stripped = line.strip()

        if not saw_header:
            toks = _tokens(stripped)
            if len(toks) != 2 or toks[0] != "msbn":
                raise MsbnSyntaxError(lineno, col, "expected header 'msbn 1'")
            if toks[1] != str(FORMAT_VERSION):
                raise MsbnSyntaxError(lineno, col,
                                      "unsupported format version %r" % toks[1])
            saw_header = True
            continue

        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise MsbnSyntaxError(lineno, col, "unterminated section header")
            head = _tokens(stripped[1:-1])
            if head == ["variables"]:
                section, current = "variables", None
            elif head == ["links"]:
                section, current = "links", None
            elif len(head) == 2 and head[0] == "subnet":
                if head[1] in subnet_ids:
                    raise MsbnSemanticError(lineno, col,
                                            "duplicate subnet %r" % head[1])
                subnet_ids.add(head[1])
                current = SubnetDoc(head[1])
                doc.subnets.append(current)
                section = "subnet"
            else:
                raise MsbnSyntaxError(lineno, col,
                                      "unknown section %r" % stripped)
            continue

        if section == "variables":
            toks = _tokens(stripped)
            if len(toks) < 2:
                raise MsbnSyntaxError(lineno, col,
                                      "expected '<name> <cardinality> [labels]'")
            name = toks[0]
            if name in names:
                raise MsbnSemanticError(lineno, col, "duplicate variable %r" % name)
            try:
                card = int(toks[1])
            except ValueError:
                raise MsbnSyntaxError(lineno, col,
                                      "cardinality %r is not an integer" % toks[1])
            if card < 2:
                raise MsbnSemanticError(lineno, col,
                                        "cardinality of %r must be >= 2" % name)
            labels = tuple(toks[2:])
            if labels and len(labels) != card:
                raise MsbnSemanticError(
                    lineno, col, "%r has %d labels for cardinality %d"
                    % (name, len(labels), card))
            names.add(name)
            cards[name] = card
            doc.variables.append((name, card, labels))
        elif section == "subnet":
            key, sep, rest = stripped.partition(":")
            if not sep:
                raise MsbnSyntaxError(lineno, col, "expected '<directive>: ...'")
            key = key.strip()
            if key == "nodes":
                for n in _tokens(rest):
                    if n not in names:
                        raise MsbnSemanticError(lineno, col,
                                                "unknown variable %r" % n)
                    if n in current.nodes:
                        raise MsbnSemanticError(lineno, col,
                                                "repeated node %r" % n)
                    current.nodes.append(n)
            elif key == "arc":
                toks = _tokens(rest)
                if len(toks) != 2:
                    raise MsbnSyntaxError(lineno, col,
                                          "expected 'arc: <parent> <child>'")
                for n in toks:
                    if n not in current.nodes:
                        raise MsbnSemanticError(
                            lineno, col, "%r is not a node of %s" % (n, current.id))
                if tuple(toks) in current.arcs:
                    raise MsbnSemanticError(lineno, col,
                                            "duplicate arc %s -> %s" % tuple(toks))
                current.arcs.append((toks[0], toks[1]))
            elif key == "cpt":
                head, sep2, values = rest.partition(":")
                if not sep2:
                    raise MsbnSyntaxError(
                        lineno, col, "expected 'cpt: <var> [| parents] : values'")
                var_part, bar, parent_part = head.partition("|")
                var_toks = _tokens(var_part)
                if len(var_toks) != 1:
                    raise MsbnSyntaxError(lineno, col, "expected one variable name")
                var = var_toks[0]
                parents = tuple(_tokens(parent_part)) if bar else ()
                for n in (var,) + parents:
                    if n not in current.nodes:
                        raise MsbnSemanticError(
                            lineno, col, "%r is not a node of %s" % (n, current.id))
                if any(var == v for v, _, _ in current.cpts):
                    raise MsbnSemanticError(lineno, col,
                                            "duplicate cpt for %r" % var)
                declared = {p for p, c in current.arcs if c == var}
                if set(parents) != declared or len(set(parents)) != len(parents):
                    raise MsbnSemanticError(
                        lineno, col,
                        "cpt parents %r do not match arcs into %r (%r)"
                        % (list(parents), var, sorted(declared)))
                try:
                    vals = [float(t) for t in _tokens(values)]
                except ValueError:
                    raise MsbnSyntaxError(lineno, col, "bad number in cpt values")
                expect = cards[var]
                for p in parents:
                    expect *= cards[p]
                if len(vals) != expect:
                    raise MsbnSemanticError(
                        lineno, col, "cpt for %r has %d values, expected %d"
                        % (var, len(vals), expect))
                if any(v < 0 for v in vals):
                    raise MsbnSemanticError(lineno, col,
                                            "negative value in cpt for %r" % var)
                current.cpts.append((var, parents, vals))
            else:
                raise MsbnSyntaxError(lineno, col, "unknown directive %r" % key)
        elif section == "links":
            toks = _tokens(stripped)
            if len(toks) != 2:
                raise MsbnSyntaxError(lineno, col, "expected '<id> <id>'")
            if toks[0] not in subnet_ids or toks[1] not in subnet_ids:
                raise MsbnSemanticError(lineno, col,
                                        "unknown subnet in link %r" % (toks,))
            doc.links.append((toks[0], toks[1]))
        else:
            raise MsbnSyntaxError(lineno, col, "directive outside any section")

    if not saw_header:
        raise MsbnSyntaxError(1, 1, "empty document")
    if not doc.variables:
        raise MsbnSemanticError(1, 1, "no [variables] section")
    if not doc.subnets:
        raise MsbnSemanticError(1, 1, "no [subnet] section")
    return doc


def serialize_msbn(doc):
    """Canonical text rendering of a document."""
    lines = ["msbn %d" % doc.version, "", "[variables]"]
    for name, card, labels in sorted(doc.variables):
        toks = [name, str(card)] + list(labels)
        lines.append(" ".join(toks))
    for sd in sorted(doc.subnets, key=lambda s: s.id):
        lines.append("")
        lines.append("[subnet %s]" % sd.id)
        lines.append("nodes: %s" % " ".join(sorted(sd.nodes)))
        for p, c in sorted(sd.arcs):
            lines.append("arc: %s %s" % (p, c))
        for var, parents, vals in sorted(sd.cpts):
            head = var if not parents else "%s | %s" % (var, " ".join(parents))
            lines.append("cpt: %s : %s" % (head, " ".join(_fmt(v) for v in vals)))
    lines.append("")
    lines.append("[links]")
    for a, b in sorted(tuple(sorted(l)) for l in doc.links):
        lines.append("%s %s" % (a, b))
    return "\n".join(lines) + "\n"


def _fmt(v):
    return repr(float(v))


def document_from_msbn(msbn):
    doc = MsbnDocument()
    for name in sorted(msbn.variables):
        v = msbn.variables[name]
        doc.variables.append((name, v.cardinality, tuple(v.states or ())))
    for s in sorted(msbn.subnets, key=lambda s: s.id):
        sd = SubnetDoc(s.id)
        sd.nodes = sorted(s.dag.nodes)
        sd.arcs = sorted(set(s.dag.arcs()))
        for var in sorted(s.owned):
            f = s.cpts[var]
            sd.cpts.append((var, tuple(f.scope[1:]),
                            [float(x) for x in f.values.ravel()]))
        doc.subnets.append(sd)
    doc.links = sorted(tuple(sorted(l)) for l in msbn.links)
    return doc


def parse_evidence(text, msbn=None):
    """Evidence file: one `variable = state` per line (index or label)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise MsbnSyntaxError(lineno, 1, "expected '<variable> = <state>'")
        name = name.strip()
        value = value.strip()
        if msbn is not None and name not in msbn.variables:
            raise MsbnSemanticError(lineno, 1, "unknown variable %r" % name)
        state = None
        try:
            state = int(value)
        except ValueError:
            if msbn is not None:
                labels = msbn.variables[name].states or ()
                if value in labels:
                    state = labels.index(value)
        if state is None:
            raise MsbnSemanticError(lineno, 1,
                                    "unknown state %r for %r" % (value, name))
        if msbn is not None and not (0 <= state < msbn.cardinality(name)):
            raise MsbnSemanticError(lineno, 1,
                                    "state %d out of range for %r" % (state, name))
        if name in out and out[name] != state:
            raise MsbnSemanticError(lineno, 1,
                                    "contradictory evidence for %r" % name)
        out[name] = state
    return out
