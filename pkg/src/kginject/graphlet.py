"""Graphlets over a schema: validation, rooted instance extraction, dual views.

A graphlet is a pair of class and property sets. It is valid when (1) every
property's domain touches the class set and (2) the classes are connected by
property chains; both conditions come in a lenient/strict and an
undirected/directed flavor. A valid graphlet can be compiled into a connected
basic graph pattern or into a set of node shapes.
"""

from __future__ import annotations

import heapq
import json
import re
from dataclasses import dataclass

from .query import Pattern, Var
from .store import (
    RDF_TYPE,
    RDFS_LABEL,
    Graph,
    Schema,
    Term,
    Triple,
    local_name,
    parse_ntriples,
    scan_term,
    serialize_term,
    serialize_triple,
    triple_sort_key,
)

SH_NODE_SHAPE = "http://www.w3.org/ns/shacl#NodeShape"
SH_TARGET_CLASS = "http://www.w3.org/ns/shacl#targetClass"
SH_PROPERTY = "http://www.w3.org/ns/shacl#property"
SH_PATH = "http://www.w3.org/ns/shacl#path"
SH_CLASS = "http://www.w3.org/ns/shacl#class"

LENIENCIES = ("lenient", "strict")
DIRECTIONS = ("undirected", "directed")


class UnknownIriError(ValueError):
    """Graphlet references a class or property the schema does not know."""


class GraphletValidationError(ValueError):
    """Compilation requested for a graphlet that fails validation."""

    def __init__(self, report: "ValidationReport"):
        failed = []
        if not report.condition1_ok:
            failed.append("domain-inclusion condition")
        if not report.condition2_ok:
            failed.append("connectivity condition")
        super().__init__("graphlet failed " + " and ".join(failed))
        self.report = report


@dataclass(frozen=True)
class Graphlet:
    """A pair of class IRIs and property IRIs describing a reusable subgraph shape."""

    classes: frozenset[str]
    properties: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.classes:
            raise ValueError("graphlet needs at least one class")
        if not self.properties and len(self.classes) > 1:
            raise ValueError("multi-class graphlet needs at least one property")

    def to_json(self) -> dict:
        return {"classes": sorted(self.classes), "properties": sorted(self.properties)}

    @classmethod
    def from_json(cls, doc: dict) -> "Graphlet":
        return cls(frozenset(doc["classes"]), frozenset(doc.get("properties", ())))


@dataclass(frozen=True)
class ValidationReport:
    condition1_ok: bool
    condition1_failures: tuple[tuple[str, frozenset[str]], ...]
    condition2_ok: bool
    # witness chains are property IRIs; a step traversed against its direction
    # (undirected mode only) is prefixed with '^'
    connectivity_witnesses: dict[tuple[str, str], tuple[str, ...]]
    mode: tuple[str, str]

    @property
    def ok(self) -> bool:
        return self.condition1_ok and self.condition2_ok

    def to_json(self) -> dict:
        return {
            "mode": list(self.mode),
            "condition1_ok": self.condition1_ok,
            "condition1_failures": [
                {"property": p, "domain": sorted(d)} for p, d in self.condition1_failures
            ],
            "condition2_ok": self.condition2_ok,
            "connectivity_witnesses": [
                {"from": a, "to": b, "chain": list(chain)}
                for (a, b), chain in sorted(self.connectivity_witnesses.items())
            ],
            "ok": self.ok,
        }


@dataclass(frozen=True)
class GraphletInstance:
    """A concrete rooted subgraph instantiating a graphlet."""

    root: Term
    triples: frozenset[Triple]
    graphlet: Graphlet

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples, key=triple_sort_key)

    def to_json(self) -> dict:
        return {
            "root": serialize_term(self.root),
            "graphlet": self.graphlet.to_json(),
            "triples": [serialize_triple(t) for t in self.sorted_triples()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GraphletInstance":
        root, _ = scan_term(doc["root"], 0)
        graph = parse_ntriples("\n".join(doc["triples"]))
        return cls(root, graph.triples, Graphlet.from_json(doc["graphlet"]))


# ---------------------------------------------------------------------------
# validation

def _check_known(graphlet: Graphlet, schema: Schema) -> None:
    unknown = sorted(c for c in graphlet.classes if c not in schema.classes)
    unknown += sorted(p for p in graphlet.properties if not schema.knows_property(p))
    if unknown:
        raise UnknownIriError(f"schema does not know: {', '.join(unknown)}")


def _class_edges(
    graphlet: Graphlet, schema: Schema, undirected: bool
) -> dict[str, list[tuple[str, str]]]:
    """Adjacency over the graphlet's classes: node -> sorted (step, next) pairs.

    Steps are property IRIs; reverse traversal (undirected only) marks the
    step with a '^' prefix. Edges exist per property from every domain class
    in the graphlet to every range class in the graphlet.
    """
    adj: dict[str, set[tuple[str, str]]] = {c: set() for c in graphlet.classes}
    for p in graphlet.properties:
        doms = schema.domain(p) & graphlet.classes
        rngs = schema.range(p) & graphlet.classes
        for d in doms:
            for r in rngs:
                adj[d].add((p, r))
                if undirected:
                    adj[r].add(("^" + p, d))
    return {c: sorted(steps) for c, steps in adj.items()}


def _shortest_chains(
    start: str, adj: dict[str, list[tuple[str, str]]]
) -> dict[str, tuple[str, ...]]:
    """Shortest witness chain from ``start`` to every reachable class; ties are
    broken by the lexicographically smallest step sequence."""
    best: dict[str, tuple[str, ...]] = {}
    heap: list[tuple[int, tuple[str, ...], str]] = [(0, (), start)]
    while heap:
        dist, chain, node = heapq.heappop(heap)
        if node in best:
            continue
        best[node] = chain
        for step, nxt in adj.get(node, ()):
            if nxt not in best:
                heapq.heappush(heap, (dist + 1, chain + (step,), nxt))
    return best


def validate(
    graphlet: Graphlet,
    schema: Schema,
    leniency: str = "lenient",
    direction: str = "undirected",
) -> ValidationReport:
    """Check the domain-inclusion and connectivity conditions.

    Condition 1, lenient: every property's domain intersects the class set;
    strict: the domain is a subset of the class set. Condition 2, undirected:
    the class graph is weakly connected; directed: every ordered pair of
    distinct classes is linked by a directed property chain.
    """
    if leniency not in LENIENCIES:
        raise ValueError(f"leniency must be one of {LENIENCIES}, got {leniency!r}")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    _check_known(graphlet, schema)

    failures: list[tuple[str, frozenset[str]]] = []
    for p in sorted(graphlet.properties):
        dom = schema.domain(p)
        ok = dom <= graphlet.classes if leniency == "strict" else bool(dom & graphlet.classes)
        if not ok:
            failures.append((p, dom))

    undirected = direction == "undirected"
    adj = _class_edges(graphlet, schema, undirected)
    witnesses: dict[tuple[str, str], tuple[str, ...]] = {}
    condition2_ok = True
    classes = sorted(graphlet.classes)
    for c1 in classes:
        chains = _shortest_chains(c1, adj)
        for c2 in classes:
            if c2 == c1:
                continue
            if undirected and c1 > c2:
                continue  # unordered pairs in undirected mode
            if c2 in chains:
                witnesses[(c1, c2)] = chains[c2]
            else:
                condition2_ok = False

    return ValidationReport(
        condition1_ok=not failures,
        condition1_failures=tuple(failures),
        condition2_ok=condition2_ok,
        connectivity_witnesses=witnesses,
        mode=(leniency, direction),
    )


# ---------------------------------------------------------------------------
# instance extraction

def extract_instance(
    graph: Graph,
    root: Term,
    graphlet: Graphlet,
    max_depth: int,
    rdf_type: str = RDF_TYPE,
    metadata_predicates: tuple[str, ...] = (RDFS_LABEL,),
) -> GraphletInstance:
    """Rooted subgraph around ``root``: entities within ``max_depth`` hops over
    the graphlet's properties (either direction), the property triples among
    them, and the type/metadata triples of every visited entity."""
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    if root not in graph.entities():
        raise ValueError(f"unknown root {serialize_term(root)}")

    adj: dict[Term, set[Term]] = {}
    for t in graph.triples:
        if t.predicate.value in graphlet.properties and t.object.kind != "literal":
            adj.setdefault(t.subject, set()).add(t.object)
            adj.setdefault(t.object, set()).add(t.subject)

    visited = {root}
    frontier = {root}
    for _ in range(max_depth):
        frontier = {n for e in frontier for n in adj.get(e, ()) if n not in visited}
        if not frontier:
            break
        visited |= frontier

    kept: set[Triple] = set()
    for t in graph.triples:
        p = t.predicate.value
        if t.subject in visited and (p == rdf_type or p in metadata_predicates):
            kept.add(t)
        elif (
            p in graphlet.properties
            and t.subject in visited
            and (t.object.kind == "literal" or t.object in visited)
        ):
            kept.add(t)
    return GraphletInstance(root, frozenset(kept), graphlet)


# ---------------------------------------------------------------------------
# dual views

def _variable_names(classes: frozenset[str]) -> dict[str, str]:
    names: dict[str, str] = {}
    taken: set[str] = set()
    for c in sorted(classes):
        base = re.sub(r"[^0-9a-z_]", "_", local_name(c).lower()) or "c"
        if base[0].isdigit():
            base = "c" + base
        name = base
        n = 2
        while name in taken:
            name = f"{base}_{n}"
            n += 1
        taken.add(name)
        names[c] = name
    return names


def to_pattern(graphlet: Graphlet, schema: Schema) -> Pattern:
    """Compile a valid graphlet into a connected basic graph pattern: one typed
    variable per class plus one edge pattern per property and class pair."""
    report = validate(graphlet, schema)
    if not report.ok:
        raise GraphletValidationError(report)
    names = _variable_names(graphlet.classes)
    rdf_type = Term.iri(RDF_TYPE)
    tps: list[tuple] = []
    for c in sorted(graphlet.classes):
        tps.append((Var(names[c]), rdf_type, Term.iri(c)))
    for p in sorted(graphlet.properties):
        doms = sorted(schema.domain(p) & graphlet.classes)
        rngs = sorted(schema.range(p) & graphlet.classes)
        for d in doms:
            for r in rngs:
                tps.append((Var(names[d]), Term.iri(p), Var(names[r])))
    select = tuple(names[c] for c in sorted(graphlet.classes))
    return Pattern(select, tuple(tps))


@dataclass(frozen=True)
class PropertyConstraint:
    path: str
    value_classes: tuple[str, ...]


@dataclass(frozen=True)
class NodeShape:
    iri: str
    target_class: str
    constraints: tuple[PropertyConstraint, ...]


@dataclass(frozen=True)
class ShapeSet:
    shapes: tuple[NodeShape, ...]

    def to_graph(self) -> Graph:
        triples: set[Triple] = set()
        counter = 0
        for shape in self.shapes:
            subj = Term.iri(shape.iri)
            triples.add(Triple(subj, Term.iri(RDF_TYPE), Term.iri(SH_NODE_SHAPE)))
            triples.add(Triple(subj, Term.iri(SH_TARGET_CLASS), Term.iri(shape.target_class)))
            for constraint in shape.constraints:
                bnode = Term.blank(f"c{counter}")
                counter += 1
                triples.add(Triple(subj, Term.iri(SH_PROPERTY), bnode))
                triples.add(Triple(bnode, Term.iri(SH_PATH), Term.iri(constraint.path)))
                for vc in constraint.value_classes:
                    triples.add(Triple(bnode, Term.iri(SH_CLASS), Term.iri(vc)))
        return Graph(frozenset(triples))


def to_shapes(graphlet: Graphlet, schema: Schema) -> ShapeSet:
    """Compile a valid graphlet into one node shape per class; each property
    whose domain contains the class yields a constraint whose value classes are
    the property's in-graphlet range (empty means unconstrained values)."""
    report = validate(graphlet, schema)
    if not report.ok:
        raise GraphletValidationError(report)
    shapes: list[NodeShape] = []
    for c in sorted(graphlet.classes):
        constraints = []
        for p in sorted(graphlet.properties):
            if c in schema.domain(p):
                value_classes = tuple(sorted(schema.range(p) & graphlet.classes))
                constraints.append(PropertyConstraint(p, value_classes))
        shapes.append(NodeShape(c + "Shape", c, tuple(constraints)))
    return ShapeSet(tuple(shapes))


def load_graphlet(path) -> Graphlet:
    with open(path, encoding="utf-8") as fh:
        return Graphlet.from_json(json.load(fh))
