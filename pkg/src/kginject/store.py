"""Immutable in-memory triple store: N-Triples-subset parsing and schema inference.

The store accepts a deliberately small N-Triples subset (one triple per line,
absolute IRIs in angle brackets, quoted literals with optional ``^^<dt>`` or
``@lang``, ``_:name`` blank nodes, ``#`` comments). Graphs and schemas are
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

_BLANK_LABEL = re.compile(r"[A-Za-z0-9_]+")
_LANG_TAG = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*")
# characters N-Triples forbids inside an IRIREF (plus whitespace, checked separately)
_IRI_FORBIDDEN = set('<>"{}|^`\\')


class ParseError(ValueError):
    """Malformed N-Triples input; message carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message}, line {line}")
        self.line = line


class SchemaError(ValueError):
    """Invalid explicit domain/range declaration."""


class ScanError(ValueError):
    """Internal: malformed term at a character offset; wrapped by callers."""

    def __init__(self, message: str, pos: int):
        super().__init__(message)
        self.pos = pos


@dataclass(frozen=True)
class Term:
    """An RDF term: IRI, literal, or blank node.

    ``value`` holds the IRI string, the literal lexical form, or the blank
    node label depending on ``kind``.
    """

    kind: str  # "iri" | "literal" | "blank"
    value: str
    datatype: str | None = None
    lang: str | None = None

    def __post_init__(self):
        if self.kind == "iri":
            _check_iri(self.value)
        elif self.kind == "literal":
            if self.datatype is not None and self.lang is not None:
                raise ValueError("literal cannot carry both a datatype and a language tag")
            if self.datatype is not None:
                _check_iri(self.datatype)
            if self.lang is not None and not _LANG_TAG.fullmatch(self.lang):
                raise ValueError(f"invalid language tag {self.lang!r}")
        elif self.kind == "blank":
            if not _BLANK_LABEL.fullmatch(self.value):
                raise ValueError(f"invalid blank node label {self.value!r}")
        else:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind != "literal" and (self.datatype is not None or self.lang is not None):
            raise ValueError("only literals carry a datatype or language tag")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls("iri", value)

    @classmethod
    def literal(cls, value: str, datatype: str | None = None, lang: str | None = None) -> "Term":
        return cls("literal", value, datatype, lang)

    @classmethod
    def blank(cls, label: str) -> "Term":
        return cls("blank", label)


def _check_iri(value: str) -> None:
    if not value:
        raise ValueError("IRI must be non-empty")
    for c in value:
        if c.isspace() or c in _IRI_FORBIDDEN or ord(c) < 0x20:
            raise ValueError(f"invalid character {c!r} in IRI {value!r}")


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if self.predicate.kind != "iri":
            raise ValueError("predicate must be an IRI")
        if self.subject.kind == "literal":
            raise ValueError("subject must not be a literal")


@dataclass(frozen=True)
class Schema:
    """Classes plus per-property domain/range sets, inferred or declared.

    ``explicit`` records (property, role, class) entries that came from
    declarations rather than instance data; role is ``"domain"`` or
    ``"range"``.
    """

    classes: frozenset[str] = frozenset()
    property_domains: dict[str, frozenset[str]] = field(default_factory=dict)
    property_ranges: dict[str, frozenset[str]] = field(default_factory=dict)
    explicit: frozenset[tuple[str, str, str]] = frozenset()

    def domain(self, prop: str) -> frozenset[str]:
        return self.property_domains.get(prop, frozenset())

    def range(self, prop: str) -> frozenset[str]:
        return self.property_ranges.get(prop, frozenset())

    def knows_property(self, prop: str) -> bool:
        return prop in self.property_domains or prop in self.property_ranges

    def to_json(self) -> dict:
        return {
            "classes": sorted(self.classes),
            "property_domains": {p: sorted(v) for p, v in sorted(self.property_domains.items())},
            "property_ranges": {p: sorted(v) for p, v in sorted(self.property_ranges.items())},
            "explicit": sorted(list(e) for e in self.explicit),
        }


@dataclass(frozen=True)
class Graph:
    """An immutable set of triples; the schema is derived lazily and cached."""

    triples: frozenset[Triple] = frozenset()

    @cached_property
    def schema(self) -> Schema:
        return infer_schema(self)

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triples

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples, key=triple_sort_key)

    def entities(self) -> set[Term]:
        """All terms usable as traversal nodes (subjects plus non-literal objects)."""
        out: set[Term] = set()
        for t in self.triples:
            out.add(t.subject)
            if t.object.kind != "literal":
                out.add(t.object)
        return out


def triple_sort_key(t: Triple) -> tuple[str, str, str]:
    return (serialize_term(t.subject), serialize_term(t.predicate), serialize_term(t.object))


# ---------------------------------------------------------------------------
# serialization

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def serialize_term(term: Term) -> str:
    if term.kind == "iri":
        return f"<{term.value}>"
    if term.kind == "blank":
        return f"_:{term.value}"
    out = f'"{_escape(term.value)}"'
    if term.datatype is not None:
        out += f"^^<{term.datatype}>"
    elif term.lang is not None:
        out += f"@{term.lang}"
    return out


def serialize_triple(t: Triple) -> str:
    return f"{serialize_term(t.subject)} {serialize_term(t.predicate)} {serialize_term(t.object)} ."


def serialize_graph(graph: Graph) -> str:
    lines = [serialize_triple(t) for t in graph.sorted_triples()]
    return "\n".join(lines) + ("\n" if lines else "")


def local_name(iri: str) -> str:
    """Human-oriented tail of an IRI: the part after the last '#', '/' or ':'."""
    for sep in ("#", "/", ":"):
        idx = iri.rfind(sep)
        if idx >= 0 and idx < len(iri) - 1:
            return iri[idx + 1 :]
    return iri


# ---------------------------------------------------------------------------
# parsing

def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t":
        pos += 1
    return pos


def scan_term(text: str, pos: int) -> tuple[Term, int]:
    """Scan one term at ``pos``; returns (term, next position). Raises ScanError."""
    if pos >= len(text):
        raise ScanError("unexpected end of input, expected a term", pos)
    c = text[pos]
    if c == "<":
        end = text.find(">", pos + 1)
        if end < 0:
            raise ScanError("unterminated IRI", pos)
        value = text[pos + 1 : end]
        try:
            return Term.iri(value), end + 1
        except ValueError as exc:
            raise ScanError(str(exc), pos) from None
    if c == "_":
        if pos + 1 >= len(text) or text[pos + 1] != ":":
            raise ScanError("malformed blank node, expected '_:'", pos)
        m = _BLANK_LABEL.match(text, pos + 2)
        if not m:
            raise ScanError("malformed blank node label", pos)
        return Term.blank(m.group()), m.end()
    if c == '"':
        return _scan_literal(text, pos)
    raise ScanError(f"malformed term starting with {c!r}", pos)


def _scan_literal(text: str, pos: int) -> tuple[Term, int]:
    chars: list[str] = []
    i = pos + 1
    while True:
        if i >= len(text):
            raise ScanError("unterminated literal", pos)
        c = text[i]
        if c == '"':
            i += 1
            break
        if c == "\\":
            if i + 1 >= len(text):
                raise ScanError("dangling escape in literal", i)
            nxt = text[i + 1]
            if nxt in _UNESCAPES:
                chars.append(_UNESCAPES[nxt])
                i += 2
            elif nxt in ("u", "U"):
                width = 4 if nxt == "u" else 8
                hexpart = text[i + 2 : i + 2 + width]
                if len(hexpart) != width or not all(h in "0123456789abcdefABCDEF" for h in hexpart):
                    raise ScanError("malformed unicode escape in literal", i)
                chars.append(chr(int(hexpart, 16)))
                i += 2 + width
            else:
                raise ScanError(f"unknown escape '\\{nxt}' in literal", i)
        else:
            chars.append(c)
            i += 1
    value = "".join(chars)
    datatype = None
    lang = None
    if text.startswith("^^", i):
        if i + 2 >= len(text) or text[i + 2] != "<":
            raise ScanError("malformed datatype, expected '^^<iri>'", i)
        end = text.find(">", i + 3)
        if end < 0:
            raise ScanError("unterminated datatype IRI", i)
        datatype = text[i + 3 : end]
        i = end + 1
    elif i < len(text) and text[i] == "@":
        m = _LANG_TAG.match(text, i + 1)
        if not m:
            raise ScanError("malformed language tag", i)
        lang = m.group()
        i = m.end()
    try:
        return Term.literal(value, datatype, lang), i
    except ValueError as exc:
        raise ScanError(str(exc), pos) from None


def _parse_line(line: str, lineno: int) -> Triple:
    def term_at(pos: int, role: str) -> tuple[Term, int]:
        try:
            return scan_term(line, pos)
        except ScanError as exc:
            raise ParseError(f"{exc} in {role} position", lineno) from None

    pos = _skip_ws(line, 0)
    subject, pos = term_at(pos, "subject")
    if subject.kind == "literal":
        raise ParseError("literal in subject position", lineno)
    pos = _skip_ws(line, pos)
    predicate, pos = term_at(pos, "predicate")
    if predicate.kind != "iri":
        raise ParseError(f"{predicate.kind} node in predicate position", lineno)
    pos = _skip_ws(line, pos)
    object_, pos = term_at(pos, "object")
    pos = _skip_ws(line, pos)
    if pos >= len(line) or line[pos] != ".":
        raise ParseError("missing terminal dot", lineno)
    pos = _skip_ws(line, pos + 1)
    if pos != len(line):
        raise ParseError("trailing content after terminal dot", lineno)
    return Triple(subject, predicate, object_)


def parse_ntriples(text: str) -> Graph:
    """Parse the N-Triples subset; duplicate lines collapse to one triple."""
    triples: set[Triple] = set()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        triples.add(_parse_line(raw, lineno))
    return Graph(frozenset(triples))


def load_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_ntriples(fh.read())


# ---------------------------------------------------------------------------
# schema inference

def infer_schema(
    graph: Graph,
    declarations: Iterable[tuple[str, str, str]] | None = None,
    rdf_type: str = RDF_TYPE,
) -> Schema:
    """Collect classes and per-property domain/range sets from instance data.

    Classes are the IRI objects of ``rdf_type`` triples. A property's inferred
    domain is the set of classes of its observed subjects; its inferred range
    is the set of classes of its observed IRI objects (literals contribute no
    range class, and untyped entities contribute nothing). Explicit
    ``(property, "domain"|"range", class)`` declarations augment the inferred
    sets and are flagged in ``Schema.explicit``.
    """
    types: dict[Term, set[str]] = {}
    classes: set[str] = set()
    for t in graph.triples:
        if t.predicate.value == rdf_type and t.object.kind == "iri":
            classes.add(t.object.value)
            types.setdefault(t.subject, set()).add(t.object.value)

    domains: dict[str, set[str]] = {}
    ranges: dict[str, set[str]] = {}
    for t in graph.triples:
        p = t.predicate.value
        domains.setdefault(p, set()).update(types.get(t.subject, ()))
        rng = ranges.setdefault(p, set())
        if t.object.kind == "iri":
            rng.update(types.get(t.object, ()))

    explicit: set[tuple[str, str, str]] = set()
    for decl in declarations or ():
        try:
            prop, role, cls = decl
        except (TypeError, ValueError):
            raise SchemaError(f"declaration must be (property, role, class), got {decl!r}") from None
        if role not in ("domain", "range"):
            raise SchemaError(f"declaration role must be 'domain' or 'range', got {role!r}")
        for iri in (prop, cls):
            try:
                _check_iri(iri if isinstance(iri, str) else "")
            except ValueError as exc:
                raise SchemaError(f"declaration references a non-IRI: {exc}") from None
        classes.add(cls)
        domains.setdefault(prop, set())
        ranges.setdefault(prop, set())
        (domains if role == "domain" else ranges)[prop].add(cls)
        explicit.add((prop, role, cls))

    return Schema(
        classes=frozenset(classes),
        property_domains={p: frozenset(domains[p]) for p in sorted(domains)},
        property_ranges={p: frozenset(ranges[p]) for p in sorted(ranges)},
        explicit=frozenset(explicit),
    )


def triples_about(graph: Graph, entity: Term, direction: str = "both") -> list[Triple]:
    """Triples with ``entity`` in subject (out), object (in), or either position."""
    if entity.kind == "literal":
        raise ValueError("literal entity has no triples about it")
    if direction not in ("out", "in", "both"):
        raise ValueError(f"direction must be out, in or both, got {direction!r}")
    hits: set[Triple] = set()
    for t in graph.triples:
        if direction in ("out", "both") and t.subject == entity:
            hits.add(t)
        if direction in ("in", "both") and t.object == entity:
            hits.add(t)
    return sorted(hits, key=triple_sort_key)


# ---------------------------------------------------------------------------
# JSON term codec (SPARQL-results style), shared by query results and the CLI

def term_to_json(term: Term) -> dict:
    if term.kind == "iri":
        return {"type": "uri", "value": term.value}
    if term.kind == "blank":
        return {"type": "bnode", "value": term.value}
    out: dict = {"type": "literal", "value": term.value}
    if term.datatype is not None:
        out["datatype"] = term.datatype
    if term.lang is not None:
        out["xml:lang"] = term.lang
    return out


def term_from_json(doc: dict) -> Term:
    kind = doc.get("type")
    value = doc.get("value")
    if not isinstance(value, str):
        raise ValueError(f"term document missing string 'value': {doc!r}")
    if kind == "uri":
        return Term.iri(value)
    if kind == "bnode":
        return Term.blank(value)
    if kind == "literal":
        return Term.literal(value, doc.get("datatype"), doc.get("xml:lang"))
    raise ValueError(f"unknown term type {kind!r}")
