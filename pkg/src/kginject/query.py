"""Basic-graph-pattern subset of SPARQL: parsing, evaluation, generation, endpoint client.

The grammar is ``SELECT ?v (?v)* WHERE { tp ( . tp)* (.)? }`` with terms as in
the store's N-Triples subset plus ``?name`` variables. Evaluation uses set
semantics: solutions are projected to the select variables, deduplicated, and
returned in a deterministic order.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass
from typing import Callable, Union

import requests

from .store import (
    Graph,
    ScanError,
    Term,
    Triple,
    scan_term,
    serialize_term,
    term_from_json,
)

Position = Union["Var", Term]
Binding = dict[str, Term]


class QuerySyntaxError(ValueError):
    """Query text rejected; message carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EndpointError(Exception):
    """Base class for endpoint-client failures."""


class EndpointNetworkError(EndpointError):
    pass


class EndpointTimeoutError(EndpointError):
    pass


class EndpointStatusError(EndpointError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"endpoint returned status {status}{': ' + detail if detail else ''}")
        self.status = status


class EndpointResultsError(EndpointError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.name):
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class Pattern:
    select_vars: tuple[str, ...]
    triple_patterns: tuple[tuple[Position, Position, Position], ...]

    def __post_init__(self):
        used = {p.name for tp in self.triple_patterns for p in tp if isinstance(p, Var)}
        for v in self.select_vars:
            if v not in used:
                raise ValueError(f"select variable ?{v} does not occur in the pattern")
        for s, p, o in self.triple_patterns:
            if isinstance(p, Term) and p.kind != "iri":
                raise ValueError("predicate positions must be variables or IRIs")
            if isinstance(s, Term) and s.kind == "literal":
                raise ValueError("subject positions must not be literals")

    def variables(self) -> set[str]:
        return {p.name for tp in self.triple_patterns for p in tp if isinstance(p, Var)}


# ---------------------------------------------------------------------------
# parsing

_VAR_RE = re.compile(r"\?([A-Za-z_][A-Za-z0-9_]*)")


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_keyword(self, word: str) -> bool:
        self.skip_ws()
        end = self.pos + len(word)
        if self.text[self.pos : end].upper() == word and (
            end >= len(self.text) or not self.text[end].isalnum()
        ):
            self.pos = end
            return True
        return False

    def take_char(self, c: str) -> bool:
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == c:
            self.pos += 1
            return True
        return False


def _parse_position(cur: _Cursor) -> Position:
    cur.skip_ws()
    if cur.pos < len(cur.text) and cur.text[cur.pos] == "?":
        m = _VAR_RE.match(cur.text, cur.pos)
        if not m:
            raise QuerySyntaxError("malformed variable", cur.pos)
        cur.pos = m.end()
        return Var(m.group(1))
    try:
        term, cur.pos = scan_term(cur.text, cur.pos)
    except ScanError as exc:
        raise QuerySyntaxError(str(exc), exc.pos) from None
    return term


def parse_query(text: str) -> Pattern:
    cur = _Cursor(text)
    if not cur.take_keyword("SELECT"):
        raise QuerySyntaxError("expected SELECT", cur.pos)
    select_vars: list[str] = []
    var_offsets: list[int] = []
    while cur.peek() == "?":
        cur.skip_ws()
        var_offsets.append(cur.pos)
        v = _parse_position(cur)
        select_vars.append(v.name)  # type: ignore[union-attr]
    if not select_vars:
        raise QuerySyntaxError("expected at least one select variable", cur.pos)
    if not cur.take_keyword("WHERE"):
        raise QuerySyntaxError("expected WHERE", cur.pos)
    if not cur.take_char("{"):
        raise QuerySyntaxError("expected '{'", cur.pos)
    patterns: list[tuple[Position, Position, Position]] = []
    while True:
        if cur.peek() == "}":
            break
        if cur.at_end():
            raise QuerySyntaxError("unterminated pattern block", cur.pos)
        s = _parse_position(cur)
        p = _parse_position(cur)
        o = _parse_position(cur)
        if isinstance(p, Term) and p.kind != "iri":
            raise QuerySyntaxError("predicate must be a variable or an IRI", cur.pos)
        if isinstance(s, Term) and s.kind == "literal":
            raise QuerySyntaxError("literal in subject position", cur.pos)
        patterns.append((s, p, o))
        if cur.take_char("."):
            continue
        if cur.peek() == "}":
            break
        raise QuerySyntaxError("expected '.' or '}'", cur.pos)
    if not cur.take_char("}"):
        raise QuerySyntaxError("expected '}'", cur.pos)
    if not patterns:
        raise QuerySyntaxError("empty pattern", cur.pos)
    if not cur.at_end():
        raise QuerySyntaxError("trailing content after query", cur.pos)
    used = {p.name for tp in patterns for p in tp if isinstance(p, Var)}
    for v, off in zip(select_vars, var_offsets):
        if v not in used:
            raise QuerySyntaxError(f"variable ?{v} in SELECT not used in WHERE", off)
    return Pattern(tuple(select_vars), tuple(patterns))


# ---------------------------------------------------------------------------
# evaluation

def _bound_count(tp: tuple[Position, Position, Position], bound: set[str]) -> int:
    n = 0
    for p in tp:
        if isinstance(p, Term) or (isinstance(p, Var) and p.name in bound):
            n += 1
    return n


def _plan(tps: tuple[tuple[Position, Position, Position], ...]) -> list[tuple[Position, Position, Position]]:
    # greedy: most-bound pattern first, counting variables bound by earlier picks
    remaining = list(range(len(tps)))
    bound: set[str] = set()
    order: list[int] = []
    while remaining:
        best = min(remaining, key=lambda i: (-_bound_count(tps[i], bound), i))
        order.append(best)
        remaining.remove(best)
        bound.update(p.name for p in tps[best] if isinstance(p, Var))
    return [tps[i] for i in order]


def _try_match(
    tp: tuple[Position, Position, Position], triple: Triple, binding: Binding
) -> Binding | None:
    new = None
    for pos, val in zip(tp, (triple.subject, triple.predicate, triple.object)):
        if isinstance(pos, Var):
            cur = binding.get(pos.name) if new is None else new.get(pos.name)
            if cur is None:
                if new is None:
                    new = dict(binding)
                new[pos.name] = val
            elif cur != val:
                return None
        elif pos != val:
            return None
    return new if new is not None else dict(binding)


def evaluate(pattern: Pattern, graph: Graph) -> list[Binding]:
    """All solution mappings of ``pattern`` over ``graph``, projected to the
    select variables, deduplicated, and sorted by their serialized terms."""
    planned = _plan(pattern.triple_patterns)
    triples = list(graph.triples)
    solutions: list[Binding] = []

    def walk(i: int, binding: Binding):
        if i == len(planned):
            solutions.append(binding)
            return
        for t in triples:
            nxt = _try_match(planned[i], t, binding)
            if nxt is not None:
                walk(i + 1, nxt)

    walk(0, {})
    seen: set[tuple[str, ...]] = set()
    projected: list[tuple[tuple[str, ...], Binding]] = []
    for sol in solutions:
        row = {v: sol[v] for v in pattern.select_vars}
        key = tuple(serialize_term(row[v]) for v in pattern.select_vars)
        if key not in seen:
            seen.add(key)
            projected.append((key, row))
    projected.sort(key=lambda kv: kv[0])
    return [row for _, row in projected]


def is_connected(pattern: Pattern) -> bool:
    """True iff the triple patterns form one component when linked by shared
    variables (any position) or shared constant subjects/objects."""
    tps = pattern.triple_patterns
    if not tps:
        raise ValueError("empty pattern")
    keys: list[set] = []
    for s, p, o in tps:
        k: set = set()
        for pos in (s, p, o):
            if isinstance(pos, Var):
                k.add(("var", pos.name))
        for pos in (s, o):
            if isinstance(pos, Term):
                k.add(("const", serialize_term(pos)))
        keys.append(k)
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(len(tps)):
            if j not in seen and keys[i] & keys[j]:
                seen.add(j)
                frontier.append(j)
    return len(seen) == len(tps)


# ---------------------------------------------------------------------------
# generation

def _serialize_position(p: Position) -> str:
    if isinstance(p, Var):
        return f"?{p.name}"
    return serialize_term(p)


def generate_sparql(pattern: Pattern) -> str:
    """Canonical query text; re-parsing it yields an equal Pattern."""
    head = "SELECT " + " ".join(f"?{v}" for v in pattern.select_vars) + " WHERE {"
    lines = [head]
    for s, p, o in pattern.triple_patterns:
        lines.append(f"  {_serialize_position(s)} {_serialize_position(p)} {_serialize_position(o)} .")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# endpoint client

Transport = Callable[[str, dict, bytes, float], tuple[int, bytes]]


def _requests_transport(url: str, headers: dict, body: bytes, timeout: float) -> tuple[int, bytes]:
    try:
        resp = requests.post(url, data=body, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise EndpointTimeoutError(str(exc)) from exc
    except requests.RequestException as exc:
        raise EndpointNetworkError(str(exc)) from exc
    return resp.status_code, resp.content


def decode_results(data: bytes) -> list[Binding]:
    """Decode a SPARQL results-JSON document into bindings."""
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise EndpointResultsError(f"malformed results JSON: {exc}") from None
    if not isinstance(doc, dict) or "head" not in doc or "results" not in doc:
        raise EndpointResultsError("results JSON missing head/results")
    rows = doc.get("results", {}).get("bindings")
    if not isinstance(rows, list):
        raise EndpointResultsError("results JSON missing results.bindings list")
    out: list[Binding] = []
    for row in rows:
        if not isinstance(row, dict):
            raise EndpointResultsError(f"binding row is not an object: {row!r}")
        binding: Binding = {}
        for var, tdoc in row.items():
            try:
                binding[var] = term_from_json(tdoc)
            except (ValueError, AttributeError) as exc:
                raise EndpointResultsError(f"bad term for ?{var}: {exc}") from None
        out.append(binding)
    return out


def _cache_path(cache_dir: str, query: str) -> str:
    digest = hashlib.sha256(query.encode("utf-8")).hexdigest()
    return os.path.join(cache_dir, f"{digest}.json")


def _atomic_write(path: str, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fetch_endpoint(
    endpoint_url: str,
    query: str,
    timeout: float = 30.0,
    transport: Transport | None = None,
    cache_dir: str | None = None,
) -> list[Binding]:
    """POST ``query`` to a SPARQL endpoint and decode the JSON results.

    With ``cache_dir`` set, responses are stored per query hash and replayed
    on later calls without touching the network.
    """
    if cache_dir is not None:
        path = _cache_path(cache_dir, query)
        if os.path.exists(path):
            with open(path, "rb") as fh:
                return decode_results(fh.read())
    send = transport or _requests_transport
    headers = {
        "Content-Type": "application/sparql-query",
        "Accept": "application/sparql-results+json",
    }
    status, body = send(endpoint_url, headers, query.encode("utf-8"), timeout)
    if status != 200:
        raise EndpointStatusError(status, body[:200].decode("utf-8", "replace"))
    results = decode_results(body)
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        _atomic_write(_cache_path(cache_dir, query), body)
    return results
