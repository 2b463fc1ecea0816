"""Line-oriented text formats.

Ontology documents::

    ontology ecg-a
    prefix a
    import c
    EquivClass(a:ECGDiagnosis, Code(a:loinc, "8601-7"))

Graph files hold one triple per line, ``(a:pax01 a:value "27"^^int)``.
Rule files hold one rule per line,
``rule R1: (?e type a:X), (?e a:p ?x) -> (?e c:q ?x)``; a ``!fresh(?x)`` item
in the head marks a created variable.
"""
from __future__ import annotations

import json
import re
from typing import Iterable

from .model import (
    RDF_TYPE,
    Axiom,
    ClassExpression,
    CodeRestriction,
    Complement,
    DataRange,
    Disjoint,
    Enumeration,
    EquivClass,
    EquivProperty,
    ExactlyOne,
    Exists,
    Graph,
    Intersection,
    Literal,
    Name,
    NamedClass,
    Ontology,
    PropertyDomain,
    PropertyRange,
    SameIndividual,
    SubClass,
    SubProperty,
    Triple,
    TriplePattern,
    ValueOnly,
    Var,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")(?:\^\^(?P<dtype>[A-Za-z:]+))?
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<var>\?[A-Za-z_][\w\-]*)
  | (?P<name>[A-Za-z_][\w\-]*(?::\w(?:[\w\-]*\w)?)?)
  | (?P<punct>->|<=|>=|==|[()\[\],.!:{}])
    """,
    re.VERBOSE,
)


class _Tokens:
    def __init__(self, text: str, line: int = 1, col_offset: int = 0):
        self.items = []
        self.line = line
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", line, pos + 1 + col_offset)
            kind = m.lastgroup if m.lastgroup != "dtype" else "string"
            if kind != "ws":
                if m.group("string") is not None:
                    kind = "string"
                self.items.append((kind, m, pos + 1 + col_offset))
            pos = m.end()
        self.i = 0
        self.end_col = len(text) + 1 + col_offset

    def peek(self, offset=0):
        j = self.i + offset
        if j < len(self.items):
            kind, m, _ = self.items[j]
            return kind, m.group(0) if kind != "string" else m.group("string")
        return ("eof", "")

    def column(self):
        if self.i < len(self.items):
            return self.items[self.i][2]
        return self.end_col

    def error(self, message):
        return ParseError(message, self.line, self.column())

    def next(self):
        if self.i >= len(self.items):
            raise self.error("unexpected end of line")
        item = self.items[self.i]
        self.i += 1
        return item

    def expect(self, value):
        kind, m, col = self.next()
        if m.group(0) != value:
            self.i -= 1
            raise self.error(f"expected {value!r}, found {m.group(0)!r}")

    def accept(self, value) -> bool:
        if self.i < len(self.items) and self.items[self.i][1].group(0) == value:
            self.i += 1
            return True
        return False

    def at_end(self):
        return self.i >= len(self.items)

    def finish(self):
        if not self.at_end():
            raise self.error(f"trailing input {self.items[self.i][1].group(0)!r}")


class _Context:
    """Namespace resolution for one document."""

    def __init__(self, default_prefix: str | None = None, namespaces=None):
        self.default_prefix = default_prefix
        self.namespaces = None if namespaces is None else set(namespaces) | {"xsd", "rdf"}

    def name(self, text: str, toks: _Tokens, col: int) -> Name:
        if ":" in text:
            prefix, local = text.split(":", 1)
        elif self.default_prefix is not None:
            prefix, local = self.default_prefix, text
        else:
            raise ParseError(f"name {text!r} has no namespace prefix", toks.line, col)
        if self.namespaces is not None and prefix not in self.namespaces:
            raise ParseError(f"undeclared namespace prefix {prefix!r}", toks.line, col)
        return Name(prefix, local)


def _read_name(toks: _Tokens, ctx: _Context) -> Name:
    kind, m, col = toks.next()
    if kind != "name":
        toks.i -= 1
        raise toks.error(f"expected a name, found {m.group(0)!r}")
    return ctx.name(m.group(0), toks, col)


def _unquote(text: str) -> str:
    return json.loads(text)


def _read_literal(toks: _Tokens) -> Literal:
    kind, m, col = toks.next()
    try:
        if kind == "string":
            lexical = _unquote(m.group("string"))
            dtype = m.group("dtype")
            if dtype:
                dtype = dtype.split(":")[-1]
                return Literal(lexical, dtype)
            return Literal(lexical, "string")
        if kind == "number":
            text = m.group(0)
            return Literal(text, "decimal" if "." in text else "int")
    except ValueError as exc:
        raise ParseError(str(exc), toks.line, col) from None
    toks.i -= 1
    raise toks.error(f"expected a literal, found {m.group(0)!r}")


def _read_comparator(toks: _Tokens) -> str:
    kind, m, col = toks.next()
    if kind == "string":
        value = _unquote(m.group("string"))
        value = {"≤": "<=", "≥": ">="}.get(value, value)
        if value in ("<", "<=", ">", ">=", "="):
            return value
    toks.i -= 1
    raise toks.error(f"expected a quoted comparator, found {m.group(0)!r}")


_CONSTRUCTORS = ("And", "Exists", "Code", "ExactlyOne", "Only", "Not", "OneOf", "Range")


def _read_expression(toks: _Tokens, ctx: _Context) -> ClassExpression:
    kind, value = toks.peek()
    if kind == "name" and value in _CONSTRUCTORS and toks.peek(1)[1] == "(":
        toks.next()
        toks.expect("(")
        if value == "And":
            ops = [_read_expression(toks, ctx)]
            while toks.accept(","):
                ops.append(_read_expression(toks, ctx))
            toks.expect(")")
            try:
                return Intersection(tuple(ops))
            except ValueError as exc:
                raise toks.error(str(exc)) from None
        if value == "Not":
            inner = _read_expression(toks, ctx)
            toks.expect(")")
            if not isinstance(inner, NamedClass):
                raise toks.error("Not() applies only to a named class")
            return Complement(inner)
        if value == "OneOf":
            inds = [_read_name(toks, ctx)]
            while toks.accept(","):
                inds.append(_read_name(toks, ctx))
            toks.expect(")")
            return Enumeration(tuple(inds))
        prop = _read_name(toks, ctx)
        toks.expect(",")
        if value == "Code":
            lit = _read_literal(toks)
            toks.expect(")")
            return CodeRestriction(prop, lit)
        if value == "Range":
            cmp = _read_comparator(toks)
            toks.expect(",")
            bound = _read_literal(toks)
            toks.expect(")")
            return DataRange(prop, cmp, bound)
        filler = _read_expression(toks, ctx)
        toks.expect(")")
        cls = {"Exists": Exists, "ExactlyOne": ExactlyOne, "Only": ValueOnly}[value]
        return cls(prop, filler)
    return NamedClass(_read_name(toks, ctx))


_AXIOMS = {
    "SubClass": (SubClass, "expr"),
    "EquivClass": (EquivClass, "expr"),
    "SubProperty": (SubProperty, "name"),
    "EquivProperty": (EquivProperty, "name"),
    "Disjoint": (Disjoint, "name"),
    "SameIndividual": (SameIndividual, "name"),
    "PropertyDomain": (PropertyDomain, "name"),
    "PropertyRange": (PropertyRange, "name"),
}


def _read_axiom(toks: _Tokens, ctx: _Context) -> Axiom:
    kind, m, col = toks.next()
    entry = _AXIOMS.get(m.group(0)) if kind == "name" else None
    if entry is None:
        toks.i -= 1
        raise toks.error(f"unknown axiom {m.group(0)!r}")
    cls, arg = entry
    toks.expect("(")
    read = _read_expression if arg == "expr" else _read_name
    first = read(toks, ctx)
    toks.expect(",")
    second = read(toks, ctx)
    toks.expect(")")
    return cls(first, second)


def parse_axiom(text: str, default_prefix: str | None = None, namespaces=None) -> Axiom:
    toks = _Tokens(text)
    ax = _read_axiom(toks, _Context(default_prefix, namespaces))
    toks.finish()
    return ax


def parse_expression(text: str, default_prefix: str | None = None) -> ClassExpression:
    toks = _Tokens(text)
    expr = _read_expression(toks, _Context(default_prefix))
    toks.finish()
    return expr


def _strip_comment(line: str) -> str:
    # '#' only starts a comment outside string literals
    in_string = escaped = False
    for i, ch in enumerate(line):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "#":
            return line[:i]
    return line


def parse_ontology(text: str) -> Ontology:
    """Parse an ontology document; raises ParseError with line/column."""
    ident, prefix, imports, axioms = None, None, [], []
    pending = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "ontology":
            if ident is not None:
                raise ParseError("duplicate ontology header", lineno, 1)
            ident = rest
        elif head == "prefix":
            if prefix is not None:
                raise ParseError("duplicate prefix header", lineno, 1)
            prefix = rest
        elif head == "import":
            imports.append(rest)
        else:
            pending.append((lineno, raw))
    if ident is None:
        raise ParseError("missing 'ontology <id>' header", 1, 1)
    if prefix is None:
        raise ParseError("missing 'prefix <tag>' header", 1, 1)
    ctx = _Context(prefix, [prefix, *imports])
    for lineno, raw in pending:
        line = _strip_comment(raw)
        indent = len(line) - len(line.lstrip())
        toks = _Tokens(line.strip(), lineno, indent)
        axioms.append(_read_axiom(toks, ctx))
        toks.finish()
    return Ontology(ident, prefix, frozenset(axioms), tuple(imports))


# -- rendering ---------------------------------------------------------------


def render_literal(lit: Literal, typed: bool = False) -> str:
    quoted = json.dumps(lit.lexical, ensure_ascii=False)
    if lit.datatype == "string":
        return quoted
    if lit.datatype == "int" and not typed:
        return lit.lexical
    if lit.datatype == "decimal" and not typed:
        return lit.lexical if "." in lit.lexical else lit.lexical + ".0"
    return f"{quoted}^^{lit.datatype}"


def render_expression(expr: ClassExpression) -> str:
    if isinstance(expr, NamedClass):
        return str(expr.name)
    if isinstance(expr, Intersection):
        return "And(" + ", ".join(render_expression(op) for op in expr.operands) + ")"
    if isinstance(expr, Exists):
        return f"Exists({expr.property}, {render_expression(expr.filler)})"
    if isinstance(expr, CodeRestriction):
        return f"Code({expr.property}, {render_literal(expr.literal)})"
    if isinstance(expr, ExactlyOne):
        return f"ExactlyOne({expr.property}, {render_expression(expr.filler)})"
    if isinstance(expr, ValueOnly):
        return f"Only({expr.property}, {render_expression(expr.filler)})"
    if isinstance(expr, Complement):
        return f"Not({expr.operand.name})"
    if isinstance(expr, Enumeration):
        return "OneOf(" + ", ".join(str(i) for i in expr.individuals) + ")"
    if isinstance(expr, DataRange):
        return f"Range({expr.property}, {json.dumps(expr.comparator)}, {render_literal(expr.bound)})"
    raise TypeError(f"not a class expression: {expr!r}")


def render_axiom(ax: Axiom) -> str:
    tag = type(ax).__name__
    if isinstance(ax, (SubClass, EquivClass)):
        a, b = ax.expressions()
        return f"{tag}({render_expression(a)}, {render_expression(b)})"
    a, b = list(ax.names())
    return f"{tag}({a}, {b})"


def axiom_sort_key(ax: Axiom):
    return (ax.kind_order, render_axiom(ax))


def serialize_axioms(axioms: Iterable[Axiom]) -> list:
    return [render_axiom(ax) for ax in sorted(axioms, key=axiom_sort_key)]


def serialize_ontology(o: Ontology) -> str:
    lines = [f"ontology {o.id}", f"prefix {o.prefix}"]
    lines += [f"import {tag}" for tag in o.imports]
    lines += serialize_axioms(o.axioms)
    return "\n".join(lines) + "\n"


# -- triples, patterns and graph files ----------------------------------------


def render_term(term, typed: bool = True) -> str:
    if isinstance(term, Literal):
        return render_literal(term, typed=typed)
    if term == RDF_TYPE:
        return "type"
    return str(term)


def render_triple(t) -> str:
    return f"({render_term(t.subject)} {render_term(t.predicate)} {render_term(t.object)})"


def _read_term(toks: _Tokens, ctx: _Context, allow_vars: bool, allow_literal: bool):
    kind, value = toks.peek()
    if kind == "var":
        if not allow_vars:
            raise toks.error("variables are not allowed here")
        toks.next()
        return Var(value[1:])
    if kind in ("string", "number"):
        if not allow_literal:
            raise toks.error("literal not allowed in this position")
        return _read_literal(toks)
    if kind == "name" and value == "type":
        toks.next()
        return RDF_TYPE
    return _read_name(toks, ctx)


def _read_triple(toks: _Tokens, ctx: _Context, allow_vars: bool):
    toks.expect("(")
    s = _read_term(toks, ctx, allow_vars, False)
    p = _read_term(toks, ctx, allow_vars, False)
    o = _read_term(toks, ctx, allow_vars, True)
    toks.expect(")")
    if allow_vars:
        return TriplePattern(s, p, o)
    return Triple(s, p, o)


def parse_triple(text: str) -> Triple:
    toks = _Tokens(text.strip())
    t = _read_triple(toks, _Context(), False)
    toks.finish()
    return t


def parse_patterns(text: str) -> list:
    """Parse a comma-separated pattern list such as ``(?e type a:X), (?e a:p ?x)``."""
    toks = _Tokens(text.strip())
    out = [_read_triple(toks, _Context(), True)]
    while toks.accept(","):
        out.append(_read_triple(toks, _Context(), True))
    toks.finish()
    return out


def parse_graph(text: str) -> Graph:
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        toks = _Tokens(line, lineno)
        triples.append(_read_triple(toks, _Context(), False))
        toks.finish()
    return Graph(frozenset(triples))


def serialize_graph(g: Graph) -> str:
    return "".join(render_triple(t) + "\n" for t in g.sorted())


# -- rules -------------------------------------------------------------------


def render_rule(rule) -> str:
    body = ", ".join(render_triple(p) for p in rule.body)
    head = [render_triple(p) for p in rule.head]
    head += [f"!fresh(?{v})" for v in rule.creates]
    return f"rule {rule.id}: {body} -> {', '.join(head)}"


def parse_rule(text: str, lineno: int = 1):
    from .reasoner import HornRule

    line = text.strip()
    if not line.startswith("rule "):
        raise ParseError("rule lines start with 'rule'", lineno, 1)
    header, sep, rest = line[5:].partition(":")
    if not sep or not header.strip():
        raise ParseError("missing rule id", lineno, 6)
    col = 6 + len(header) + 1
    toks = _Tokens(rest, lineno, col)
    ctx = _Context()
    body = [_read_triple(toks, ctx, True)]
    while toks.accept(","):
        body.append(_read_triple(toks, ctx, True))
    toks.expect("->")
    head, creates = [], []
    while True:
        if toks.accept("!"):
            kind, m, c = toks.next()
            if m.group(0) != "fresh":
                raise ParseError("only !fresh(?var) is supported", lineno, c)
            toks.expect("(")
            kind, m, c = toks.next()
            if kind != "var":
                raise ParseError("!fresh expects a variable", lineno, c)
            creates.append(m.group(0)[1:])
            toks.expect(")")
        else:
            head.append(_read_triple(toks, ctx, True))
        if not toks.accept(","):
            break
    toks.finish()
    try:
        return HornRule(header.strip(), tuple(body), tuple(head), tuple(creates))
    except ValueError as exc:
        raise ParseError(str(exc), lineno, 1) from None


def parse_rules(text: str) -> list:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if line:
            rules.append(parse_rule(line, lineno))
    return rules


def serialize_rules(rules) -> str:
    return "".join(render_rule(r) + "\n" for r in rules)


# -- ontology paths ----------------------------------------------------------


def render_path(path) -> str:
    return str(path.start) + "".join(f".{p}[{c}]" for p, c in path.steps)


def _read_path(toks: _Tokens, ctx: _Context):
    from .mapping import OntologyPath

    start = _read_name(toks, ctx)
    steps = []
    while toks.accept("."):
        prop = _read_name(toks, ctx)
        toks.accept(".")
        toks.expect("[")
        end = _read_name(toks, ctx)
        toks.expect("]")
        steps.append((prop, end))
    if not steps:
        raise toks.error("a path needs at least one property step")
    return OntologyPath(start, tuple(steps))


def parse_path(text: str):
    toks = _Tokens(text.strip())
    path = _read_path(toks, _Context())
    toks.finish()
    return path


DIRECTIONS = {"<=": "sub", ">=": "sup", "==": "equiv"}
DIRECTION_SYMBOLS = {v: k for k, v in DIRECTIONS.items()}


def parse_path_pair(text: str, lineno: int = 1):
    """Parse ``<path> <dir> <path> [provenance]`` returning (left, dir, right, provenance)."""
    toks = _Tokens(text.strip(), lineno)
    ctx = _Context()
    left = _read_path(toks, ctx)
    kind, m, col = toks.next()
    direction = DIRECTIONS.get(m.group(0))
    if direction is None:
        raise ParseError(f"expected one of <=, >=, ==, found {m.group(0)!r}", lineno, col)
    right = _read_path(toks, ctx)
    provenance = None
    if not toks.at_end():
        kind, m, col = toks.next()
        provenance = m.group(0)
    toks.finish()
    return left, direction, right, provenance
