"""Core value types: names, literals, class expressions, axioms, triples.

Everything here is immutable and hashable so ontologies and graphs can be
shared freely and used as set members.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from datetime import date
from typing import Iterable, Iterator, Mapping, Union

DATATYPES = ("string", "int", "decimal", "boolean", "date")
COMPARATORS = ("<", "<=", ">", ">=", "=")


@dataclass(frozen=True, order=True)
class Name:
    prefix: str
    local: str

    def __post_init__(self):
        if not self.local:
            raise ValueError("empty local name")

    def __str__(self):
        return f"{self.prefix}:{self.local}"

    def in_namespace(self, prefix: str) -> "Name":
        return Name(prefix, self.local)


def xsd(datatype: str) -> Name:
    return Name("xsd", datatype)


RDF_TYPE = Name("rdf", "type")


def is_datatype_name(name: Name) -> bool:
    return name.prefix == "xsd"


@dataclass(frozen=True, order=True)
class Literal:
    lexical: str
    datatype: str = "string"

    def __post_init__(self):
        if self.datatype not in DATATYPES:
            raise ValueError(f"unknown datatype {self.datatype!r}")
        # normalise numeric lexical forms so 027 and 27 are one literal
        if self.datatype == "int":
            object.__setattr__(self, "lexical", str(int(self.lexical)))
        elif self.datatype == "decimal":
            try:
                value = Decimal(self.lexical)
            except InvalidOperation:
                raise ValueError(f"bad decimal {self.lexical!r}") from None
            object.__setattr__(self, "lexical", format(value.normalize(), "f"))
        elif self.datatype == "boolean":
            if self.lexical not in ("true", "false"):
                raise ValueError(f"bad boolean {self.lexical!r}")
        elif self.datatype == "date":
            date.fromisoformat(self.lexical)

    @classmethod
    def of(cls, value) -> "Literal":
        """Build a literal from a plain Python value."""
        if isinstance(value, Literal):
            return value
        if isinstance(value, bool):
            return cls("true" if value else "false", "boolean")
        if isinstance(value, int):
            return cls(str(value), "int")
        if isinstance(value, (float, Decimal)):
            return cls(str(value), "decimal")
        if isinstance(value, date):
            return cls(value.isoformat(), "date")
        return cls(str(value), "string")

    def python_value(self):
        if self.datatype == "int":
            return int(self.lexical)
        if self.datatype == "decimal":
            return Decimal(self.lexical)
        if self.datatype == "boolean":
            return self.lexical == "true"
        if self.datatype == "date":
            return date.fromisoformat(self.lexical)
        return self.lexical

    def compare(self, comparator: str, bound: "Literal") -> bool:
        """Evaluate ``self <comparator> bound``; incomparable values give False."""
        numeric = ("int", "decimal")
        if self.datatype in numeric and bound.datatype in numeric:
            left, right = Decimal(self.lexical), Decimal(bound.lexical)
        elif self.datatype == bound.datatype:
            left, right = self.python_value(), bound.python_value()
        else:
            return False
        if comparator == "<":
            return left < right
        if comparator == "<=":
            return left <= right
        if comparator == ">":
            return left > right
        if comparator == ">=":
            return left >= right
        if comparator == "=":
            return left == right
        raise ValueError(f"unknown comparator {comparator!r}")

    def __str__(self):
        return self.lexical


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self):
        return f"?{self.name}"


# -- class expressions -------------------------------------------------------


class ClassExpression:
    __slots__ = ()

    def names(self) -> Iterator[Name]:
        """Every Name mentioned by the expression (classes, properties, individuals)."""
        raise NotImplementedError

    def subexpressions(self) -> Iterator["ClassExpression"]:
        yield self


@dataclass(frozen=True)
class NamedClass(ClassExpression):
    name: Name

    def names(self):
        yield self.name


@dataclass(frozen=True)
class Intersection(ClassExpression):
    operands: tuple

    def __post_init__(self):
        flat = []
        for op in self.operands:
            if isinstance(op, Intersection):
                flat.extend(op.operands)
            else:
                flat.append(op)
        unique = sorted(set(flat), key=sort_key)
        if len(unique) < 2:
            raise ValueError("intersection needs at least two distinct operands")
        object.__setattr__(self, "operands", tuple(unique))

    def names(self):
        for op in self.operands:
            yield from op.names()

    def subexpressions(self):
        yield self
        for op in self.operands:
            yield from op.subexpressions()


def intersection(*operands: ClassExpression) -> ClassExpression:
    """And() that collapses to its operand when only one distinct operand remains."""
    unique = set()
    for op in operands:
        unique.update(op.operands if isinstance(op, Intersection) else (op,))
    if len(unique) == 1:
        return next(iter(unique))
    return Intersection(tuple(operands))


@dataclass(frozen=True)
class Exists(ClassExpression):
    property: Name
    filler: ClassExpression

    def names(self):
        yield self.property
        yield from self.filler.names()

    def subexpressions(self):
        yield self
        yield from self.filler.subexpressions()


@dataclass(frozen=True)
class CodeRestriction(ClassExpression):
    property: Name
    literal: Literal

    def names(self):
        yield self.property


@dataclass(frozen=True)
class ExactlyOne(ClassExpression):
    property: Name
    filler: ClassExpression

    def names(self):
        yield self.property
        yield from self.filler.names()

    def subexpressions(self):
        yield self
        yield from self.filler.subexpressions()


@dataclass(frozen=True)
class ValueOnly(ClassExpression):
    property: Name
    filler: ClassExpression

    def names(self):
        yield self.property
        yield from self.filler.names()

    def subexpressions(self):
        yield self
        yield from self.filler.subexpressions()


@dataclass(frozen=True)
class Complement(ClassExpression):
    operand: NamedClass

    def __post_init__(self):
        if not isinstance(self.operand, NamedClass):
            raise ValueError("complement applies only to named classes")

    def names(self):
        yield self.operand.name


@dataclass(frozen=True)
class Enumeration(ClassExpression):
    individuals: tuple

    def __post_init__(self):
        object.__setattr__(self, "individuals", tuple(sorted(set(self.individuals))))
        if not self.individuals:
            raise ValueError("empty enumeration")

    def names(self):
        yield from self.individuals


@dataclass(frozen=True)
class DataRange(ClassExpression):
    property: Name
    comparator: str
    bound: Literal

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")

    def names(self):
        yield self.property


def sort_key(expr) -> str:
    # rendering is total and deterministic, so it doubles as an ordering
    from .syntax import render_expression

    return render_expression(expr)


# -- axioms ------------------------------------------------------------------


class Axiom:
    __slots__ = ()
    kind_order = 0

    def names(self) -> Iterator[Name]:
        raise NotImplementedError

    def expressions(self) -> tuple:
        return ()


@dataclass(frozen=True)
class SubClass(Axiom):
    sub: ClassExpression
    sup: ClassExpression
    kind_order = 0

    def names(self):
        yield from self.sub.names()
        yield from self.sup.names()

    def expressions(self):
        return (self.sub, self.sup)


@dataclass(frozen=True)
class EquivClass(Axiom):
    first: ClassExpression
    second: ClassExpression
    kind_order = 1

    def names(self):
        yield from self.first.names()
        yield from self.second.names()

    def expressions(self):
        return (self.first, self.second)


@dataclass(frozen=True)
class SubProperty(Axiom):
    sub: Name
    sup: Name
    kind_order = 2

    def names(self):
        yield self.sub
        yield self.sup


@dataclass(frozen=True)
class EquivProperty(Axiom):
    first: Name
    second: Name
    kind_order = 3

    def names(self):
        yield self.first
        yield self.second


@dataclass(frozen=True)
class Disjoint(Axiom):
    first: Name
    second: Name
    kind_order = 4

    def names(self):
        yield self.first
        yield self.second


@dataclass(frozen=True)
class SameIndividual(Axiom):
    first: Name
    second: Name
    kind_order = 5

    def names(self):
        yield self.first
        yield self.second


@dataclass(frozen=True)
class PropertyDomain(Axiom):
    property: Name
    domain: Name
    kind_order = 6

    def names(self):
        yield self.property
        yield self.domain


@dataclass(frozen=True)
class PropertyRange(Axiom):
    property: Name
    range: Name
    kind_order = 7

    def names(self):
        yield self.property
        yield self.range


PROPERTY_AXIOMS = (SubProperty, EquivProperty)


@dataclass(frozen=True)
class Ontology:
    id: str
    prefix: str
    axioms: frozenset = frozenset()
    imports: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "axioms", frozenset(self.axioms))
        object.__setattr__(self, "imports", tuple(sorted(set(self.imports) - {self.prefix})))

    @property
    def namespaces(self) -> frozenset:
        return frozenset((self.prefix, *self.imports, "xsd"))

    def signature(self) -> frozenset:
        return frozenset(n for ax in self.axioms for n in ax.names())

    def classes(self) -> frozenset:
        found = set()
        for ax in self.axioms:
            if isinstance(ax, (SubClass, EquivClass)):
                for expr in ax.expressions():
                    for sub in expr.subexpressions():
                        if isinstance(sub, NamedClass) and not is_datatype_name(sub.name):
                            found.add(sub.name)
                        elif isinstance(sub, Complement):
                            found.add(sub.operand.name)
            elif isinstance(ax, Disjoint):
                found.update((ax.first, ax.second))
            elif isinstance(ax, PropertyDomain):
                found.add(ax.domain)
            elif isinstance(ax, PropertyRange) and not is_datatype_name(ax.range):
                found.add(ax.range)
        return frozenset(found)

    def properties(self) -> frozenset:
        found = set()
        for ax in self.axioms:
            if isinstance(ax, PROPERTY_AXIOMS):
                found.update(ax.names())
            elif isinstance(ax, (PropertyDomain, PropertyRange)):
                found.add(ax.property)
            for expr in ax.expressions():
                for sub in expr.subexpressions():
                    prop = getattr(sub, "property", None)
                    if prop is not None:
                        found.add(prop)
        return frozenset(found)

    def with_axioms(self, axioms: Iterable[Axiom]) -> "Ontology":
        return Ontology(self.id, self.prefix, frozenset(axioms), self.imports)


def merge_ontologies(id: str, prefix: str, *parts: Iterable[Axiom] | Ontology) -> Ontology:
    axioms, imports = set(), set()
    for part in parts:
        if isinstance(part, Ontology):
            axioms |= part.axioms
            imports |= part.namespaces
        else:
            axioms |= set(part)
    imports.discard("xsd")
    return Ontology(id, prefix, frozenset(axioms), tuple(imports))


# -- triples and graphs ------------------------------------------------------

Term = Union[Name, Literal]


@dataclass(frozen=True, order=True)
class Triple:
    subject: Name
    predicate: Name
    object: Term

    @property
    def is_type(self) -> bool:
        return self.predicate == RDF_TYPE

    @property
    def is_data(self) -> bool:
        return isinstance(self.object, Literal)


def type_triple(individual: Name, cls: Name) -> Triple:
    return Triple(individual, RDF_TYPE, cls)


@dataclass(frozen=True)
class TriplePattern:
    subject: Union[Name, Var]
    predicate: Union[Name, Var]
    object: Union[Name, Literal, Var]

    def variables(self) -> tuple:
        return tuple(t for t in (self.subject, self.predicate, self.object) if isinstance(t, Var))

    def substitute(self, binding: Mapping) -> "TriplePattern | Triple":
        terms = [binding.get(t.name, t) if isinstance(t, Var) else t
                 for t in (self.subject, self.predicate, self.object)]
        if any(isinstance(t, Var) for t in terms):
            return TriplePattern(*terms)
        return Triple(*terms)


@dataclass(frozen=True)
class Graph:
    triples: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "triples", frozenset(self.triples))

    def __iter__(self):
        return iter(self.triples)

    def __len__(self):
        return len(self.triples)

    def __contains__(self, triple):
        return triple in self.triples

    def __or__(self, other: "Graph | Iterable[Triple]") -> "Graph":
        return Graph(self.triples | frozenset(other))

    def sorted(self) -> list:
        return sorted(self.triples, key=lambda t: (t.subject, t.predicate, _term_key(t.object)))

    def individuals(self) -> frozenset:
        found = set()
        for t in self.triples:
            found.add(t.subject)
            if isinstance(t.object, Name) and not t.is_type:
                found.add(t.object)
        return frozenset(found)

    def types_of(self, individual: Name) -> frozenset:
        return frozenset(t.object for t in self.triples if t.is_type and t.subject == individual)


def _term_key(term):
    if isinstance(term, Literal):
        return (1, term.datatype, term.lexical, "")
    return (0, term.prefix, term.local, "")


class Binding(Mapping):
    """Immutable, hashable variable assignment (variable name -> term)."""

    __slots__ = ("_items", "_hash")

    def __init__(self, items=()):
        self._items = dict(items)
        self._hash = None

    def __getitem__(self, key):
        return self._items[key]

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._items.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return self._items == dict(other)
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self._items.items()))
        return f"Binding({inner})"

    def extend(self, **kwargs) -> "Binding":
        merged = dict(self._items)
        merged.update(kwargs)
        return Binding(merged)


def rename(obj, mapping: Mapping):
    """Rewrite every Name in an expression or axiom through ``mapping``."""
    if not mapping:
        return obj

    def n(name):
        return mapping.get(name, name)

    if isinstance(obj, Name):
        return n(obj)
    if isinstance(obj, NamedClass):
        return NamedClass(n(obj.name))
    if isinstance(obj, Intersection):
        return Intersection(tuple(rename(op, mapping) for op in obj.operands))
    if isinstance(obj, (Exists, ExactlyOne, ValueOnly)):
        return type(obj)(n(obj.property), rename(obj.filler, mapping))
    if isinstance(obj, CodeRestriction):
        return CodeRestriction(n(obj.property), obj.literal)
    if isinstance(obj, Complement):
        return Complement(NamedClass(n(obj.operand.name)))
    if isinstance(obj, Enumeration):
        return Enumeration(tuple(n(i) for i in obj.individuals))
    if isinstance(obj, DataRange):
        return DataRange(n(obj.property), obj.comparator, obj.bound)
    if isinstance(obj, (SubClass, EquivClass)):
        a, b = obj.expressions()
        return type(obj)(rename(a, mapping), rename(b, mapping))
    if isinstance(obj, Axiom):
        a, b = obj.names()
        return type(obj)(n(a), n(b))
    raise TypeError(f"cannot rename {obj!r}")
