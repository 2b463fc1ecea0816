"""Relational schema + terminology table -> application ontology.

The translation runs rule families in a fixed order: relations and
attributes, inclusion dependencies, functional dependencies, exclusion
dependencies, then integrity constraints and enumerated domains.  An edit
script is applied afterwards to stand in for manual review.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .model import (
    Axiom,
    CodeRestriction,
    DataRange,
    Disjoint,
    Enumeration,
    EquivClass,
    Exists,
    Intersection,
    Literal,
    Name,
    NamedClass,
    Ontology,
    PropertyDomain,
    PropertyRange,
    SubClass,
    ValueOnly,
    intersection,
    rename,
    xsd,
)
from .sigma import AsData, AsLink, AsNode, SigmaImportLink
from .syntax import ParseError, parse_axiom, render_axiom

SQL_TYPES = {"int": "int", "varchar": "string", "decimal": "decimal", "date": "date",
             "bool": "boolean"}
INCLUSION_KINDS = ("nonkey-to-key", "key-to-key", "subkey-to-key")


class SchemaError(ValueError):
    """Malformed schema, terminology table or edit script."""


class TranslationError(ValueError):
    """A rule could not be applied (e.g. two origins produce one class name)."""


class EditError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"edit #{index}: {message}")
        self.index = index


# -- schema ------------------------------------------------------------------


@dataclass(frozen=True)
class Attribute:
    name: str
    sql_type: str
    compulsory: bool = True


@dataclass(frozen=True)
class Relation:
    name: str
    attributes: tuple
    key: tuple

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def attribute_names(self) -> tuple:
        return tuple(a.name for a in self.attributes)


@dataclass(frozen=True)
class InclusionDependency:
    kind: str
    source: tuple  # (relation, attributes)
    target: tuple  # (relation, key attributes)


@dataclass(frozen=True)
class ExclusionDependency:
    first: str
    second: str


@dataclass(frozen=True)
class FunctionalDependency:
    relation: str
    determinant: tuple
    dependent: str


@dataclass(frozen=True)
class IntegrityConstraint:
    relation: str
    attribute: str
    comparator: str
    bound: Literal


@dataclass(frozen=True)
class DomainConstraint:
    relation: str
    attribute: str
    values: tuple


@dataclass(frozen=True)
class RelationalSchema:
    relations: tuple
    inclusions: tuple = ()
    exclusions: tuple = ()
    functionals: tuple = ()
    integrity: tuple = ()
    domains: tuple = ()
    prefix: str = "a"
    ontology_id: str = "application"

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(name)

    def validate(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate relation names")
        for r in self.relations:
            if not r.key:
                raise SchemaError(f"relation {r.name} has no primary key")
            for k in r.key:
                if k not in r.attribute_names:
                    raise SchemaError(f"key attribute {r.name}.{k} does not exist")
                if not r.attribute(k).compulsory:
                    raise SchemaError(f"key attribute {r.name}.{k} must be compulsory")
            for a in r.attributes:
                if a.sql_type not in SQL_TYPES:
                    raise SchemaError(f"unknown type {a.sql_type!r} for {r.name}.{a.name}")

        def check(rel, attrs):
            try:
                r = self.relation(rel)
            except KeyError:
                raise SchemaError(f"unknown relation {rel!r}") from None
            for a in attrs:
                if a not in r.attribute_names:
                    raise SchemaError(f"unknown attribute {rel}.{a}")
            return r

        for dep in self.inclusions:
            if dep.kind not in INCLUSION_KINDS:
                raise SchemaError(f"unknown inclusion kind {dep.kind!r}")
            check(*dep.source)
            target = check(*dep.target)
            if len(dep.source[1]) != len(dep.target[1]):
                raise SchemaError(f"inclusion arity mismatch {dep.source} -> {dep.target}")
            if tuple(dep.target[1]) != tuple(target.key):
                raise SchemaError(f"inclusion target {dep.target} is not the key")
        for dep in self.exclusions:
            check(dep.first, ())
            check(dep.second, ())
            if dep.first == dep.second:
                raise SchemaError("exclusion dependency between a relation and itself")
        for dep in self.functionals:
            r = check(dep.relation, (*dep.determinant, dep.dependent))
            if dep.dependent in dep.determinant:
                raise SchemaError("functional dependent occurs in its determinant")
            if set(r.key) & {*dep.determinant, dep.dependent}:
                raise SchemaError("functional dependencies must be over non-key attributes")
        for c in self.integrity:
            check(c.relation, (c.attribute,))
        for c in self.domains:
            check(c.relation, (c.attribute,))
            if len(set(c.values)) < 2:
                raise SchemaError(f"domain of {c.relation}.{c.attribute} needs two values")
        return self


def schema_from_json(data: dict) -> RelationalSchema:
    try:
        relations = tuple(
            Relation(
                r["name"],
                tuple(Attribute(a["name"], a["type"], bool(a.get("compulsory", True)))
                      for a in r["attributes"]),
                tuple(r["key"]),
            )
            for r in data.get("relations", [])
        )
        inclusions = tuple(
            InclusionDependency(
                d.get("kind", "nonkey-to-key"),
                (d["from"]["relation"], tuple(d["from"]["attributes"])),
                (d["to"]["relation"], tuple(d["to"]["attributes"])),
            )
            for d in data.get("inclusion", [])
        )
        exclusions = tuple(ExclusionDependency(d["a"], d["b"]) for d in data.get("exclusion", []))
        functionals = tuple(
            FunctionalDependency(d["relation"], tuple(d["determinant"]), d["dependent"])
            for d in data.get("functional", [])
        )
        integrity = tuple(
            IntegrityConstraint(d["relation"], d["attribute"], d["comparator"],
                                Literal.of(d["bound"]))
            for d in data.get("integrity", [])
        )
        domains = tuple(
            DomainConstraint(d["relation"], d["attribute"], tuple(d["values"]))
            for d in data.get("domains", [])
        )
        schema = RelationalSchema(
            relations, inclusions, exclusions, functionals, integrity, domains,
            prefix=data.get("prefix", "a"),
            ontology_id=data.get("ontology", f"{data.get('prefix', 'a')}-application"),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema: missing or bad field {exc}") from None
    return schema.validate()


def load_schema(path) -> RelationalSchema:
    return schema_from_json(_load_json(path))


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# -- terminology manager -----------------------------------------------------


@dataclass(frozen=True)
class TerminologyManager:
    entries: tuple = ()  # ((path, TERMINOLOGY), code) pairs, sorted

    def __post_init__(self):
        seen = {}
        for (path, term), code in self.entries:
            if not code:
                raise SchemaError(f"empty code for {path} in {term}")
            if seen.setdefault((path, term), code) != code:
                raise SchemaError(f"conflicting {term} codes for {path}")
        object.__setattr__(self, "entries", tuple(sorted(seen.items())))
        object.__setattr__(self, "_table", dict(seen))

    def get(self, path: str, terminology: str) -> Optional[str]:
        return self._table.get((path, terminology.upper()))

    def codes(self, path: str) -> tuple:
        """(TERMINOLOGY, code) pairs recorded for ``path``, sorted."""
        return tuple((t, c) for (p, t), c in self.entries if p == path)


def tm_from_json(data) -> TerminologyManager:
    try:
        return TerminologyManager(tuple(
            ((e["path"], e["terminology"].upper()), str(e["code"])) for e in data))
    except (KeyError, TypeError, AttributeError) as exc:
        raise SchemaError(f"malformed terminology table: {exc}") from None


def load_tm(path) -> TerminologyManager:
    return tm_from_json(_load_json(path))


def lookup_code(tm: TerminologyManager, path: str, terminology: str) -> Optional[str]:
    return tm.get(path, terminology)


# -- naming ------------------------------------------------------------------


def _ident(text: str) -> str:
    out = re.sub(r"[^\w\-]", "", text)
    out = out.strip("-")
    if not out:
        raise TranslationError(f"cannot derive an identifier from {text!r}")
    return out


def _cap(text: str) -> str:
    text = _ident(text)
    return text[0].upper() + text[1:]


class _Names:
    """Deterministic names and code ownership for one schema + TM pair."""

    def __init__(self, schema: RelationalSchema, tm: TerminologyManager):
        self.schema = schema
        self.tm = tm
        self.prefix = schema.prefix
        self.owner = {}  # (terminology, code) -> class local name
        self.attr_class = {}  # (relation, attribute) -> class local name
        self.origins = {}  # class local name -> origin description
        for r in schema.relations:
            self._register(r.name, f"relation {r.name}")
            for code in tm.codes(r.name):
                self.owner.setdefault(code, r.name)
        coded = [(a.name, r.name) for r in schema.relations for a in r.attributes
                 if tm.codes(f"{r.name}.{a.name}") and a.name not in r.key]
        for attr, rel in sorted(coded):
            codes = tm.codes(f"{rel}.{attr}")
            reused = sorted({self.owner[c] for c in codes if c in self.owner})
            if reused:
                cls = reused[0]
            else:
                cls = _cap(attr)
                self._register(cls, f"attribute {rel}.{attr}")
            for c in codes:
                self.owner.setdefault(c, cls)
            self.attr_class[rel, attr] = cls

    def _register(self, local: str, origin: str):
        previous = self.origins.get(local)
        if previous is not None and previous != origin:
            raise TranslationError(f"class name {local!r} produced by both {previous} and {origin}")
        self.origins[local] = origin

    def name(self, local: str) -> Name:
        return Name(self.prefix, local)

    def cls(self, local: str) -> NamedClass:
        return NamedClass(self.name(local))

    def code_axioms(self, cls_local: str, path: str) -> list:
        return [
            EquivClass(self.cls(cls_local),
                       CodeRestriction(self.name(term.lower()), Literal(code)))
            for term, code in self.tm.codes(path)
        ]

    @property
    def value(self) -> Name:
        return self.name("value")

    def link_property(self, attribute: str) -> Name:
        # per attribute, so two attributes sharing a code class keep separate links
        return self.name("has" + _cap(attribute))

    def fk_attributes(self) -> set:
        return {(d.source[0], a) for d in self.schema.inclusions
                if d.kind == "nonkey-to-key" for a in d.source[1]}

    def coded_domains(self) -> dict:
        return {(d.relation, d.attribute): d for d in self.schema.domains
                if all(self.tm.codes(f"{d.relation}.{d.attribute}={v}") for v in d.values)}

    def group_class(self, d: DomainConstraint) -> str:
        return _cap(d.attribute) + "Value"


def _datatype(attr: Attribute) -> NamedClass:
    return NamedClass(xsd(SQL_TYPES[attr.sql_type]))


# -- rule families -------------------------------------------------------------


def translate_relations(schema: RelationalSchema, tm: TerminologyManager) -> list:
    names = _Names(schema, tm)
    out = []
    for r in schema.relations:
        # a class is declared by any axiom naming it; codeless relations get a trivial one
        axioms = names.code_axioms(r.name, r.name)
        out += axioms or [SubClass(names.cls(r.name), names.cls(r.name))]
    return out


def translate_attributes(schema: RelationalSchema, tm: TerminologyManager) -> list:
    names = _Names(schema, tm)
    skip = names.fk_attributes() | set(names.coded_domains())
    out = []
    for r in schema.relations:
        for a in r.attributes:
            if a.name in r.key or (r.name, a.name) in skip:
                continue
            cls = names.attr_class.get((r.name, a.name))
            if cls is not None:
                out += names.code_axioms(cls, f"{r.name}.{a.name}")
                out.append(SubClass(names.cls(cls), Exists(names.value, _datatype(a))))
                if a.compulsory:
                    out.append(SubClass(names.cls(r.name),
                                        Exists(names.link_property(a.name), names.cls(cls))))
            else:
                prop = names.name(_ident(a.name))
                out.append(PropertyDomain(prop, names.name(r.name)))
                out.append(PropertyRange(prop, xsd(SQL_TYPES[a.sql_type])))
                if a.compulsory:
                    out.append(SubClass(names.cls(r.name), Exists(prop, _datatype(a))))
    return out


def translate_integrity(schema: RelationalSchema, tm: TerminologyManager) -> list:
    names = _Names(schema, tm)
    out = []
    for c in schema.integrity:
        cls = names.attr_class.get((c.relation, c.attribute))
        if cls is not None:
            filler = Intersection((names.cls(cls),
                                   DataRange(names.value, c.comparator, c.bound)))
            out.append(SubClass(names.cls(c.relation), Exists(names.link_property(c.attribute), filler)))
        else:
            out.append(SubClass(names.cls(c.relation),
                                DataRange(names.name(_ident(c.attribute)), c.comparator, c.bound)))
    return out


def translate_inclusions(schema: RelationalSchema) -> list:
    names = _Names(schema, TerminologyManager())
    out = []
    for d in schema.inclusions:
        src, tgt = d.source[0], d.target[0]
        if d.kind == "nonkey-to-key":
            prop = names.name("-".join(_ident(a) for a in d.source[1]))
            out.append(SubClass(names.cls(src), Exists(prop, names.cls(tgt))))
        elif d.kind == "key-to-key":
            out.append(SubClass(names.cls(src), names.cls(tgt)))
        else:
            out.append(SubClass(names.cls(src),
                                Exists(names.name("ref_" + _ident(tgt)), names.cls(tgt))))
    return out


def translate_exclusions(schema: RelationalSchema, current_axioms: Iterable[Axiom]) -> list:
    from .reasoner import classify

    names = _Names(schema, TerminologyManager())
    current = set(current_axioms)
    out = []
    for d in schema.exclusions:
        a, b = names.name(d.first), names.name(d.second)
        out.append(Disjoint(a, b))
        lattice = classify(current | set(out))
        common = (lattice.superclasses(a) & lattice.superclasses(b)) - {a, b}
        if not common:
            group = names.cls(_ident(d.first) + "Or" + _ident(d.second))
            out += [SubClass(NamedClass(a), group), SubClass(NamedClass(b), group)]
    return out


def translate_functionals(schema: RelationalSchema) -> list:
    names = _Names(schema, TerminologyManager())
    out = []
    for d in schema.functionals:
        group = "-".join(_cap(a) for a in d.determinant) + "-group"
        r = schema.relation(d.relation)
        out.append(SubClass(names.cls(d.relation),
                            Exists(names.name("has" + group), names.cls(group))))
        out.append(SubClass(names.cls(group),
                            Exists(names.name("has" + _cap(d.dependent)),
                                   _datatype(r.attribute(d.dependent)))))
    return out


def translate_domain_enums(schema: RelationalSchema, tm: TerminologyManager) -> list:
    names = _Names(schema, tm)
    coded = names.coded_domains()
    out = []
    for d in schema.domains:
        group = names.group_class(d)
        prop = names.name(_ident(d.attribute))
        if (d.relation, d.attribute) in coded:
            members = []
            for v in d.values:
                local = _ident(v)
                members.append(local)
                out += names.code_axioms(local, f"{d.relation}.{d.attribute}={v}")
                out.append(SubClass(names.cls(local), names.cls(group)))
            for i, m1 in enumerate(members):
                for m2 in members[i + 1:]:
                    out.append(Disjoint(names.name(m1), names.name(m2)))
        else:
            individuals = tuple(names.name(_ident(v)) for v in d.values)
            out.append(EquivClass(names.cls(group), Enumeration(individuals)))
        out.append(SubClass(names.cls(d.relation), ValueOnly(prop, names.cls(group))))
    return out


def _check_enum_names(names: _Names, schema: RelationalSchema):
    coded = names.coded_domains()
    for d in schema.domains:
        origin = f"domain of {d.relation}.{d.attribute}"
        names._register(names.group_class(d), origin)
        if (d.relation, d.attribute) in coded:
            for v in d.values:
                names._register(_ident(v), f"{origin} value {v!r}")
    for d in schema.functionals:
        names._register("-".join(_cap(a) for a in d.determinant) + "-group",
                        f"functional dependency on {d.relation}")


def import_links(schema: RelationalSchema, tm: TerminologyManager) -> list:
    """One Σ import link per relation, describing how rows become triples."""
    names = _Names(schema, tm)
    fks = {(d.source[0], d.source[1][0]): d for d in schema.inclusions
           if d.kind == "nonkey-to-key" and len(d.source[1]) == 1}
    coded = names.coded_domains()
    links = []
    for r in schema.relations:
        directives = []
        for a in r.attributes:
            if a.name in r.key:
                continue
            key = (r.name, a.name)
            if key in fks:
                d = AsLink(names.name(_ident(a.name)), fks[key].target[0])
            elif key in names.attr_class:
                cls = names.attr_class[key]
                d = AsNode(names.link_property(a.name), names.name(cls), names.value)
            elif key in coded:
                d = AsNode(names.name(_ident(a.name)), names.name(names.group_class(coded[key])),
                           names.value)
            else:
                d = AsData(names.name(_ident(a.name)))
            directives.append((a.name, d))
        links.append(SigmaImportLink(r.name, schema.prefix, tuple(r.key), names.name(r.name),
                                     tuple(directives)))
    return links


def translate_schema(schema: RelationalSchema, tm: TerminologyManager):
    """Run every rule family in order; returns (Ontology, [SigmaImportLink])."""
    names = _Names(schema, tm)
    _check_enum_names(names, schema)
    axioms = translate_relations(schema, tm) + translate_attributes(schema, tm)
    axioms += translate_inclusions(schema)
    axioms += translate_functionals(schema)
    axioms += translate_exclusions(schema, axioms)
    axioms += translate_integrity(schema, tm)
    axioms += translate_domain_enums(schema, tm)
    # drop the placeholder declarations of classes that gained real axioms
    declared = {ax for ax in axioms if isinstance(ax, SubClass) and ax.sub == ax.sup}
    real = [ax for ax in axioms if ax not in declared]
    mentioned = {n for ax in real for n in ax.names()}
    axioms = real + [ax for ax in declared if ax.sub.name not in mentioned]
    return Ontology(schema.ontology_id, schema.prefix, frozenset(axioms)), import_links(schema, tm)


# -- edit script -------------------------------------------------------------


@dataclass(frozen=True)
class RenameTerm:
    old: Name
    new: Name


@dataclass(frozen=True)
class StrengthenToEquiv:
    """Replace SubClass axioms sharing one named subclass with a single EquivClass."""

    selectors: tuple


@dataclass(frozen=True)
class AddCode:
    cls: Name
    terminology: str
    code: str


@dataclass(frozen=True)
class DropAxiom:
    selector: Axiom


@dataclass(frozen=True)
class AddAxiom:
    axiom: Axiom


Edit = Union[RenameTerm, StrengthenToEquiv, AddCode, DropAxiom, AddAxiom]


def _parse_name(text: str, prefix: str) -> Name:
    if ":" in text:
        p, _, local = text.partition(":")
        return Name(p, local)
    return Name(prefix, text)


def edits_from_json(data, prefix: str = "a") -> list:
    edits = []
    for i, rec in enumerate(data):
        try:
            op = rec["op"]
            if op == "rename":
                edits.append(RenameTerm(_parse_name(rec["old"], prefix),
                                        _parse_name(rec["new"], prefix)))
            elif op == "strengthen":
                texts = rec["axioms"] if "axioms" in rec else [rec["axiom"]]
                edits.append(StrengthenToEquiv(tuple(parse_axiom(t, prefix) for t in texts)))
            elif op == "add-code":
                edits.append(AddCode(_parse_name(rec["class"], prefix), rec["terminology"],
                                     str(rec["code"])))
            elif op == "drop":
                edits.append(DropAxiom(parse_axiom(rec["axiom"], prefix)))
            elif op == "add":
                edits.append(AddAxiom(parse_axiom(rec["axiom"], prefix)))
            else:
                raise SchemaError(f"edit #{i}: unknown op {op!r}")
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"edit #{i}: missing field {exc}") from None
        except ParseError as exc:
            raise SchemaError(f"edit #{i}: {exc}") from None
    return edits


def load_edits(path, prefix: str = "a") -> list:
    return edits_from_json(_load_json(path), prefix)


def apply_edit_script(o: Ontology, edits: Iterable[Edit]) -> Ontology:
    axioms = set(o.axioms)
    for i, edit in enumerate(edits):
        if isinstance(edit, RenameTerm):
            axioms = {rename(ax, {edit.old: edit.new}) for ax in axioms}
        elif isinstance(edit, StrengthenToEquiv):
            subs = set()
            for sel in edit.selectors:
                if sel not in axioms:
                    raise EditError(i, f"selector {render_axiom(sel)} matches no axiom")
                if not isinstance(sel, SubClass) or not isinstance(sel.sub, NamedClass):
                    raise EditError(i, "only SubClass axioms with a named subclass can be strengthened")
                subs.add(sel.sub)
            if len(subs) != 1:
                raise EditError(i, "strengthened axioms must share their subclass")
            axioms -= set(edit.selectors)
            axioms.add(EquivClass(subs.pop(), intersection(*(s.sup for s in edit.selectors))))
        elif isinstance(edit, AddCode):
            prop = Name(edit.cls.prefix, edit.terminology.lower())
            axioms.add(EquivClass(NamedClass(edit.cls), CodeRestriction(prop, Literal(edit.code))))
        elif isinstance(edit, DropAxiom):
            if edit.selector not in axioms:
                raise EditError(i, f"selector {render_axiom(edit.selector)} matches no axiom")
            axioms.discard(edit.selector)
        elif isinstance(edit, AddAxiom):
            axioms.add(edit.axiom)
        else:
            raise EditError(i, f"unknown edit {edit!r}")
    return o.with_axioms(axioms)


def rename_links(links: Iterable[SigmaImportLink], edits: Iterable[Edit]) -> list:
    """Carry the renames of an edit script over to the import links."""
    out = list(links)
    for edit in edits:
        if isinstance(edit, RenameTerm):
            out = [link.renamed({edit.old: edit.new}) for link in out]
    return out
