"""Integration mappings between an application ontology and the canonical one.

Basic mapping axioms come from an administrator.  Class mappings are read off
a merged classification, ontology paths are enumerated up to a length
threshold, path mapping candidates are found by comparing path endpoints, and
confirmed path mappings are compiled into Horn rules.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .model import (
    RDF_TYPE,
    Axiom,
    EquivClass,
    EquivProperty,
    ExactlyOne,
    Exists,
    Intersection,
    Name,
    NamedClass,
    Ontology,
    SameIndividual,
    SubClass,
    SubProperty,
    TriplePattern,
    Var,
    is_datatype_name,
)
from .reasoner import HornRule, SubsumptionLattice, classify
from .syntax import (
    DIRECTION_SYMBOLS,
    ParseError,
    parse_axiom,
    parse_ontology,
    parse_path_pair,
    render_path,
    serialize_axioms,
    serialize_ontology,
)

DEFAULT_MAX_PATH_LENGTH = 3


class MappingError(ValueError):
    pass


class UnknownTermError(MappingError):
    def __init__(self, term: Name, axiom: str):
        super().__init__(f"unknown term {term} in mapping axiom {axiom}")
        self.term = term


class ConfirmationError(MappingError):
    pass


# -- paths ---------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class OntologyPath:
    start: Name
    steps: tuple  # ((property, class), ...)

    def __post_init__(self):
        steps = tuple(tuple(s) for s in self.steps)
        if not steps:
            raise ValueError("an ontology path has at least one step")
        object.__setattr__(self, "steps", steps)

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def end(self) -> Name:
        return self.steps[-1][1]

    @property
    def intermediates(self) -> tuple:
        return tuple(c for _, c in self.steps[:-1])

    def truncate(self, k: int) -> "OntologyPath":
        return OntologyPath(self.start, self.steps[:k])

    def __str__(self):
        return render_path(self)


@dataclass(frozen=True, order=True)
class PathMappingCandidate:
    left: OntologyPath
    direction: str  # sub | sup | equiv
    right: OntologyPath

    def __post_init__(self):
        if self.direction not in DIRECTION_SYMBOLS:
            raise ValueError(f"bad direction {self.direction!r}")

    def __str__(self):
        return f"{self.left} {DIRECTION_SYMBOLS[self.direction]} {self.right}"


@dataclass(frozen=True, order=True)
class PathMapping:
    candidate: PathMappingCandidate
    provenance: str  # auto | admin

    @property
    def left(self):
        return self.candidate.left

    @property
    def right(self):
        return self.candidate.right

    @property
    def direction(self):
        return self.candidate.direction

    def __str__(self):
        return f"{self.candidate} {self.provenance}"


def _conjuncts(expr):
    if isinstance(expr, Intersection):
        return expr.operands
    return (expr,)


def path_steps(o: Ontology) -> dict:
    """class -> sorted ((property, filler), ...) licensed by that class's own axioms."""
    steps = {}

    def add(cls, expr):
        for conj in _conjuncts(expr):
            if not isinstance(conj, (Exists, ExactlyOne)):
                continue
            for f in _conjuncts(conj.filler):
                if isinstance(f, NamedClass) and not is_datatype_name(f.name):
                    if cls.prefix == conj.property.prefix == f.name.prefix == o.prefix:
                        steps.setdefault(cls, set()).add((conj.property, f.name))

    for ax in o.axioms:
        if isinstance(ax, SubClass) and isinstance(ax.sub, NamedClass):
            add(ax.sub.name, ax.sup)
        elif isinstance(ax, EquivClass):
            for a, b in ((ax.first, ax.second), (ax.second, ax.first)):
                if isinstance(a, NamedClass):
                    add(a.name, b)
    return {c: tuple(sorted(s)) for c, s in steps.items()}


def enumerate_paths(o: Ontology, max_len: int = DEFAULT_MAX_PATH_LENGTH) -> frozenset:
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    steps = path_steps(o)
    out = set()

    def walk(start, trail, at):
        for step in steps.get(at, ()):
            path = trail + (step,)
            out.add(OntologyPath(start, path))
            if len(path) < max_len:
                walk(start, path, step[1])

    for start in sorted(steps):
        walk(start, (), start)
    return frozenset(out)


# -- mapping configuration ----------------------------------------------------


@dataclass(frozen=True)
class MappingConfig:
    max_path_length: int = DEFAULT_MAX_PATH_LENGTH
    confirmations: tuple = ()  # PathMappingCandidate
    basic: tuple = ()  # Axiom

    def __post_init__(self):
        if not isinstance(self.max_path_length, int) or self.max_path_length < 1:
            raise MappingError("maxPathLength must be a positive integer")


def mapping_config_from_json(data: dict) -> MappingConfig:
    basic, confirmations = [], []
    for i, text in enumerate(data.get("basic", []), start=1):
        try:
            basic.append(parse_axiom(text))
        except ParseError as exc:
            raise ParseError(f"basic mapping #{i}: {exc.message}", exc.line, exc.column) from None
    for i, text in enumerate(data.get("confirmations", []), start=1):
        left, direction, right, _ = parse_path_pair(text, i)
        confirmations.append(PathMappingCandidate(left, direction, right))
    return MappingConfig(data.get("maxPathLength", DEFAULT_MAX_PATH_LENGTH),
                         tuple(confirmations), tuple(basic))


def load_mapping_config(path) -> MappingConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), exc.lineno, exc.colno) from None
    return mapping_config_from_json(data)


# -- integration mapping --------------------------------------------------------


@dataclass(frozen=True)
class IntegrationMapping:
    app: Ontology
    canonical: Ontology
    axioms: frozenset = frozenset()
    path_mappings: tuple = ()
    unconfirmed: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "axioms", frozenset(self.axioms))
        object.__setattr__(self, "path_mappings", tuple(sorted(set(self.path_mappings))))
        object.__setattr__(self, "unconfirmed", tuple(sorted(set(self.unconfirmed))))

    def merged(self) -> frozenset:
        return self.app.axioms | self.canonical.axioms | self.axioms

    def rules(self) -> list:
        out = []
        for i, pm in enumerate(self.path_mappings, start=1):
            out += compile_path_rules(pm, i)
        return out

    def export_rules(self) -> list:
        """Application-to-canonical rules, used when this system sends."""
        return [r for r in self.rules() if r.id.endswith("f")]

    def import_rules(self) -> list:
        """Canonical-to-application rules for every confirmed path mapping.

        A ⊑ mapping also yields its reverse rule here: the receiving side
        needs it to rebuild its own shortcut property from canonical data.
        """
        return [compile_reverse_rule(pm, f"pm{i}r")
                for i, pm in enumerate(self.path_mappings, start=1)]


_MAPPING_KINDS = (SubClass, EquivClass, SubProperty, EquivProperty, SameIndividual)


def ingest_basic_mappings(seeds: Iterable[Axiom], o: Ontology, g: Ontology) -> IntegrationMapping:
    from .syntax import render_axiom

    known = o.signature() | g.signature()
    for ax in seeds:
        text = render_axiom(ax)
        if not isinstance(ax, _MAPPING_KINDS):
            raise MappingError(f"not a mapping axiom: {text}")
        names = [n for n in ax.names() if not is_datatype_name(n)]
        for n in names:
            if n not in known:
                raise UnknownTermError(n, text)
        prefixes = {n.prefix for n in names}
        if o.prefix not in prefixes or g.prefix not in prefixes:
            raise MappingError(f"mapping axiom must relate {o.prefix}: and {g.prefix}: terms: {text}")
    return IntegrationMapping(o, g, frozenset(seeds))


def infer_class_mappings(o: Ontology, g: Ontology, mapping: IntegrationMapping,
                         lattice_builder: Callable = classify) -> frozenset:
    """Class mapping axioms entailed by the merged ontologies and seeds."""
    lattice = lattice_builder(mapping.merged())
    g_classes = sorted(c for c in g.classes() if c.prefix == g.prefix)
    out = set()
    for c in sorted(x for x in o.classes() if x.prefix == o.prefix):
        same = [d for d in g_classes if lattice.equivalent(c, d)]
        if same:
            out |= {EquivClass(NamedClass(c), NamedClass(d)) for d in same}
            continue
        sups = lattice.most_specific(d for d in g_classes if lattice.is_subclass(c, d))
        subs = [d for d in g_classes if lattice.is_subclass(d, c)]
        subs = [d for d in subs if not any(e != d and lattice.is_subclass(d, e) for e in subs)]
        out |= {SubClass(NamedClass(c), NamedClass(d)) for d in sups}
        out |= {SubClass(NamedClass(d), NamedClass(c)) for d in subs}
    return frozenset(out - mapping.axioms)


def find_path_candidates(paths_o: Iterable[OntologyPath], paths_g: Iterable[OntologyPath],
                         lattice: SubsumptionLattice) -> frozenset:
    by_ends = {}
    for pg in paths_g:
        by_ends.setdefault((pg.start, pg.end), []).append(pg)
    out = set()
    for po in paths_o:
        for (gs, ge), group in by_ends.items():
            sub = lattice.is_subclass(po.start, gs) and lattice.is_subclass(po.end, ge)
            sup = lattice.is_subclass(gs, po.start) and lattice.is_subclass(ge, po.end)
            for pg in group:
                if sub:
                    out.add(PathMappingCandidate(po, "sub", pg))
                if sup:
                    out.add(PathMappingCandidate(po, "sup", pg))
                if sub and sup:
                    out.add(PathMappingCandidate(po, "equiv", pg))
    return frozenset(out)


def _suffix(path: OntologyPath, i: int) -> OntologyPath:
    return OntologyPath(path.steps[i - 1][1], path.steps[i:])


def is_composite(c: PathMappingCandidate, candidates: frozenset) -> bool:
    """True when ``c`` splits into two shorter candidates of the same direction."""
    for i in range(1, c.left.length):
        for j in range(1, c.right.length):
            head = PathMappingCandidate(c.left.truncate(i), c.direction, c.right.truncate(j))
            tail = PathMappingCandidate(_suffix(c.left, i), c.direction, _suffix(c.right, j))
            if head in candidates and tail in candidates:
                return True
    return False


def confirm_path_mappings(candidates: Iterable[PathMappingCandidate],
                          config: MappingConfig) -> frozenset:
    """Auto-confirm ≡ candidates; everything else needs an admin confirmation.

    A composite ≡ candidate is left out: the rules of its two halves already
    cover it, without minting intermediate individuals.
    """
    candidates = frozenset(candidates)
    out = {PathMapping(c, "auto") for c in candidates
           if c.direction == "equiv" and not is_composite(c, candidates)}
    for c in config.confirmations:
        if c not in candidates:
            raise ConfirmationError(f"confirmation is not a path mapping candidate: {c}")
        if c.direction != "equiv":
            out.add(PathMapping(c, "admin"))
    return frozenset(out)


def unconfirmed_candidates(candidates: Iterable[PathMappingCandidate],
                           confirmed: Iterable[PathMapping]) -> tuple:
    """Candidates left for review.

    The ⊑/⊒ halves of a confirmed ≡ and composites of auto-confirmed ≡
    candidates are not repeated.
    """
    candidates = frozenset(candidates)
    done = {pm.candidate for pm in confirmed}
    covered = {(pm.left, pm.right) for pm in confirmed if pm.direction == "equiv"}
    covered |= {(c.left, c.right) for c in candidates
                if c.direction == "equiv" and is_composite(c, candidates)}
    return tuple(sorted(c for c in candidates
                        if c not in done and (c.left, c.right) not in covered))


# -- rule compilation -----------------------------------------------------------


def _node_vars(path: OntologyPath, letter: str) -> list:
    inner = [letter if i == 0 else f"{letter}{i}" for i in range(path.length - 1)]
    return ["e", *inner, "p"]


def _chain(path: OntologyPath, names: list) -> list:
    return [TriplePattern(Var(names[i]), prop, Var(names[i + 1]))
            for i, (prop, _) in enumerate(path.steps)]


def _types(path: OntologyPath, names: list, positions) -> list:
    classes = [path.start, *(c for _, c in path.steps)]
    return [TriplePattern(Var(names[i]), RDF_TYPE, classes[i]) for i in positions]


def compile_forward_rule(pm: PathMapping, rule_id: str) -> HornRule:
    """Application path -> canonical path, minting the canonical intermediates."""
    o_vars, g_vars = _node_vars(pm.left, "x"), _node_vars(pm.right, "y")
    inner_g = range(1, pm.right.length)
    body = _types(pm.left, o_vars, [0]) + _chain(pm.left, o_vars)
    head = _chain(pm.right, g_vars) + _types(pm.right, g_vars, inner_g)
    return HornRule(rule_id, tuple(body), tuple(head), tuple(g_vars[i] for i in inner_g))


def compile_reverse_rule(pm: PathMapping, rule_id: str) -> HornRule:
    """Canonical path -> application path, minting the application intermediates."""
    o_vars, g_vars = _node_vars(pm.left, "x"), _node_vars(pm.right, "y")
    inner_o = range(1, pm.left.length)
    body = (_types(pm.right, g_vars, [0]) + _chain(pm.right, g_vars)
            + _types(pm.right, g_vars, range(1, pm.right.length + 1)))
    head = _chain(pm.left, o_vars) + _types(pm.left, o_vars, inner_o)
    return HornRule(rule_id, tuple(body), tuple(head), tuple(o_vars[i] for i in inner_o))


def compile_path_rules(pm: PathMapping, index: int = 1) -> list:
    rules = []
    if pm.direction in ("sub", "equiv"):
        rules.append(compile_forward_rule(pm, f"pm{index}f"))
    if pm.direction in ("sup", "equiv"):
        rules.append(compile_reverse_rule(pm, f"pm{index}r"))
    return rules


# -- assembly -----------------------------------------------------------------


def build_integration_mapping(o: Ontology, g: Ontology, config: MappingConfig) -> IntegrationMapping:
    im = ingest_basic_mappings(config.basic, o, g)
    im = IntegrationMapping(o, g, im.axioms | infer_class_mappings(o, g, im))
    lattice = classify(im.merged())
    candidates = find_path_candidates(enumerate_paths(o, config.max_path_length),
                                      enumerate_paths(g, config.max_path_length), lattice)
    confirmed = confirm_path_mappings(candidates, config)
    return IntegrationMapping(o, g, im.axioms, tuple(confirmed),
                              unconfirmed_candidates(candidates, confirmed))


# -- document format --------------------------------------------------------------

_SECTIONS = ("app", "canonical", "mappings")


def serialize_integration_mapping(im: IntegrationMapping) -> str:
    lines = ["[app]", serialize_ontology(im.app).rstrip("\n"),
             "[canonical]", serialize_ontology(im.canonical).rstrip("\n"),
             "[mappings]",
             f"ontology {im.app.id}-to-{im.canonical.id}",
             f"prefix {im.app.prefix}",
             f"import {im.canonical.prefix}"]
    lines += serialize_axioms(im.axioms)
    lines += [f"pathmap {pm}" for pm in im.path_mappings]
    return "\n".join(lines) + "\n"


def parse_integration_mapping(text: str) -> IntegrationMapping:
    parts, current, offsets = {}, None, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]") and stripped[1:-1] in _SECTIONS:
            current = stripped[1:-1]
            if current in parts:
                raise ParseError(f"duplicate section [{current}]", lineno, 1)
            parts[current] = []
            offsets[current] = lineno
        elif current is None:
            if stripped and not stripped.startswith("#"):
                raise ParseError("content before the first section", lineno, 1)
        else:
            parts[current].append((lineno, line))
    for name in _SECTIONS:
        if name not in parts:
            raise ParseError(f"missing section [{name}]", 1, 1)

    def doc(name, keep=lambda line: True):
        # blank out lines we do not hand to the ontology parser so numbering survives
        first = offsets[name]
        body = ["" if not keep(line) else line for _, line in parts[name]]
        return "\n" * first + "\n".join(body)

    app = parse_ontology(doc("app"))
    canonical = parse_ontology(doc("canonical"))
    is_pathmap = lambda line: line.strip().startswith("pathmap ")
    mapping_doc = parse_ontology(doc("mappings", lambda line: not is_pathmap(line)))
    pms = []
    for lineno, line in parts["mappings"]:
        if is_pathmap(line):
            left, direction, right, provenance = parse_path_pair(line.strip()[8:], lineno)
            if provenance not in ("auto", "admin"):
                raise ParseError("pathmap lines end with 'auto' or 'admin'", lineno, len(line))
            pms.append(PathMapping(PathMappingCandidate(left, direction, right), provenance))
    return IntegrationMapping(app, canonical, mapping_doc.axioms, tuple(pms))


def load_integration_mapping(path) -> IntegrationMapping:
    return parse_integration_mapping(Path(path).read_text(encoding="utf-8"))
