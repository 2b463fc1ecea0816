"""Subsumption classification and ABox saturation for the expression fragment.

Classification is a completion-rule procedure over a normalised TBox:
every sub-expression gets an atom, code restrictions ``Code(p, v)`` become
``∃p.{v}`` with ``{v}`` an atomic value token, and the usual EL completion
rules (with a property hierarchy) are run to a fixpoint.  ``ExactlyOne`` is
read as ``Exists`` here; ``Only``, ``Not`` and ``OneOf`` are opaque atoms.

Saturation materialises the consequences of the TBox on a triple graph:
inherited types and codes, property hierarchy propagation, ``Only``
propagation, recognition of defined classes, and Horn rule firing with
deterministic skolem individuals for created variables.
"""
from __future__ import annotations

import hashlib
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import lru_cache
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
    SubClass,
    SubProperty,
    Triple,
    TriplePattern,
    ValueOnly,
    Var,
    is_datatype_name,
    xsd,
)
from .store import TripleIndex, _unify

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HornRule:
    id: str
    body: tuple
    head: tuple
    creates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "creates", tuple(self.creates))
        if not self.body:
            raise ValueError(f"rule {self.id}: empty body")
        body_vars = {v.name for p in self.body for v in p.variables()}
        for var in self.creates:
            if var in body_vars:
                raise ValueError(f"rule {self.id}: created variable ?{var} occurs in the body")
        allowed = body_vars | set(self.creates)
        for p in self.head:
            for v in p.variables():
                if v.name not in allowed:
                    raise ValueError(f"rule {self.id}: head variable ?{v.name} is unbound")

    @property
    def body_variables(self) -> tuple:
        return tuple(sorted({v.name for p in self.body for v in p.variables()}))


@dataclass(frozen=True)
class SubsumptionLattice:
    classes: frozenset
    subsumes: frozenset  # (sub, sup) pairs, reflexive and transitive
    equiv: tuple = ()  # blocks of mutually equivalent classes
    unsatisfiable: frozenset = frozenset()

    def __post_init__(self):
        supers = defaultdict(set)
        for a, b in self.subsumes:
            supers[a].add(b)
        object.__setattr__(self, "_supers", {k: frozenset(v) for k, v in supers.items()})

    def is_subclass(self, sub: Name, sup: Name) -> bool:
        return sub == sup or (sub, sup) in self.subsumes

    def superclasses(self, cls: Name) -> frozenset:
        return self._supers.get(cls, frozenset((cls,)))

    def equivalent(self, a: Name, b: Name) -> bool:
        return self.is_subclass(a, b) and self.is_subclass(b, a)

    def depth(self, cls: Name) -> int:
        """Number of strictly more general classes."""
        return sum(1 for s in self.superclasses(cls) if not self.is_subclass(s, cls))

    def most_specific(self, names: Iterable[Name]) -> frozenset:
        names = set(names)
        return frozenset(
            n for n in names
            if not any(m != n and self.is_subclass(m, n) and not self.is_subclass(n, m)
                       for m in names)
        )


# -- normalisation -----------------------------------------------------------


def _value_atom(lit: Literal):
    return ("V", lit)


class _Normaliser:
    def __init__(self):
        self.atoms = {}  # expression -> atom
        self.told = defaultdict(set)  # atom -> atoms it is told to be below
        self.conj = defaultdict(list)  # operand atom -> [(operand set, result atom)]
        self.told_exists = defaultdict(set)  # atom -> {(role, filler atom)}
        self.exists_lhs = defaultdict(set)  # (role, filler atom) -> atoms
        self.all_atoms = set()
        self.roles = set()
        self.role_told = defaultdict(set)

    def _exists(self, role: Name, filler) -> tuple:
        key = ("E", role, filler)
        if key not in self.all_atoms:
            self.all_atoms.add(key)
            self.roles.add(role)
            self.told_exists[key].add((role, filler))
            self.exists_lhs[role, filler].add(key)
        return key

    def atom(self, expr: ClassExpression):
        found = self.atoms.get(expr)
        if found is not None:
            return found
        if isinstance(expr, NamedClass):
            key = ("N", expr.name)
        elif isinstance(expr, CodeRestriction):
            value = _value_atom(expr.literal)
            self.all_atoms.add(value)
            key = self._exists(expr.property, value)
        elif isinstance(expr, DataRange):
            rng = ("G", expr.comparator, expr.bound)
            self.all_atoms.add(rng)
            key = self._exists(expr.property, rng)
        elif isinstance(expr, (Exists, ExactlyOne)):
            key = self._exists(expr.property, self.atom(expr.filler))
        elif isinstance(expr, Intersection):
            ops = frozenset(self.atom(op) for op in expr.operands)
            key = ("A", ops)
            if key not in self.all_atoms:
                self.all_atoms.add(key)
                for op in ops:
                    self.told[key].add(op)
                    self.conj[op].append((ops, key))
        else:  # Only / Not / OneOf: opaque
            key = ("O", expr)
        self.atoms[expr] = key
        self.all_atoms.add(key)
        return key

    def add_axiom(self, ax: Axiom):
        if isinstance(ax, SubClass):
            self.told[self.atom(ax.sub)].add(self.atom(ax.sup))
        elif isinstance(ax, EquivClass):
            a, b = self.atom(ax.first), self.atom(ax.second)
            self.told[a].add(b)
            self.told[b].add(a)
        elif isinstance(ax, SubProperty):
            self.roles.update((ax.sub, ax.sup))
            self.role_told[ax.sub].add(ax.sup)
        elif isinstance(ax, EquivProperty):
            self.roles.update((ax.first, ax.second))
            self.role_told[ax.first].add(ax.second)
            self.role_told[ax.second].add(ax.first)
        elif isinstance(ax, Disjoint):
            self.atom(NamedClass(ax.first))
            self.atom(NamedClass(ax.second))

    def add_datatype_facts(self):
        values = [a for a in self.all_atoms if a[0] == "V"]
        ranges = [a for a in self.all_atoms if a[0] == "G"]
        for v in values:
            lit = v[1]
            dtype = ("N", xsd(lit.datatype))
            self.all_atoms.add(dtype)
            self.told[v].add(dtype)
            for r in ranges:
                if lit.compare(r[1], r[2]):
                    self.told[v].add(r)

    def role_closure(self) -> dict:
        sup = {}
        for r in self.roles:
            seen, stack = {r}, [r]
            while stack:
                for s in self.role_told.get(stack.pop(), ()):
                    if s not in seen:
                        seen.add(s)
                        stack.append(s)
            sup[r] = frozenset(seen)
        return sup


class Classification:
    """Completed TBox: subsumer sets per atom plus role edges."""

    def __init__(self, axioms: frozenset):
        norm = _Normaliser()
        for ax in sorted(axioms, key=lambda a: a.kind_order):
            norm.add_axiom(ax)
        norm.add_datatype_facts()
        self.norm = norm
        self.role_sup = norm.role_closure()
        self.S = {a: set() for a in norm.all_atoms}
        self.edges = defaultdict(set)  # role -> {(X, Y)}
        self.succ = defaultdict(set)  # X -> {(role, Y)}
        self.pred = defaultdict(set)  # (role, Y) -> {X}
        self._complete()
        self.disjoint_pairs = {
            (ax.first, ax.second) for ax in axioms if isinstance(ax, Disjoint)
        }

    def _complete(self):
        norm = self.norm
        queue = deque()

        def add(x, a):
            if a not in self.S[x]:
                self.S[x].add(a)
                queue.append(("S", x, a))

        def add_edge(x, role, y):
            for r in self.role_sup.get(role, (role,)):
                if (x, y) not in self.edges[r]:
                    self.edges[r].add((x, y))
                    self.succ[x].add((r, y))
                    self.pred[r, y].add(x)
                    queue.append(("R", x, r, y))

        for a in norm.all_atoms:
            add(a, a)
        while queue:
            item = queue.popleft()
            if item[0] == "S":
                _, x, a = item
                for b in norm.told.get(a, ()):
                    add(x, b)
                for ops, b in norm.conj.get(a, ()):
                    if ops <= self.S[x]:
                        add(x, b)
                for role, y in norm.told_exists.get(a, ()):
                    add_edge(x, role, y)
                # x's new subsumer may complete ∃r.a for predecessors of x
                for (role, y), lhs in _exists_for_filler(norm, a):
                    for w in list(self.pred.get((role, x), ())):
                        for e in lhs:
                            add(w, e)
            else:
                _, x, role, y = item
                for a in list(self.S[y]):
                    for e in norm.exists_lhs.get((role, a), ()):
                        add(x, e)

    # -- queries ---------------------------------------------------------------

    def atom_of(self, expr: ClassExpression):
        return self.norm.atoms.get(expr)

    def subsumers(self, cls: Name) -> set:
        return self.S.get(("N", cls), set())

    def named_supers(self, cls: Name) -> frozenset:
        found = {a[1] for a in self.subsumers(cls) if a[0] == "N" and not is_datatype_name(a[1])}
        found.add(cls)
        return frozenset(found)

    def codes(self, cls: Name) -> frozenset:
        """(property, literal) pairs every instance of ``cls`` is entailed to carry."""
        return frozenset(
            (role, y[1]) for role, y in self.succ.get(("N", cls), ()) if y[0] == "V"
        )

    def only_constraints(self, cls: Name) -> frozenset:
        return frozenset(
            (a[1].property, a[1].filler) for a in self.subsumers(cls)
            if a[0] == "O" and isinstance(a[1], ValueOnly)
        )

    def entails(self, cls: Name, expr: ClassExpression) -> bool:
        atom = self.atom_of(expr)
        return atom is not None and atom in self.subsumers(cls)

    def lattice(self) -> SubsumptionLattice:
        classes = sorted(
            a[1] for a in self.norm.all_atoms if a[0] == "N" and not is_datatype_name(a[1])
        )
        pairs = set()
        for c in classes:
            for d in self.named_supers(c):
                pairs.add((c, d))
        blocks, seen = [], set()
        for c in classes:
            if c in seen:
                continue
            block = frozenset(d for d in self.named_supers(c) if (d, c) in pairs)
            seen |= block
            blocks.append(block)
        unsat = set()
        complements = {}
        for c in classes:
            subs = self.subsumers(c)
            named = self.named_supers(c)
            if any(a in named and b in named for a, b in self.disjoint_pairs):
                unsat.add(c)
            for a in subs:
                if a[0] == "O" and isinstance(a[1], Complement) and a[1].operand.name in named:
                    unsat.add(c)
        return SubsumptionLattice(
            frozenset(classes), frozenset(pairs), tuple(blocks), frozenset(unsat)
        )


def _exists_for_filler(norm: _Normaliser, filler):
    # index built lazily: filler atom -> [((role, filler), lhs atoms)]
    cache = norm.__dict__.setdefault("_by_filler", None)
    if cache is None:
        cache = defaultdict(list)
        for (role, f), lhs in norm.exists_lhs.items():
            cache[f].append(((role, f), lhs))
        norm._by_filler = cache
    return cache.get(filler, ())


@lru_cache(maxsize=32)
def _classification(axioms: frozenset) -> Classification:
    return Classification(axioms)


def classify(tbox: Ontology | Iterable[Axiom]) -> SubsumptionLattice:
    """All entailed named-class subsumptions of ``tbox``."""
    axioms = tbox.axioms if isinstance(tbox, Ontology) else frozenset(tbox)
    lattice = _classification(frozenset(axioms)).lattice()
    if lattice.unsatisfiable:
        log.warning("unsatisfiable classes: %s",
                    ", ".join(str(c) for c in sorted(lattice.unsatisfiable)))
    return lattice


# -- saturation --------------------------------------------------------------


def _definitions(axioms) -> list:
    """(class, definiens) pairs usable for recognition, in a stable order."""
    defs = set()
    for ax in axioms:
        if isinstance(ax, EquivClass):
            a, b = ax.first, ax.second
            if isinstance(a, NamedClass) and not isinstance(b, NamedClass):
                defs.add((a.name, b))
            if isinstance(b, NamedClass) and not isinstance(a, NamedClass):
                defs.add((b.name, a))
        elif isinstance(ax, SubClass):
            if isinstance(ax.sup, NamedClass) and not isinstance(ax.sub, NamedClass):
                defs.add((ax.sup.name, ax.sub))
    from .syntax import render_expression

    return sorted(defs, key=lambda d: (d[0], render_expression(d[1])))


def _nesting(expr) -> int:
    if isinstance(expr, (Exists, ExactlyOne, ValueOnly)):
        return 1 + _nesting(expr.filler)
    if isinstance(expr, Intersection):
        return max(_nesting(op) for op in expr.operands)
    return 0


def _literal_fits(lit: Literal, expr) -> bool:
    if isinstance(expr, NamedClass):
        if not is_datatype_name(expr.name):
            return False
        return expr.name.local == lit.datatype
    if isinstance(expr, Intersection):
        return all(_literal_fits(lit, op) for op in expr.operands)
    return False


class _Evaluator:
    """Checks whether an individual satisfies a class expression in a graph."""

    def __init__(self, index: TripleIndex, classification: Classification | None,
                 closed_world: bool):
        self.index = index
        self.cls = classification
        self.closed_world = closed_world

    def types(self, x) -> set:
        return self.index.objects(x, RDF_TYPE)

    def sat(self, x, expr, extra_types=()) -> bool:
        if isinstance(x, Literal):
            return _literal_fits(x, expr)
        types = self.types(x)
        if self.cls is not None:
            atom = self.cls.atom_of(expr)
            if atom is not None:
                for t in types:
                    if atom in self.cls.subsumers(t):
                        return True
        if isinstance(expr, NamedClass):
            return expr.name in types or expr.name in extra_types
        if isinstance(expr, Intersection):
            return all(self.sat(x, op, extra_types) for op in expr.operands)
        if isinstance(expr, Exists):
            return any(self.sat(y, expr.filler) for y in self.index.objects(x, expr.property))
        if isinstance(expr, CodeRestriction):
            return expr.literal in self.index.objects(x, expr.property)
        if isinstance(expr, DataRange):
            return any(isinstance(v, Literal) and v.compare(expr.comparator, expr.bound)
                       for v in self.index.objects(x, expr.property))
        if isinstance(expr, ExactlyOne):
            if not self.closed_world:
                return False
            hits = [y for y in self.index.objects(x, expr.property) if self.sat(y, expr.filler)]
            return len(hits) == 1
        if isinstance(expr, Enumeration):
            return x in expr.individuals
        return False


def skolem_name(rule: HornRule, var: str, binding) -> Name:
    key = rule.id + "|" + var + "|" + "|".join(
        f"{k}={_term_text(binding[k])}" for k in rule.body_variables)
    digest = hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]
    prefix = None
    for p in rule.head:
        if var in {v.name for v in p.variables()} and isinstance(p.predicate, Name) \
                and p.predicate != RDF_TYPE:
            prefix = p.predicate.prefix
            break
    if prefix is None:
        prefix = next(p.predicate.prefix for p in rule.head if isinstance(p.predicate, Name))
    return Name(prefix, f"_sk_{rule.id}_{digest}")


def is_skolem(term) -> bool:
    return isinstance(term, Name) and term.local.startswith("_sk_")


def _term_text(term) -> str:
    if isinstance(term, Literal):
        return f'"{term.lexical}"^^{term.datatype}'
    return str(term)


class _Saturator:
    def __init__(self, g: Graph, axioms: frozenset, rules, closed_world: bool):
        self.cls = _classification(axioms)
        self.rules = list(rules)
        self.defs = _definitions(axioms)
        self.depth = max((_nesting(e) for _, e in self.defs), default=0)
        self.index = TripleIndex()
        self.eval = _Evaluator(self.index, self.cls, closed_world)
        self.queue = deque()
        self.dirty = set()
        self.preds = defaultdict(set)
        self.skolems = {}
        self.rules_by_pred = defaultdict(list)
        self.rules_any = []
        for rule in self.rules:
            for i, p in enumerate(rule.body):
                if isinstance(p.predicate, Var):
                    self.rules_any.append((rule, i))
                else:
                    self.rules_by_pred[p.predicate].append((rule, i))
        for t in g:
            self.add(t)

    def add(self, t: Triple):
        if self.index.add(t):
            self.queue.append(t)
            if isinstance(t.object, Name) and not t.is_type:
                self.preds[t.object].add(t.subject)
            self._mark(t.subject)

    def _mark(self, x):
        # x may already be dirty from a deeper mark that never reached its own predecessors
        seen = frontier = {x}
        for _ in range(self.depth):
            frontier = set().union(*(self.preds.get(y, ()) for y in frontier)) - seen
            if not frontier:
                break
            seen |= frontier
        self.dirty |= seen

    def add_types(self, y, expr):
        if isinstance(y, Literal):
            return
        if isinstance(expr, NamedClass) and not is_datatype_name(expr.name):
            self.add(Triple(y, RDF_TYPE, expr.name))
        elif isinstance(expr, Intersection):
            for op in expr.operands:
                self.add_types(y, op)

    def role_sup(self, p):
        return self.cls.role_sup.get(p, (p,))

    def process(self, t: Triple):
        x = t.subject
        if t.is_type:
            if not isinstance(t.object, Name):
                return
            c = t.object
            for d in self.cls.named_supers(c):
                self.add(Triple(x, RDF_TYPE, d))
            for role, lit in self.cls.codes(c):
                self.add(Triple(x, role, lit))
            for role, filler in self.cls.only_constraints(c):
                for y in list(self.index.objects(x, role)):
                    self.add_types(y, filler)
        else:
            for q in self.role_sup(t.predicate):
                self.add(Triple(x, q, t.object))
            if isinstance(t.object, Name):
                for c in list(self.index.objects(x, RDF_TYPE)):
                    for role, filler in self.cls.only_constraints(c):
                        if role == t.predicate:
                            self.add_types(t.object, filler)
        self.fire_rules(t)

    def fire_rules(self, t: Triple):
        seeds = self.rules_by_pred.get(t.predicate, []) + self.rules_any
        for rule, i in seeds:
            start = _unify(rule.body[i], t, {})
            if start is None:
                continue
            rest = rule.body[:i] + rule.body[i + 1:]
            for binding in list(self.index.solve(rest, start)):
                self.fire(rule, binding)

    def fire(self, rule: HornRule, binding: dict):
        if rule.creates:
            if any(is_skolem(v) for v in binding.values()):
                return  # generative rules never fire on skolems, so chains stay finite
            binding = dict(binding)
            for var in rule.creates:
                binding[var] = skolem_name(rule, var, binding)
        for p in rule.head:
            self.add(p.substitute(binding))

    def recognise(self):
        changed = False
        batch, self.dirty = self.dirty, set()  # additions below re-mark for the next round
        for x in sorted(batch, key=str):
            for c, expr in self.defs:
                if Triple(x, RDF_TYPE, c) not in self.index and self.eval.sat(x, expr):
                    self.add(Triple(x, RDF_TYPE, c))
                    changed = True
        return changed

    def run(self) -> Graph:
        while True:
            while self.queue:
                self.process(self.queue.popleft())
            self.recognise()
            if not self.queue:
                break
        return self.index.graph()


def saturate(g: Graph, tbox: Ontology | Iterable[Axiom], property_axioms: Iterable[Axiom] = (),
             rules: Iterable[HornRule] = (), *, closed_world: bool = True) -> Graph:
    """Least fixpoint of the TBox consequences and rules over ``g``.

    With ``closed_world`` set, ``ExactlyOne`` conjuncts in class definitions are
    checked by counting successors in the graph; otherwise they are only
    satisfied when entailed by an asserted type.
    """
    axioms = tbox.axioms if isinstance(tbox, Ontology) else frozenset(tbox)
    axioms = frozenset(axioms) | frozenset(property_axioms)
    return _Saturator(g, axioms, rules, closed_world).run()


def recognize(g: Graph, individual: Name, target: Ontology,
              lattice: SubsumptionLattice) -> frozenset:
    """Named classes of ``target`` that ``individual`` is recognised as in ``g``.

    Cardinality conjuncts are counted over ``g`` alone (closed world).
    """
    index = TripleIndex(g)
    evaluator = _Evaluator(index, None, closed_world=True)
    classes = target.classes()
    found = {c for c in index.objects(individual, RDF_TYPE) if c in classes}
    defs = [(c, e) for c, e in _definitions(target.axioms) if c in classes]
    changed = True
    while changed:
        changed = False
        for c, expr in defs:
            if c not in found and evaluator.sat(individual, expr, extra_types=found):
                found.add(c)
                changed = True
        closed = set(found)
        for c in found:
            closed |= {d for d in lattice.superclasses(c) if d in classes}
        if closed != found:
            found = closed
            changed = True
    return frozenset(found)
