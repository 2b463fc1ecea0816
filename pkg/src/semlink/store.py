"""Indexed in-memory triple store and conjunctive pattern matching."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Iterator

from .model import Binding, Graph, Triple, TriplePattern, Var


class TripleIndex:
    """Mutable working set used while evaluating rules; never exposed as a result."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self.triples = set()
        self.by_sp = defaultdict(set)
        self.by_po = defaultdict(set)
        self.by_p = defaultdict(set)
        self.by_s = defaultdict(set)
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> bool:
        if t in self.triples:
            return False
        self.triples.add(t)
        self.by_sp[t.subject, t.predicate].add(t.object)
        self.by_po[t.predicate, t.object].add(t.subject)
        self.by_p[t.predicate].add((t.subject, t.object))
        self.by_s[t.subject].add(t)
        return True

    def __contains__(self, t):
        return t in self.triples

    def __len__(self):
        return len(self.triples)

    def objects(self, subject, predicate) -> set:
        return self.by_sp.get((subject, predicate), set())

    def subjects(self, predicate, obj) -> set:
        return self.by_po.get((predicate, obj), set())

    def graph(self) -> Graph:
        return Graph(frozenset(self.triples))

    # -- matching ------------------------------------------------------------

    def _candidates(self, pattern: TriplePattern, binding: dict) -> Iterator[Triple]:
        s, p, o = (binding.get(t.name, t) if isinstance(t, Var) else t
                   for t in (pattern.subject, pattern.predicate, pattern.object))
        s_var, p_var, o_var = (isinstance(t, Var) for t in (s, p, o))
        if not p_var:
            if not s_var and not o_var:
                t = Triple(s, p, o)
                if t in self.triples:
                    yield t
            elif not s_var:
                for obj in self.objects(s, p):
                    yield Triple(s, p, obj)
            elif not o_var:
                for subj in self.subjects(p, o):
                    yield Triple(subj, p, o)
            else:
                for subj, obj in self.by_p.get(p, ()):
                    yield Triple(subj, p, obj)
        elif not s_var:
            for t in self.by_s.get(s, ()):
                yield t
        else:
            yield from self.triples

    def _bound_count(self, pattern: TriplePattern, binding: dict) -> int:
        return sum(1 for t in (pattern.subject, pattern.predicate, pattern.object)
                   if not isinstance(t, Var) or t.name in binding)

    def solve(self, patterns, binding: dict | None = None) -> Iterator[dict]:
        """Yield every extension of ``binding`` satisfying all patterns (may repeat)."""
        binding = dict(binding or {})
        remaining = list(patterns)
        if not remaining:
            yield binding
            return
        # most-constrained pattern first
        idx = max(range(len(remaining)), key=lambda i: self._bound_count(remaining[i], binding))
        pattern = remaining.pop(idx)
        for t in self._candidates(pattern, binding):
            extended = _unify(pattern, t, binding)
            if extended is not None:
                yield from self.solve(remaining, extended)


def _unify(pattern: TriplePattern, t: Triple, binding: dict):
    out = binding
    for term, value in ((pattern.subject, t.subject), (pattern.predicate, t.predicate),
                        (pattern.object, t.object)):
        if isinstance(term, Var):
            bound = out.get(term.name)
            if bound is None:
                if out is binding:
                    out = dict(binding)
                out[term.name] = value
            elif bound != value:
                return None
        elif term != value:
            return None
    return out


def match(g: Graph | TripleIndex, patterns) -> set:
    """Return every Binding under which all patterns instantiate to triples of ``g``."""
    index = g if isinstance(g, TripleIndex) else TripleIndex(g)
    patterns = list(patterns)
    if not patterns:
        return {Binding()}
    return {Binding(b) for b in index.solve(patterns)}
