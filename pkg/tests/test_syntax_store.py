import random
from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from semlink.model import (
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
    ValueOnly,
    intersection,
    xsd,
)
from semlink.reasoner import HornRule
from semlink.store import match
from semlink.syntax import (
    ParseError,
    parse_axiom,
    parse_graph,
    parse_ontology,
    parse_path,
    parse_patterns,
    parse_rules,
    render_axiom,
    serialize_graph,
    serialize_ontology,
    serialize_rules,
)

from conftest import DATA, load_onto
from oracles import match_oracle, random_graph, random_patterns

# -- strategies ---------------------------------------------------------------------

locals_ = st.sampled_from(["A", "B", "P-Axis", "ECG_1", "hasQRS-Axis", "é"])
prefixes = st.sampled_from(["a", "b", "c"])
names = st.builds(Name, prefixes, locals_)
literals = st.one_of(
    st.builds(Literal, st.text(max_size=8)),
    st.builds(lambda i: Literal(str(i), "int"), st.integers(-10**6, 10**6)),
    st.builds(lambda d: Literal(d, "decimal"), st.sampled_from(["0.5", "-3.25", "1e2", "10"])),
    st.builds(lambda b: Literal("true" if b else "false", "boolean"), st.booleans()),
    st.builds(lambda d: Literal(d.isoformat(), "date"),
              st.dates(date(1900, 1, 1), date(2100, 1, 1))),
)
named = st.builds(NamedClass, names)
leaves = st.one_of(
    named,
    st.builds(CodeRestriction, names, literals),
    st.builds(DataRange, names, st.sampled_from(["<", "<=", ">", ">=", "="]), literals),
    st.builds(Complement, named),
    st.builds(lambda ns: Enumeration(tuple(ns)), st.lists(names, min_size=1, max_size=3)),
    st.builds(lambda: NamedClass(xsd("int"))),
)


def _compound(children):
    return st.one_of(
        st.builds(Exists, names, children),
        st.builds(ExactlyOne, names, children),
        st.builds(ValueOnly, names, children),
        st.lists(children, min_size=2, max_size=3).filter(
            lambda ops: len({*ops}) > 1).map(lambda ops: intersection(*ops)),
    )


expressions = st.recursive(leaves, _compound, max_leaves=6)
axioms = st.one_of(
    st.builds(SubClass, expressions, expressions),
    st.builds(EquivClass, expressions, expressions),
    st.builds(SubProperty, names, names),
    st.builds(EquivProperty, names, names),
    st.builds(Disjoint, names, names),
    st.builds(SameIndividual, names, names),
    st.builds(PropertyDomain, names, names),
    st.builds(PropertyRange, names, names),
)
ontologies = st.builds(lambda axs: Ontology("gen", "a", frozenset(axs), ("b", "c")),
                       st.lists(axioms, max_size=8))


# -- ontology documents --------------------------------------------------------------


@given(ontologies)
def test_ontology_round_trip(o):
    text = serialize_ontology(o)
    back = parse_ontology(text)
    assert back.axioms == o.axioms
    assert serialize_ontology(back) == text


def test_single_axiom_document():
    o = parse_ontology('ontology x\nprefix a\nEquivClass(a:ECGDiagnosis, Code(a:loinc, "8601-7"))\n')
    assert len(o.axioms) == 1
    (ax,) = o.axioms
    assert ax.second == CodeRestriction(Name("a", "loinc"), Literal("8601-7"))


def test_header_only_document():
    o = parse_ontology("ontology empty\nprefix a\n")
    assert o.axioms == frozenset()
    assert serialize_ontology(o) == "ontology empty\nprefix a\n"


def test_fixture_documents_round_trip():
    text = (DATA / "a.onto").read_text(encoding="utf-8")
    assert serialize_ontology(parse_ontology(text)) == text
    for name in ("canonical.onto", "receiver_b.onto"):  # hand-written, with comments
        o = parse_ontology((DATA / name).read_text(encoding="utf-8"))
        assert parse_ontology(serialize_ontology(o)) == o


def test_serialization_is_deterministic():
    o = Ontology("x", "a", frozenset({parse_axiom("SubClass(a:A, a:B)"),
                                      parse_axiom("SubClass(a:B, a:C)")}))
    assert serialize_ontology(o) == serialize_ontology(Ontology("x", "a", frozenset(o.axioms)))


def test_default_prefix_applies_to_bare_names():
    assert parse_axiom("SubClass(A, Exists(p, B))", "b") == parse_axiom(
        "SubClass(b:A, Exists(b:p, b:B))")


@pytest.mark.parametrize("text", [
    "SubClass(a:A)",
    "SubClass(a:A, a:B",
    "Frobnicate(a:A, a:B)",
    "SubClass(a:A, Range(a:p, \"!\", 3))",
    "SubClass(a:A, a:B) trailing",
    'SubClass(a:A, Code(a:p, "x"^^xsd:int))',
])
def test_malformed_axioms(text):
    with pytest.raises(ParseError):
        parse_axiom(text)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_ontology("ontology x\nprefix a\nSubClass(a:A, a:B)\nSubClass(a:A,, a:B)\n")
    assert info.value.line == 4


def test_literals_normalise():
    assert Literal("027", "int") == Literal("27", "int")
    assert Literal("1.50", "decimal") == Literal("1.5", "decimal")
    assert Literal.of(True) == Literal("true", "boolean")
    with pytest.raises(ValueError):
        Literal("maybe", "boolean")


# -- graphs and rules ----------------------------------------------------------------


@given(st.integers(0, 10_000))
def test_graph_round_trip(seed):
    g = random_graph(random.Random(seed))
    assert parse_graph(serialize_graph(g)) == g


def test_rule_round_trip():
    text = ("rule r: (?e type c:ECGRecording), (?e c:comp ?p), (?p type c:P-Axis)"
            " -> (?e a:hasAxis ?x), (?x a:hasP-Axis ?p), !fresh(?x)\n")
    rules = parse_rules(text)
    assert rules[0].creates == ("x",)
    assert serialize_rules(rules) == text


def test_rule_validation():
    with pytest.raises(ParseError):
        parse_rules("rule r: (?a p:q ?b) -> (?a p:q ?c)\n")
    with pytest.raises(ValueError):
        HornRule("r", (), ())


def test_path_syntax():
    p = parse_path("a:ECGObservation.a:hasAxis[a:ECGAxis].a:hasP-Axis[a:P-Axis]")
    assert p.length == 2 and p.end == Name("a", "P-Axis")
    assert str(p) == "a:ECGObservation.a:hasAxis[a:ECGAxis].a:hasP-Axis[a:P-Axis]"


# -- pattern matching ----------------------------------------------------------------

STEP1 = """(a:ecg01 type a:ECGDiagnosis)
(a:ecg01 a:finding a:f01)
(a:f01 a:value "Normal ECG")
(a:ecg01 a:recording a:r01)
(a:r01 type a:ECGObservation)
(a:r01 a:hasAxis a:ax01)
(a:ax01 type a:ECGAxis)
(a:ax01 a:hasP-Axis a:pax01)
(a:pax01 type a:P-Axis)
(a:pax01 a:value 27)
"""


def test_match_r1_body_on_step1():
    g = parse_graph(STEP1)
    out = match(g, parse_patterns(
        "(?e type a:ECGObservation), (?e a:hasAxis ?x), (?x a:hasP-Axis ?p)"))
    assert [dict(b) for b in out] == [
        {"e": Name("a", "r01"), "x": Name("a", "ax01"), "p": Name("a", "pax01")}]


def test_match_edge_cases():
    pats = parse_patterns("(?e type a:ECGObservation)")
    assert match(Graph(), pats) == set()
    ground = parse_patterns("(a:r01 type a:ECGObservation)")
    assert [dict(b) for b in match(parse_graph(STEP1), ground)] == [{}]


def test_repeated_variable_in_one_pattern():
    g = parse_graph("(a:x a:p a:x)\n(a:x a:p a:y)\n")
    assert [dict(b) for b in match(g, parse_patterns("(?v a:p ?v)"))] == [{"v": Name("a", "x")}]


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_match_equals_brute_force(seed, k):
    rng = random.Random(seed)
    g = random_graph(rng, n_triples=12 if k < 4 else 7)
    pats = random_patterns(rng, k=k)
    got = {frozenset(b.items()) for b in match(g, pats)}
    assert got == match_oracle(g, pats)


@given(st.integers(0, 10**6))
def test_match_is_monotone(seed):
    rng = random.Random(seed)
    g = random_graph(rng)
    extra = random_graph(rng)
    pats = random_patterns(rng, k=rng.randint(1, 3))
    assert match(g, pats) <= match(g | extra, pats)


def test_match_brute_force_on_larger_graphs():
    # up to 50 triples with 2 patterns keeps the oracle's |g|^k join small
    for seed in range(40):
        rng = random.Random(seed)
        g = random_graph(rng, n_triples=50)
        pats = random_patterns(rng, k=2)
        assert {frozenset(b.items()) for b in match(g, pats)} == match_oracle(g, pats)


def test_individuals_and_types():
    g = parse_graph(STEP1)
    assert Name("a", "pax01") in g.individuals()
    assert g.types_of(Name("a", "ax01")) == {Name("a", "ECGAxis")}
    assert Triple(Name("a", "pax01"), Name("a", "value"), Literal("27", "int")) in g


def test_worked_fixture_loads():
    assert len(load_onto("a.onto").axioms) > 20
