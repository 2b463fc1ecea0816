"""Classify the canonical ontology and saturate a small ECG graph."""
from importlib import resources

from semlink.reasoner import classify, saturate
from semlink.syntax import parse_graph, parse_ontology, serialize_graph

DATA = resources.files("semlink") / "data" / "ecg"

canonical = parse_ontology((DATA / "canonical.onto").read_text(encoding="utf-8"))
lattice = classify(canonical)
print("canonical subsumptions (direct and inferred):")
for sub, sup in sorted(lattice.subsumes):
    if sub != sup and sub.prefix == "c" and sup.prefix == "c":
        print(f"  {sub} <= {sup}")

app = parse_ontology((DATA / "a.onto").read_text(encoding="utf-8"))
g = parse_graph("""(a:ecg01 type a:ECGDiagnosis)
(a:ecg01 a:finding a:f01)
(a:f01 a:value "Normal ECG")
(a:f01 type a:ECGFinding)
""")
out = saturate(g, app)
print("\nnew triples after saturation with the sender ontology:")
print(serialize_graph(type(g)(out.triples - g.triples)), end="")
