"""Translate the ECG schema into an application ontology.

Shows the raw translation, then the same ontology after the administrator's
edit script has renamed properties and tightened the diagnosis definitions.
"""
from importlib import resources

from semlink.db2onto import apply_edit_script, load_edits, load_schema, load_tm, translate_schema
from semlink.syntax import render_axiom

DATA = resources.files("semlink") / "data" / "ecg"


def show(title, ontology):
    print(f"== {title} ({len(ontology.axioms)} axioms)")
    for ax in sorted(ontology.axioms, key=render_axiom):
        print("  ", render_axiom(ax))
    print()


schema = load_schema(DATA / "schema.json")
raw, links = translate_schema(schema, load_tm(DATA / "tm.json"))
show("translated", raw)

edited = apply_edit_script(raw, load_edits(DATA / "edits.json", schema.prefix))
show("after manual edits", edited)

print("== import links")
for link in links:
    print(f"   {link.relation}: {len(link.directives)} attribute directives -> {link.cls}")
