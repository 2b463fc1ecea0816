"""Discover the sender and receiver integration mappings against the canonical ontology."""
from importlib import resources

from semlink.mapping import build_integration_mapping, load_mapping_config
from semlink.syntax import parse_ontology, render_axiom, serialize_rules

DATA = resources.files("semlink") / "data" / "ecg"


def onto(name):
    return parse_ontology((DATA / name).read_text(encoding="utf-8"))


canonical = onto("canonical.onto")
for app_file, config_file in [("a.onto", "map_a.json"), ("receiver_b.onto", "map_b.json")]:
    im = build_integration_mapping(onto(app_file), canonical,
                                   load_mapping_config(DATA / config_file))
    print(f"== {app_file}")
    for ax in sorted(im.axioms, key=render_axiom):
        print("  ", render_axiom(ax))
    print("  path mappings:")
    for pm in im.path_mappings:
        print("    ", pm)
    print(f"  unconfirmed candidates: {len(im.unconfirmed)}")
    print("  rules:")
    for line in serialize_rules(im.rules()).splitlines():
        print("    ", line)
    print()
