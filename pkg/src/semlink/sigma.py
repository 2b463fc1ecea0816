"""Row-to-triple import links between a relational schema and its ontology."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .model import Name


@dataclass(frozen=True)
class AsNode:
    """Mint a value node typed ``node_class``, linked by ``property``, holding the value."""

    property: Name
    node_class: Name
    value_property: Name


@dataclass(frozen=True)
class AsLink:
    """Foreign key: link to the individual of the referenced row."""

    property: Name
    target: str


@dataclass(frozen=True)
class AsData:
    property: Name


Directive = Union[AsNode, AsLink, AsData]


@dataclass(frozen=True)
class SigmaImportLink:
    relation: str
    prefix: str
    key: tuple
    cls: Name
    directives: tuple  # ((attribute, Directive), ...)

    def directive(self, attribute: str):
        for attr, d in self.directives:
            if attr == attribute:
                return d
        return None

    def renamed(self, mapping: dict) -> "SigmaImportLink":
        def r(n):
            return mapping.get(n, n)

        out = []
        for attr, d in self.directives:
            if isinstance(d, AsNode):
                d = AsNode(r(d.property), r(d.node_class), r(d.value_property))
            elif isinstance(d, AsLink):
                d = AsLink(r(d.property), d.target)
            else:
                d = AsData(r(d.property))
            out.append((attr, d))
        return SigmaImportLink(self.relation, self.prefix, self.key, r(self.cls), tuple(out))


def _name(text: str) -> Name:
    prefix, _, local = text.partition(":")
    return Name(prefix, local)


def link_to_json(link: SigmaImportLink) -> dict:
    attrs = {}
    for attr, d in link.directives:
        if isinstance(d, AsNode):
            attrs[attr] = {"as": "node", "property": str(d.property),
                           "class": str(d.node_class), "value": str(d.value_property)}
        elif isinstance(d, AsLink):
            attrs[attr] = {"as": "link", "property": str(d.property), "target": d.target}
        else:
            attrs[attr] = {"as": "data", "property": str(d.property)}
    return {"relation": link.relation, "prefix": link.prefix, "key": list(link.key),
            "class": str(link.cls), "attributes": attrs}


def link_from_json(data: dict) -> SigmaImportLink:
    directives = []
    for attr, spec in sorted(data["attributes"].items()):
        kind = spec["as"]
        if kind == "node":
            d = AsNode(_name(spec["property"]), _name(spec["class"]), _name(spec["value"]))
        elif kind == "link":
            d = AsLink(_name(spec["property"]), spec["target"])
        elif kind == "data":
            d = AsData(_name(spec["property"]))
        else:
            raise ValueError(f"unknown directive {kind!r} for {data['relation']}.{attr}")
        directives.append((attr, d))
    return SigmaImportLink(data["relation"], data["prefix"], tuple(data["key"]),
                           _name(data["class"]), tuple(directives))
