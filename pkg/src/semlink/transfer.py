"""Sending a clinical statement from one system to another.

Rows are lifted to triples through the import links, enriched with the
sender's ontology, rewritten into canonical vocabulary, recognised against the
receiver's ontology and finally emitted through one of the receiver's
document templates.  Steps 4 and 5 only see the message and receiver-side
artifacts.
"""
from __future__ import annotations

import json
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional
from xml.sax.saxutils import escape

from .db2onto import (
    EditError,
    SchemaError,
    TranslationError,
    apply_edit_script,
    load_edits,
    load_schema,
    load_tm,
    rename_links,
    translate_schema,
)
from .mapping import IntegrationMapping, MappingError, load_integration_mapping
from .model import RDF_TYPE, Graph, Literal, Name, Ontology, Triple, Var
from .reasoner import SubsumptionLattice, classify, recognize, saturate
from .sigma import AsData, AsLink, AsNode, SigmaImportLink, link_from_json, link_to_json
from .store import TripleIndex
from .syntax import ParseError, parse_patterns, render_term, serialize_graph

__all__ = [
    "AsData", "AsLink", "AsNode", "SigmaImportLink", "link_from_json", "link_to_json",
    "RowSet", "Message", "ExportTemplate", "TransferReport", "PipelineConfig", "PipelineError",
    "TemplateError", "LiftError", "load_rows", "load_templates", "step1_lift", "step2_enrich",
    "step3_canonicalize", "step4_recognize", "step5_emit", "select_template", "run_pipeline",
]

log = logging.getLogger(__name__)


class LiftError(ValueError):
    pass


class TemplateError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


# -- rows and lifting ----------------------------------------------------------


@dataclass(frozen=True)
class RowSet:
    rows: tuple  # ((relation, (row, ...)), ...) with each row a sorted ((attr, Literal), ...)

    @classmethod
    def from_dict(cls, data: dict) -> "RowSet":
        out = []
        for relation in sorted(data):
            rows = []
            for row in data[relation]:
                if not isinstance(row, dict):
                    raise LiftError(f"rows of {relation} must be objects")
                rows.append(tuple(sorted((k, Literal.of(v)) for k, v in row.items()
                                         if v is not None)))
            out.append((relation, tuple(rows)))
        return cls(tuple(out))

    def __len__(self):
        return sum(len(rows) for _, rows in self.rows)

    def relation(self, name: str) -> tuple:
        for rel, rows in self.rows:
            if rel == name:
                return rows
        return ()


def load_rows(path) -> RowSet:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LiftError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise LiftError(f"{path}: expected an object keyed by relation")
    return RowSet.from_dict(data)


def _local(text: str) -> str:
    out = re.sub(r"[^\w\-]", "_", text).strip("-")
    if not out:
        raise LiftError(f"cannot build an individual name from {text!r}")
    return out


def _individual(link: SigmaImportLink, row: dict) -> Name:
    try:
        parts = [row[k].lexical for k in link.key]
    except KeyError as exc:
        raise LiftError(f"{link.relation} row without key attribute {exc}") from None
    return Name(link.prefix, _local("_".join(parts)))


def step1_lift(rows: RowSet, links: Iterable[SigmaImportLink]) -> Graph:
    """One individual per row; value nodes are named ``<key>_<attribute>``."""
    links = {link.relation: link for link in links}
    keys = {}
    for relation, rel_rows in rows.rows:
        if relation not in links:
            raise LiftError(f"no import link for relation {relation}")
        seen = set()
        for row in rel_rows:
            ind = _individual(links[relation], dict(row))
            if ind in seen:
                raise LiftError(f"duplicate key {ind.local} in {relation}")
            seen.add(ind)
        keys[relation] = seen
    triples = set()
    for relation, rel_rows in rows.rows:
        link = links[relation]
        for row in rel_rows:
            row = dict(row)
            ind = _individual(link, row)
            triples.add(Triple(ind, RDF_TYPE, link.cls))
            for attr, directive in link.directives:
                if attr not in row:
                    raise LiftError(f"{relation} row {ind.local} lacks attribute {attr}")
                value = row[attr]
                if isinstance(directive, AsLink):
                    target = Name(link.prefix, _local(value.lexical))
                    if target not in keys.get(directive.target, ()):
                        raise LiftError(f"dangling reference {relation}.{attr}={value.lexical} "
                                        f"to {directive.target}")
                    triples.add(Triple(ind, directive.property, target))
                elif isinstance(directive, AsNode):
                    node = Name(link.prefix, _local(f"{ind.local}_{attr}"))
                    triples.add(Triple(ind, directive.property, node))
                    triples.add(Triple(node, RDF_TYPE, directive.node_class))
                    triples.add(Triple(node, directive.value_property, value))
                else:
                    triples.add(Triple(ind, directive.property, value))
    return Graph(frozenset(triples))


# -- steps 2 to 4 ---------------------------------------------------------------


def step2_enrich(g: Graph, app: Ontology) -> Graph:
    return saturate(g, app)


@dataclass(frozen=True)
class Message:
    graph: Graph
    sender: str


def step3_canonicalize(g: Graph, im: IntegrationMapping) -> Message:
    out = saturate(g, im.merged(), rules=im.export_rules())
    return Message(out, im.app.id)


def step4_recognize(m: Message, im: IntegrationMapping):
    """Rewrite into the receiver's vocabulary and recognise every individual.

    Returns (graph, {individual: frozenset of receiver classes}).
    """
    g = saturate(m.graph, im.merged(), rules=im.import_rules())
    lattice = classify(im.merged())
    recognized = {ind: recognize(g, ind, im.app, lattice) for ind in sorted(g.individuals())}
    return g, recognized


# -- templates and emission -------------------------------------------------------

_SLOT_RE = re.compile(r"\{\{(slot\??) ([\w\-]+):(.*?)\}\}", re.S)
_EACH_RE = re.compile(r"\{\{each ([\w\-]+):(.*?)\}\}(.*?)\{\{/each\}\}", re.S)
_VAR_RE = re.compile(r"\{\{\?(\w+)\}\}")


@dataclass(frozen=True)
class ExportTemplate:
    id: str
    trigger: Name
    priority: int
    skeleton: str

    def __post_init__(self):
        for name, patterns in self.slots():
            _check_reachable(self.id, name, patterns)

    def slots(self) -> list:
        out = []
        for m in _EACH_RE.finditer(self.skeleton):
            out.append((m.group(1), _patterns(self.id, m.group(1), m.group(2))))
        for m in _SLOT_RE.finditer(_EACH_RE.sub("", self.skeleton)):
            out.append((m.group(2), _patterns(self.id, m.group(2), m.group(3))))
        return out


def _patterns(template_id: str, slot: str, text: str) -> list:
    try:
        return parse_patterns(text)
    except ParseError as exc:
        raise TemplateError(f"template {template_id}, slot {slot}: {exc}") from None


def _check_reachable(template_id: str, slot: str, patterns: list):
    reached, changed = {"root"}, True
    while changed:
        changed = False
        for p in patterns:
            names = {v.name for v in p.variables()}
            if names & reached and not names <= reached:
                reached |= names
                changed = True
    missing = {v.name for p in patterns for v in p.variables()} - reached
    if missing:
        raise TemplateError(f"template {template_id}, slot {slot}: variables "
                            f"{', '.join('?' + v for v in sorted(missing))} are not reachable from ?root")


def _parse_name(text: str) -> Name:
    prefix, sep, local = text.partition(":")
    if not sep or not prefix or not local:
        raise TemplateError(f"trigger {text!r} must be a prefixed class name")
    return Name(prefix, local)


def parse_templates(text: str) -> list:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise TemplateError(f"template file: {exc}") from None
    out, ids = [], set()
    for el in root.findall("template"):
        tid = el.get("id")
        trigger = el.get("trigger")
        skeleton = el.find("skeleton")
        if not tid or not trigger or skeleton is None:
            raise TemplateError("each template needs id, trigger and a skeleton")
        if tid in ids:
            raise TemplateError(f"duplicate template id {tid}")
        ids.add(tid)
        try:
            priority = int(el.get("priority", "0"))
        except ValueError:
            raise TemplateError(f"template {tid}: priority must be an integer") from None
        out.append(ExportTemplate(tid, _parse_name(trigger), priority, skeleton.text or ""))
    if not out:
        raise TemplateError("template file defines no templates")
    return out


def load_templates(path) -> list:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TemplateError(f"cannot read template file: {exc}") from None
    return parse_templates(text)


def select_template(templates: Iterable[ExportTemplate], classes: Iterable[Name],
                    lattice: SubsumptionLattice) -> ExportTemplate:
    """Deepest trigger among the recognised classes, then priority, then trigger name."""
    classes = frozenset(classes)
    usable = [t for t in templates if t.trigger in classes]
    if not usable:
        listed = ", ".join(str(c) for c in sorted(classes)) or "none"
        raise TemplateError(f"no template matches the recognised classes ({listed})")
    return min(usable, key=lambda t: (-lattice.depth(t.trigger), -t.priority, str(t.trigger), t.id))


def _text(term) -> str:
    return escape(term.lexical if isinstance(term, Literal) else str(term), {'"': "&quot;"})


def _sort_key(term):
    return render_term(term)


def fill_template(template: ExportTemplate, g: Graph, root: Name):
    """Return (document text, names of optional slots that matched nothing)."""
    index = TripleIndex(g)
    unmatched = []

    def solutions(patterns):
        return list(index.solve(patterns, {"root": root}))

    def each(m):
        name, patterns, body = m.group(1), _patterns(template.id, m.group(1), m.group(2)), m.group(3)
        rows = {tuple(sorted((k, v) for k, v in b.items())) for b in solutions(patterns)}
        if not rows:
            unmatched.append(name)
        chunks = []
        for row in sorted(rows, key=lambda r: [(k, _sort_key(v)) for k, v in r]):
            values = dict(row)

            def var(vm):
                if vm.group(1) not in values:
                    raise TemplateError(f"template {template.id}: ?{vm.group(1)} is not bound "
                                        f"in block {name}")
                return _text(values[vm.group(1)])

            chunks.append(_VAR_RE.sub(var, body))
        return "".join(chunks)

    def slot(m):
        optional, name = m.group(1) == "slot?", m.group(2)
        patterns = _patterns(template.id, name, m.group(3))
        values = {b["v"] for b in solutions(patterns) if "v" in b}
        if not values:
            if optional:
                unmatched.append(name)
                return ""
            raise TemplateError(f"template {template.id}: required slot {name} has no match")
        return _text(min(values, key=_sort_key))

    text = _EACH_RE.sub(each, template.skeleton)
    text = _SLOT_RE.sub(slot, text)
    return text.strip("\n") + "\n", tuple(sorted(unmatched))


def step5_emit(g: Graph, recognized: dict, templates: Iterable[ExportTemplate], root: Name,
               lattice: SubsumptionLattice):
    """Return (document, chosen template, unmatched optional slots)."""
    classes = recognized.get(root, frozenset())
    template = select_template(templates, classes, lattice)
    document, unmatched = fill_template(template, g, root)
    return document, template, unmatched


# -- pipeline ---------------------------------------------------------------------


@dataclass(frozen=True)
class TransferReport:
    root: str
    counts: tuple  # ((step, triple count), ...)
    recognized: tuple  # ((individual, (class, ...)), ...)
    most_specific: tuple
    template: str
    unmatched_slots: tuple = ()

    def to_json(self) -> str:
        data = {
            "root": self.root,
            "counts": dict(self.counts),
            "recognized": {ind: list(cs) for ind, cs in self.recognized},
            "mostSpecific": list(self.most_specific),
            "template": self.template,
            "unmatchedSlots": list(self.unmatched_slots),
        }
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class PipelineConfig:
    schema: Path
    tm: Path
    rows: Path
    sender_mapping: Path
    receiver_mapping: Path
    templates: Path
    root_relation: str
    root_key: str
    edits: Optional[Path] = None
    receiver_ontology: Optional[Path] = None
    out_dir: Optional[Path] = None

    @classmethod
    def from_json(cls, data: dict, base: Path = Path(".")) -> "PipelineConfig":
        def p(value):
            return None if value is None else (base / value)

        try:
            sender, receiver, root = data["sender"], data["receiver"], data["root"]
            return cls(
                schema=p(sender["schema"]), tm=p(sender["tm"]), rows=p(sender["rows"]),
                sender_mapping=p(sender["mapping"]), receiver_mapping=p(receiver["mapping"]),
                templates=p(receiver["templates"]), root_relation=root["relation"],
                root_key=str(root["key"]), edits=p(sender.get("edits")),
                receiver_ontology=p(receiver.get("ontology")), out_dir=p(data.get("out")),
            )
        except (KeyError, TypeError) as exc:
            raise PipelineError(1, f"pipeline config lacks {exc}") from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PipelineError(1, f"cannot read pipeline config: {exc}") from None
        return cls.from_json(data, path.parent)


@dataclass(frozen=True)
class PipelineResult:
    document: str
    report: TransferReport
    graphs: tuple  # step1..step4 graphs


def _sender_side(config: PipelineConfig):
    try:
        schema = load_schema(config.schema)
        tm = load_tm(config.tm)
        app, links = translate_schema(schema, tm)
        if config.edits is not None:
            edits = load_edits(config.edits, schema.prefix)
            app = apply_edit_script(app, edits)
            links = rename_links(links, edits)
        rows = load_rows(config.rows)
    except (OSError, SchemaError, TranslationError, EditError, LiftError, ValueError) as exc:
        raise PipelineError(1, str(exc)) from None
    if not len(rows):
        raise PipelineError(1, "no rows to send")
    root = Name(schema.prefix, _local(config.root_key))
    return app, links, rows, root


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    app, links, rows, root = _sender_side(config)
    try:
        g1 = step1_lift(rows, links)
    except LiftError as exc:
        raise PipelineError(1, str(exc)) from None
    if Triple(root, RDF_TYPE, Name(root.prefix, config.root_relation)) not in g1:
        raise PipelineError(1, f"root {root} is not a lifted {config.root_relation} row")
    log.info("step 1: %d triples", len(g1))

    g2 = step2_enrich(g1, app)
    log.info("step 2: %d triples", len(g2))

    try:
        sender_im = load_integration_mapping(config.sender_mapping)
    except (OSError, ValueError) as exc:
        raise PipelineError(3, f"sender mapping: {exc}") from None
    if sender_im.app.axioms != app.axioms:
        raise PipelineError(3, "sender mapping was built for a different application ontology")
    message = step3_canonicalize(g2, sender_im)
    log.info("step 3: %d triples", len(message.graph))

    try:
        receiver_im = load_integration_mapping(config.receiver_mapping)
        if config.receiver_ontology is not None:
            from .syntax import parse_ontology

            own = parse_ontology(Path(config.receiver_ontology).read_text(encoding="utf-8"))
            if own.axioms != receiver_im.app.axioms:
                raise MappingError("receiver mapping was built for a different ontology")
    except (OSError, ValueError) as exc:
        raise PipelineError(4, f"receiver mapping: {exc}") from None
    g4, recognized = step4_recognize(message, receiver_im)
    log.info("step 4: %d triples", len(g4))
    for ind in sorted(recognized):
        if not recognized[ind]:
            log.debug("%s matches no receiver class", ind)

    lattice = classify(receiver_im.merged())
    try:
        templates = load_templates(config.templates)
        document, template, unmatched = step5_emit(g4, recognized, templates, root, lattice)
    except TemplateError as exc:
        raise PipelineError(5, str(exc)) from None
    log.info("step 5: template %s", template.id)

    classes = recognized.get(root, frozenset())
    report = TransferReport(
        root=str(root),
        counts=(("step1", len(g1)), ("step2", len(g2)), ("step3", len(message.graph)),
                ("step4", len(g4))),
        recognized=tuple((str(ind), tuple(str(c) for c in sorted(cs)))
                         for ind, cs in sorted(recognized.items())),
        most_specific=tuple(str(c) for c in sorted(lattice.most_specific(classes))),
        template=template.id,
        unmatched_slots=unmatched,
    )
    return PipelineResult(document, report, (g1, g2, message.graph, g4))


def intermediate_files(result: PipelineResult) -> dict:
    """File name -> contents for the per-step graphs."""
    return {f"step{i}.graph": serialize_graph(g) for i, g in enumerate(result.graphs, start=1)}
