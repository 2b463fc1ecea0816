"""``semlink`` command line: translate, map and transfer."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

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
from .mapping import (
    ConfirmationError,
    MappingError,
    build_integration_mapping,
    load_mapping_config,
    serialize_integration_mapping,
)
from .sigma import link_to_json
from .syntax import ParseError, parse_ontology, serialize_ontology, serialize_rules
from .transfer import PipelineConfig, PipelineError, intermediate_files, run_pipeline

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("semlink")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def write_outputs(files: dict):
    """Write every file or none: temp files first, renamed once all succeeded."""
    staged = []
    try:
        for path, text in sorted(files.items()):
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except OSError:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def _read_ontology(path) -> object:
    return parse_ontology(Path(path).read_text(encoding="utf-8"))


def cmd_translate(args) -> int:
    try:
        schema = load_schema(args.schema)
        tm = load_tm(args.tm)
        edits = load_edits(args.edits, schema.prefix) if args.edits else []
    except (OSError, SchemaError, ParseError) as exc:
        raise CliError(1, str(exc)) from None
    try:
        ontology, links = translate_schema(schema, tm)
        ontology = apply_edit_script(ontology, edits)
        links = rename_links(links, edits)
    except (TranslationError, EditError) as exc:
        raise CliError(2, str(exc)) from None
    out = Path(args.out)
    links_doc = json.dumps([link_to_json(link) for link in links], indent=2, sort_keys=True)
    write_outputs({
        out / "ontology.onto": serialize_ontology(ontology),
        out / "links.json": links_doc + "\n",
    })
    log.info("wrote %d axioms and %d import links to %s", len(ontology.axioms), len(links), out)
    return 0


def cmd_map(args) -> int:
    try:
        app = _read_ontology(args.app)
        canonical = _read_ontology(args.canonical)
        config = load_mapping_config(args.config)
        if args.max_path_length is not None:
            config = type(config)(args.max_path_length, config.confirmations, config.basic)
        im = build_integration_mapping(app, canonical, config)
    except ConfirmationError as exc:
        raise CliError(3, str(exc)) from None
    except (OSError, ParseError, MappingError) as exc:
        raise CliError(1, str(exc)) from None
    out = Path(args.out)
    report = "".join(f"{c}\n" for c in im.unconfirmed)
    write_outputs({
        out / "mapping.im": serialize_integration_mapping(im),
        out / "rules.txt": serialize_rules(im.rules()),
        out / "candidates.txt": report,
    })
    log.info("%d mapping axioms, %d path mappings, %d unconfirmed candidates",
             len(im.axioms), len(im.path_mappings), len(im.unconfirmed))
    return 0


def cmd_transfer(args) -> int:
    try:
        config = PipelineConfig.load(args.config)
        out = Path(args.out) if args.out else config.out_dir
        if out is None:
            raise PipelineError(1, "no output directory: set 'out' in the config or pass --out")
        result = run_pipeline(config)
    except PipelineError as exc:
        raise CliError(exc.step, str(exc)) from None
    files = {out / "document.xml": result.document, out / "report.json": result.report.to_json()}
    if args.emit_intermediate:
        for name, text in intermediate_files(result).items():
            files[Path(args.emit_intermediate) / name] = text
    write_outputs(files)
    log.info("document written with template %s", result.report.template)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semlink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="relational schema -> application ontology")
    p.add_argument("--schema", required=True)
    p.add_argument("--tm", required=True)
    p.add_argument("--edits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("map", help="build an integration mapping")
    p.add_argument("--app", required=True)
    p.add_argument("--canonical", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-path-length", type=int)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("transfer", help="run the transfer pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--emit-intermediate", metavar="DIR")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_transfer)
    return parser


def _setup_logging():
    level_name = os.environ.get("SEMLINK_LOG", "quiet").lower()
    level = LOG_LEVELS.get(level_name, logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "max_path_length", None) is not None and args.max_path_length < 1:
        print("semlink: --max-path-length must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliError as exc:
        print(f"semlink {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"semlink {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
