import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from semlink.store import match  # noqa: E402
from semlink.syntax import parse_ontology, parse_patterns  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "semlink" / "data" / "ecg"

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


def load_onto(name: str):
    return parse_ontology((DATA / name).read_text(encoding="utf-8"))


def embeds(golden_text: str, graph):
    """Bindings placing every golden triple in ``graph``; ?vars stand for minted nodes."""
    return match(graph, parse_patterns(golden_text))
