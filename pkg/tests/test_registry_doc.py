"""The published registry document must match the in-code registry."""

import json
from pathlib import Path

from pipeline_pilot.pipeline import registry

DOC_PATH = Path(__file__).resolve().parents[1] / "docs" / "registry.json"


def test_registry_doc_matches_code():
    doc = json.loads(DOC_PATH.read_text(encoding="utf-8"))
    assert doc["separator"] == " — "
    entries = {e["name"]: e for e in doc["primitives"]}
    assert set(entries) == {d.name for d in registry()}
    for d in registry():
        entry = entries[d.name]
        assert entry["kind"] == d.kind.name
        assert entry["signature"] == d.signature
        assert entry["doc_header"] == d.doc_header
        assert [p["name"] for p in entry["params"]] == list(d.param_schema)
        for p in entry["params"]:
            ps = d.param_schema[p["name"]]
            assert p["type"] == ps.type
            assert p["default"] == ps.default
            assert p["low"] == ps.low
            assert p["high"] == ps.high
