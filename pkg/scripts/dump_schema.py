#!/usr/bin/env python3
"""Regenerate docs/manifest.schema.json from the embedded manifest schema."""
import json
from pathlib import Path

from moviemap.store import MANIFEST_SCHEMA

out = Path(__file__).resolve().parent.parent / "docs" / "manifest.schema.json"
out.write_text(json.dumps(MANIFEST_SCHEMA, indent=2) + "\n", encoding="utf-8")
print(f"wrote {out}")
