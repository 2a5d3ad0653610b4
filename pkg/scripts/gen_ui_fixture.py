#!/usr/bin/env python3
"""Regenerate the frontend test fixture from a real pipeline run.

Writes frontend/tests/fixtures/grid.json: a package manifest for a small
grid2x2 area (no asset files, the UI tests stub binary fetches) plus the
exits the server would return for every (node, arriving section) pair.
"""
import json
from pathlib import Path

from moviemap.assemble import assemble_area, exits_toward
from moviemap.fixtures import FixtureSpec, build_fixture, fixture_trajectories
from moviemap.intersect import DetectionParams, detect_all
from moviemap.register import register_area
from moviemap.store import build_manifest
from moviemap.turning import TurnMethod

world = build_fixture(FixtureSpec(layout="grid2x2", seed=7, street_length_m=60.0))
regs = register_area(fixture_trajectories(world))
records = detect_all(regs, params=DetectionParams(refine=False)).records
assembled = assemble_area(regs, records)
manifest = build_manifest(
    area_name=world.area_name,
    geo_ref=world.geo_ref,
    assembled=assembled,
    registered=regs,
    landmarks=world.landmarks,
    billboards=world.billboards,
    turn_method=TurnMethod.BLEND_ROTATE,
    turn_frames=30,
)

exits = {}
graph = assembled.graph
for node_id in sorted(graph.nodes):
    for arriving in graph.arriving_sections(node_id):
        key = f"{node_id}|{arriving.section_id}"
        exits[key] = [
            {"section_id": e.section_id, "bearing_rad": e.bearing_rad, "label": e.label}
            for e in exits_toward(graph, node_id, arriving.section_id)
        ]

out = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "grid.json"
out.parent.mkdir(parents=True, exist_ok=True)
out.write_text(json.dumps({"manifest": manifest, "exits": exits}, indent=1) + "\n")
print(f"wrote {out} ({out.stat().st_size // 1024} KiB)")
