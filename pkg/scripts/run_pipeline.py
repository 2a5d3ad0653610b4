#!/usr/bin/env python3
"""Run the whole build pipeline on a synthetic fixture and serve the result.

Example:

    python scripts/run_pipeline.py --layout grid2x2 --seed 7 --out /tmp/mm-demo
    python scripts/run_pipeline.py --layout cross --serve --ui-dir frontend/dist
"""
from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

STAGES_HELP = "fixture -> register -> detect -> assemble -> turns -> export [-> serve]"


def mm(*args: str) -> None:
    cmd = [sys.executable, "-m", "moviemap.cli", *args]
    print("+", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


def main() -> None:
    parser = argparse.ArgumentParser(description=STAGES_HELP)
    parser.add_argument("--layout", default="grid2x2")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--length", type=float, default=120.0)
    parser.add_argument("--frames-per-turn", type=int, default=30)
    parser.add_argument("--method", choices="ABC", default="C")
    parser.add_argument("--visual", action="store_true", help="Enable ORB refinement in detect.")
    parser.add_argument("--out", type=Path, default=Path("out/demo"))
    parser.add_argument("--serve", action="store_true")
    parser.add_argument("--addr", default="127.0.0.1:8080")
    parser.add_argument("--ui-dir", type=Path, default=None)
    args = parser.parse_args()

    root = args.out
    root.mkdir(parents=True, exist_ok=True)
    mm(
        "fixture", "--layout", args.layout, "--seed", str(args.seed),
        "--noise", str(args.noise), "--length", str(args.length),
        "--out", str(root / "fixture"),
    )
    mm("register", "--config", str(root / "fixture" / "area.json"), "--out", str(root / "registered"))
    detect_args = [
        "detect", "--registered", str(root / "registered"),
        "--frames", str(root / "fixture" / "frames"),
        "--out", str(root / "intersections.json"),
    ]
    if not args.visual:
        detect_args.append("--no-visual")
    mm(*detect_args)
    mm(
        "assemble", "--registered", str(root / "registered"),
        "--intersections", str(root / "intersections.json"), "--out", str(root / "map.json"),
    )
    mm(
        "turns", "--map", str(root / "map.json"), "--frames", str(root / "fixture" / "frames"),
        "--out", str(root / "turns"), "--frames-per-turn", str(args.frames_per_turn),
        "--method", args.method,
    )
    mm(
        "export", "--config", str(root / "fixture" / "area.json"),
        "--registered", str(root / "registered"), "--map", str(root / "map.json"),
        "--frames", str(root / "fixture" / "frames"), "--turns", str(root / "turns"),
        "--out", str(root / "pkg"),
    )
    truth = json.loads((root / "fixture" / "ground_truth.json").read_text())
    print(f"done: {truth['node_count']} intersections, package at {root / 'pkg'}")
    if args.serve:
        serve_args = ["serve", "--package", str(root / "pkg"), "--addr", args.addr]
        if args.ui_dir is not None:
            serve_args += ["--ui-dir", str(args.ui_dir)]
        mm(*serve_args)


if __name__ == "__main__":
    main()
