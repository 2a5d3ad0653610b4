"""The ``mm`` command line: fixture -> register -> detect -> assemble -> turns
-> export -> serve.

Each stage reads the previous stage's files, so stages can be rerun or
replaced independently. Frame assets are always laid out as one directory
per video ({frames_root}/{video_id}/{pose:06d}.png).
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import area as area_mod
from . import fixtures as fixtures_mod
from .assemble import AssembledMap, assemble_area
from .intersect import DetectionParams, IntersectionRecord, detect_all
from .register import read_registered, register_area, write_registered
from .scoring import DirectoryFrameSource
from .store import export_package
from .turning import TurnMethod, TurnProblem, precompute_turns

logger = logging.getLogger("moviemap")


def _setup_logging() -> None:
    level = os.environ.get("MM_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main() -> None:
    """Movie-map build pipeline and server."""
    _setup_logging()


@main.command()
@click.option("--layout", type=click.Choice(fixtures_mod.LAYOUTS), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--spacing", "spacing", type=float, default=0.5, show_default=True, help="Keyframe spacing, meters.")
@click.option("--noise", type=float, default=0.0, show_default=True, help="Bounded position noise, meters.")
@click.option("--length", type=float, default=120.0, show_default=True, help="Street length, meters.")
@click.option("--frame-width", type=int, default=256, show_default=True, help="Rendered frame width (2:1 aspect).")
@click.option("--no-frames", is_flag=True, help="Skip rendering frame assets.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def fixture(layout, seed, spacing, noise, length, frame_width, no_frames, out) -> None:
    """Generate a synthetic area with ground truth."""
    spec = fixtures_mod.FixtureSpec(
        layout=layout,
        keyframe_spacing_m=spacing,
        noise_m=noise,
        seed=seed,
        frame_size=(frame_width, frame_width // 2),
        street_length_m=length,
    )
    world = fixtures_mod.generate(spec, out, render_frames=not no_frames)
    click.echo(
        f"fixture {layout} seed {seed}: {len(world.videos)} videos, "
        f"{world.ground_truth['node_count']} true crossings -> {out}"
    )


@main.command()
@click.option("--config", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def register(config, out) -> None:
    """Map every video's relative trajectory onto the shared map."""
    cfg = area_mod.load_area_config(config)
    trajectories = area_mod.load_trajectories(cfg)
    for warning in area_mod.validate_area(trajectories):
        logger.warning("%s: %s", warning.code, warning.message)
    registered = register_area(trajectories)
    write_registered(registered, out)
    click.echo(f"registered {len(registered)} trajectories -> {out}")


def _frame_sources(frames_root: Path | None, video_ids) -> dict[str, DirectoryFrameSource] | None:
    if frames_root is None:
        return None
    return {vid: DirectoryFrameSource(frames_root / vid) for vid in video_ids}


@main.command()
@click.option("--registered", "registered_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--frames", "frames_root", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--no-visual", is_flag=True, help="Skip ORB refinement, keep positional pairs.")
@click.option("--threshold", type=float, default=5.0, show_default=True, help="Max crossing distance, meters.")
@click.option("--pad", type=float, default=3.0, show_default=True, help="Chunk rectangle padding, meters.")
@click.option("--window", type=int, default=30, show_default=True, help="Visual refinement pose window.")
def detect(registered_dir, frames_root, out, no_visual, threshold, pad, window) -> None:
    """Find the crossing frame pair for every video pair."""
    regs = read_registered(registered_dir)
    visual = not no_visual and frames_root is not None
    params = DetectionParams(
        pad_m=pad, intersect_threshold_m=threshold, refine=visual, refine_window=window
    )
    frames = _frame_sources(frames_root, [r.video_id for r in regs]) if visual else None
    result = detect_all(regs, frames, params)
    for warning in result.warnings:
        logger.warning("%s: %s", warning.code, warning.message)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps([r.to_json() for r in result.records], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    click.echo(
        f"detected {len(result.records)} crossings "
        f"({result.stats.distance_evals} distance evals) -> {out}"
    )


@main.command()
@click.option("--registered", "registered_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--intersections", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--cluster-radius", type=float, default=8.0, show_default=True)
def assemble(registered_dir, intersections, out, cluster_radius) -> None:
    """Cluster crossings, split videos into sections, build the graph."""
    regs = read_registered(registered_dir)
    records = [
        IntersectionRecord.from_json(obj)
        for obj in json.loads(Path(intersections).read_text(encoding="utf-8"))
    ]
    assembled = assemble_area(regs, records, cluster_radius_m=cluster_radius)
    out.parent.mkdir(parents=True, exist_ok=True)
    assembled.save(out)
    click.echo(
        f"assembled {len(assembled.nodes)} nodes, {len(assembled.sections)} sections -> {out}"
    )


@main.command()
@click.option("--map", "map_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--frames", "frames_root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--frames-per-turn", type=int, default=30, show_default=True)
@click.option("--method", type=click.Choice(["A", "B", "C"]), default="C", show_default=True)
@click.option("--include-uturn", is_flag=True)
def turns(map_path, frames_root, out, frames_per_turn, method, include_uturn) -> None:
    """Synthesize the turning view for every intersection transition."""
    from PIL import Image

    assembled = AssembledMap.load(map_path)
    frames = _frame_sources(frames_root, list(assembled.videos))
    turn_method = TurnMethod(method)
    problems: list[TurnProblem] = []
    out.mkdir(parents=True, exist_ok=True)
    index = {"method": turn_method.value, "n_frames": frames_per_turn if turn_method is not TurnMethod.CUT else 0, "assets": []}
    count = 0
    for asset in precompute_turns(
        assembled, frames, frames_per_turn, turn_method, include_uturn=include_uturn, problems=problems
    ):
        triple = asset.triple
        asset_dir = out / triple.node_id / f"{triple.from_section}__{triple.to_section}"
        asset_dir.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(asset.frames):
            Image.fromarray(frame.pixels).save(asset_dir / f"{k:04d}.png", compress_level=3)
        index["assets"].append(
            {
                "node_id": triple.node_id,
                "from_section": triple.from_section,
                "to_section": triple.to_section,
                "n_frames": len(asset.frames),
            }
        )
        count += 1
    for problem in problems:
        logger.warning(
            "turn (%s, %s, %s): %s",
            problem.node_id, problem.from_section, problem.to_section, problem.message,
        )
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"synthesized {count} turn sequences -> {out}")


@main.command()
@click.option("--config", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--registered", "registered_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--map", "map_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--frames", "frames_root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--turns", "turns_dir", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def export(config, registered_dir, map_path, frames_root, turns_dir, out) -> None:
    """Bundle everything into a self-contained, servable package."""
    cfg = area_mod.load_area_config(config)
    regs = read_registered(registered_dir)
    assembled = AssembledMap.load(map_path)
    if turns_dir is not None and (Path(turns_dir) / "index.json").exists():
        turn_index = json.loads((Path(turns_dir) / "index.json").read_text(encoding="utf-8"))
        method = TurnMethod(turn_index["method"])
        n_frames = int(turn_index["n_frames"])
    else:
        method = TurnMethod.CUT
        n_frames = 0
    pkg = export_package(
        out,
        area_name=cfg.area_name,
        geo_ref=cfg.geo_ref,
        assembled=assembled,
        registered=regs,
        frame_dirs={vid: Path(frames_root) / vid for vid in assembled.videos},
        turns_dir=Path(turns_dir) if turns_dir is not None else None,
        landmarks=cfg.landmarks,
        billboards=cfg.billboards,
        turn_method=method,
        turn_frames=n_frames,
    )
    click.echo(f"exported package {pkg.package_hash[:12]} -> {out}")


@main.command()
@click.option("--package", "pkg_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--addr", default="127.0.0.1:8080", show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True, path_type=Path), default=None)
def serve(pkg_dir, addr, ui_dir) -> None:
    """Serve a package (and optionally the exploration UI) over HTTP."""
    from .server import serve as run_server

    run_server(pkg_dir, addr, ui_dir)


if __name__ == "__main__":
    main()
