// Area map rendering: street polylines, nodes, landmarks, current position.

import type { Manifest } from "./types.js";
import type { MapPose } from "./position.js";

export interface ViewTransform {
  toScreen(x: number, y: number): [number, number];
  scale: number;
}

export function fitTransform(
  manifest: Manifest,
  width: number,
  height: number,
  padPx = 24,
): ViewTransform {
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const section of manifest.sections) {
    for (const [, x, y] of section.samples) {
      minX = Math.min(minX, x);
      minY = Math.min(minY, y);
      maxX = Math.max(maxX, x);
      maxY = Math.max(maxY, y);
    }
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const scale = Math.min((width - 2 * padPx) / spanX, (height - 2 * padPx) / spanY);
  const offX = (width - scale * spanX) / 2;
  const offY = (height - scale * spanY) / 2;
  return {
    scale,
    // map y points north; screen y points down
    toScreen: (x, y) => [offX + (x - minX) * scale, height - offY - (y - minY) * scale],
  };
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  manifest: Manifest,
  view: ViewTransform,
  pose: MapPose | null,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10131a";
  ctx.fillRect(0, 0, width, height);

  ctx.strokeStyle = "#3d4a63";
  ctx.lineWidth = 3;
  for (const section of manifest.sections) {
    ctx.beginPath();
    const step = Math.max(1, Math.floor(section.samples.length / 64));
    section.samples.forEach(([, x, y], i) => {
      if (i % step !== 0 && i !== section.samples.length - 1) return;
      const [sx, sy] = view.toScreen(x, y);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.stroke();
  }

  ctx.fillStyle = "#8ea1c4";
  for (const node of manifest.nodes) {
    const [sx, sy] = view.toScreen(node.center[0], node.center[1]);
    ctx.beginPath();
    ctx.arc(sx, sy, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.font = "11px sans-serif";
  for (const landmark of manifest.landmarks) {
    const [sx, sy] = view.toScreen(landmark.map_point[0], landmark.map_point[1]);
    ctx.fillStyle = "#e8b33c";
    ctx.beginPath();
    ctx.arc(sx, sy, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillText(landmark.name, sx + 8, sy + 4);
  }

  if (pose) {
    const [sx, sy] = view.toScreen(pose.x, pose.y);
    ctx.fillStyle = "#4cd964";
    ctx.beginPath();
    ctx.arc(sx, sy, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#4cd964";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    // heading arrow: map bearing CCW from east, screen y flipped
    ctx.lineTo(sx + 14 * Math.cos(pose.headingRad), sy - 14 * Math.sin(pose.headingRad));
    ctx.stroke();
  }
}
