// DOM wiring: start screen, panorama canvas, map pane, arrows, billboards.

import { ApiClient } from "./api.js";
import { billboardScale, visibleBillboards } from "./billboards.js";
import { drawMap, fitTransform } from "./mapPane.js";
import { drawPanorama, overlayPlacement, screenAngle, screenXForAngle } from "./panorama.js";
import { frameIndexAt, positionAt, wrapAngle } from "./position.js";
import { Player } from "./player.js";
import { sectionById, startCandidates } from "./state.js";
import type { ExitEntry, LandmarkEntry } from "./types.js";

const DRAG_RAD_PER_PX = 0.006;

class ImageCache {
  private images = new Map<string, HTMLImageElement>();
  private lastComplete: HTMLImageElement | null = null;

  get(url: string): HTMLImageElement | null {
    let img = this.images.get(url);
    if (!img) {
      img = new Image();
      img.src = url;
      this.images.set(url, img);
    }
    if (img.complete && img.naturalWidth > 0) {
      this.lastComplete = img;
      return img;
    }
    return this.lastComplete; // hold the previous frame until this one decodes
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const player = new Player(api, (url) => {
    const img = new Image();
    img.src = url;
  });
  const cache = new ImageCache();

  const pano = el<HTMLCanvasElement>("pano");
  const map = el<HTMLCanvasElement>("map");
  const startScreen = el<HTMLDivElement>("start-screen");
  const arrowBar = el<HTMLDivElement>("arrows");
  const billboardLayer = el<HTMLDivElement>("billboards");
  const panel = el<HTMLDivElement>("panel");
  const status = el<HTMLDivElement>("status");
  const panoCtx = pano.getContext("2d")!;
  const mapCtx = map.getContext("2d")!;

  await player.loadManifest();
  const manifest = player.state.manifest!;
  const view = fitTransform(manifest, map.width, map.height);

  // --- start screen: landmarks, then a walking direction per landmark -----
  function showStartScreen(): void {
    startScreen.innerHTML = "<h1>Select a starting point</h1>";
    const landmarks: LandmarkEntry[] = manifest.landmarks.length
      ? manifest.landmarks
      : manifest.nodes.map((n) => ({ name: n.node_id, map_point: n.center }));
    for (const landmark of landmarks) {
      const block = document.createElement("div");
      block.className = "landmark";
      const title = document.createElement("strong");
      title.textContent = landmark.name;
      block.appendChild(title);
      for (const section of startCandidates(manifest, landmark.map_point)) {
        const btn = document.createElement("button");
        const deg = Math.round((section.start_bearing_rad * 180) / Math.PI);
        btn.textContent = `walk ${section.video_id} (${deg}°)`;
        btn.onclick = () => {
          startScreen.style.display = "none";
          player.selectStart(section.section_id);
        };
        block.appendChild(btn);
      }
      startScreen.appendChild(block);
    }
    startScreen.style.display = "block";
  }
  showStartScreen();

  // --- input ----------------------------------------------------------------
  let dragging = false;
  let lastX = 0;
  pano.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.clientX;
    pano.setPointerCapture(ev.pointerId);
  });
  pano.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    player.drag((ev.clientX - lastX) * DRAG_RAD_PER_PX);
    lastX = ev.clientX;
  });
  pano.addEventListener("pointerup", () => (dragging = false));
  for (const speed of [0.5, 1, 2]) {
    el<HTMLButtonElement>(`speed-${String(speed).replace(".", "_")}`).onclick = () =>
      player.setSpeed(speed);
  }
  el<HTMLButtonElement>("retry").onclick = () => player.retry();
  el<HTMLButtonElement>("panel-close").onclick = () =>
    player.dispatch({ type: "panel-closed" });

  // --- render loop ------------------------------------------------------------
  function renderArrows(): void {
    arrowBar.innerHTML = "";
    const state = player.state;
    if (state.phase !== "walking" || !state.current) return;
    const section = sectionById(manifest, state.current.sectionId);
    const heading = positionAt(section, state.current.tS).headingRad;
    for (const exit of state.pendingExits) {
      const btn = document.createElement("button");
      const diff = wrapAngle(exit.bearing_rad - section.end_bearing_rad);
      const glyph = Math.abs(diff) < 0.6 ? "↑" : diff > 0 ? "←" : "→";
      btn.textContent = `${glyph} ${exit.label}`;
      btn.className = "arrow";
      const relAz = wrapAngle(exit.bearing_rad - heading);
      const x = screenXForAngle(screenAngle(state.current.viewYawRad, relAz), pano.width);
      btn.style.left = `${x === null ? (diff > 0 ? 40 : pano.width - 40) : x}px`;
      btn.onclick = () => player.takeExit(exit as ExitEntry);
      arrowBar.appendChild(btn);
    }
  }

  function renderBillboards(): void {
    billboardLayer.innerHTML = "";
    const state = player.state;
    if (state.phase !== "walking" || !state.current) return;
    const section = sectionById(manifest, state.current.sectionId);
    const visible = visibleBillboards(state.billboards, section.video_id, state.current.tS);
    for (const billboard of visible) {
      const spot = overlayPlacement(
        state.current.viewYawRad,
        billboard.yaw_rad,
        billboard.pitch_rad,
        pano.width,
        pano.height,
      );
      if (!spot) continue;
      const div = document.createElement("div");
      div.className = "billboard";
      div.textContent = billboard.title;
      const scale = billboardScale(billboard, state.current.tS);
      div.style.transform = `translate(-50%, -50%) scale(${scale.toFixed(3)})`;
      div.style.left = `${spot.x}px`;
      div.style.top = `${spot.y}px`;
      div.onclick = () =>
        player.dispatch({ type: "billboard-clicked", billboardId: billboard.billboard_id });
      billboardLayer.appendChild(div);
    }
  }

  function renderPanel(): void {
    const open = player.state.openBillboard;
    if (!open) {
      panel.style.display = "none";
      return;
    }
    const billboard = player.state.billboards.find((b) => b.billboard_id === open);
    if (!billboard) return;
    el<HTMLDivElement>("panel-title").textContent = billboard.title;
    el<HTMLDivElement>("panel-info").textContent = billboard.info;
    panel.style.display = "block";
  }

  let lastTime = performance.now();
  function frame(now: number): void {
    player.advance(now - lastTime);
    lastTime = now;
    const state = player.state;
    let pose = null;
    if (state.phase === "walking" && state.current) {
      const section = sectionById(manifest, state.current.sectionId);
      const k = frameIndexAt(section, state.current.tS);
      const img = cache.get(api.sectionFrameUrl(section.section_id, k));
      if (img) drawPanorama(panoCtx, img, state.current.viewYawRad);
      pose = positionAt(section, state.current.tS);
    } else if (state.phase === "turning" && state.turn) {
      const t = state.turn;
      const img = cache.get(api.turnFrameUrl(t.nodeId, t.fromSection, t.toSection, t.frame));
      if (img) drawPanorama(panoCtx, img, 0);
      const fromSection = sectionById(manifest, t.fromSection);
      pose = positionAt(fromSection, fromSection.end_timestamp_s);
    }
    drawMap(mapCtx, manifest, view, pose);
    renderArrows();
    renderBillboards();
    renderPanel();
    status.textContent = state.paused
      ? `paused: ${state.lastError ?? "fetch failed"}`
      : `${state.phase} ×${state.speed}`;
    el<HTMLButtonElement>("retry").style.display = state.paused ? "inline" : "none";
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

void boot();
