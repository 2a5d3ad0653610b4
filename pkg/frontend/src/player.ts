// Playback engine: advances time, fetches exits and billboards at the right
// moments, and times turn animations. Pure of DOM concerns; main.ts renders
// from the state this engine maintains. Tests drive it with advance().

import { ApiClient } from "./api.js";
import {
  Action,
  ExplorerState,
  approachingEnd,
  initialState,
  reduce,
  sectionById,
} from "./state.js";
import type { ExitEntry } from "./types.js";
import { TURN_FPS } from "./types.js";

const BILLBOARD_POLL_S = 1.0;
const PREFETCH_SECTIONS = 2;
const PREFETCH_FRAMES = 30;

export type Listener = (state: ExplorerState, action: Action) => void;

export class Player {
  state: ExplorerState = initialState;
  private turnAccumMs = 0;
  private billboardAccumS = BILLBOARD_POLL_S; // poll immediately on entry
  private exitsRequestedFor: string | null = null;
  private prefetched = new Set<string>();
  private listeners: Listener[] = [];

  constructor(
    private api: ApiClient,
    private prefetchUrl: (url: string) => void = () => {},
  ) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    for (const listener of this.listeners) listener(this.state, action);
  }

  async loadManifest(): Promise<void> {
    try {
      const manifest = await this.api.manifest();
      this.dispatch({ type: "manifest-loaded", manifest });
    } catch (err) {
      this.dispatch({ type: "fetch-failed", message: String(err) });
      throw err;
    }
  }

  selectStart(sectionId: string): void {
    this.dispatch({ type: "start-selected", sectionId });
    this.onSectionEntered();
  }

  /** Advance wall-clock time; the single driver for playback and turns. */
  advance(dtMs: number): void {
    if (this.state.paused) return;
    if (this.state.phase === "turning") {
      this.turnAccumMs += dtMs;
      const frameMs = 1000 / TURN_FPS;
      while (this.turnAccumMs >= frameMs) {
        const before: ExplorerState = this.state;
        if (before.phase !== "turning") break;
        this.turnAccumMs -= frameMs;
        this.dispatch({ type: "turn-frame" });
      }
      const after: ExplorerState = this.state;
      if (after.phase === "walking") this.onSectionEntered();
      return;
    }
    if (this.state.phase !== "walking") return;
    this.dispatch({ type: "tick", dtS: dtMs / 1000 });
    this.maybeFetchExits();
    this.billboardAccumS += (dtMs / 1000) * 1; // polls run on wall time
    if (this.billboardAccumS >= BILLBOARD_POLL_S) {
      this.billboardAccumS = 0;
      void this.pollBillboards();
    }
  }

  takeExit(exit: ExitEntry): void {
    const { manifest, current } = this.state;
    if (!manifest || !current) return;
    const section = sectionById(manifest, current.sectionId);
    const nodeId = section.end_node;
    const asset = manifest.turns.assets.find(
      (a) =>
        a.node_id === nodeId &&
        a.from_section === current.sectionId &&
        a.to_section === exit.section_id,
    );
    let framesTotal = 0;
    if (manifest.turns.method !== "A") {
      if (asset) {
        framesTotal = asset.frames.length;
      } else {
        // eslint-disable-next-line no-console
        console.warn(
          `no turn asset for (${nodeId}, ${current.sectionId}, ${exit.section_id}); hard cut`,
        );
      }
    }
    this.turnAccumMs = 0;
    this.dispatch({ type: "take-exit", exit, nodeId, framesTotal });
    const after: ExplorerState = this.state;
    if (after.phase === "walking") this.onSectionEntered(); // hard-cut path
  }

  drag(dYawRad: number): void {
    this.dispatch({ type: "drag", dYawRad });
  }

  setSpeed(speed: number): void {
    this.dispatch({ type: "set-speed", speed });
  }

  retry(): void {
    this.dispatch({ type: "retry" });
  }

  private onSectionEntered(): void {
    this.exitsRequestedFor = null;
    this.billboardAccumS = BILLBOARD_POLL_S;
    this.prefetchFrames();
  }

  private maybeFetchExits(): void {
    const { manifest, current } = this.state;
    if (!manifest || !current || !approachingEnd(this.state)) return;
    if (this.exitsRequestedFor === current.sectionId) return;
    this.exitsRequestedFor = current.sectionId;
    const section = sectionById(manifest, current.sectionId);
    const sectionId = current.sectionId;
    this.api
      .exits(section.end_node, sectionId)
      .then((exits) => {
        this.dispatch({ type: "exits-loaded", sectionId, exits });
        for (const exit of exits.slice(0, PREFETCH_SECTIONS)) {
          this.prefetchSection(exit.section_id);
        }
      })
      .catch((err) => this.dispatch({ type: "fetch-failed", message: String(err) }));
  }

  private async pollBillboards(): Promise<void> {
    const { manifest, current } = this.state;
    if (!manifest || !current || this.state.phase !== "walking") return;
    const section = sectionById(manifest, current.sectionId);
    try {
      const billboards = await this.api.billboards(section.video_id, current.tS);
      this.dispatch({ type: "billboards-loaded", billboards });
    } catch (err) {
      this.dispatch({ type: "fetch-failed", message: String(err) });
    }
  }

  private prefetchFrames(): void {
    const { manifest, current } = this.state;
    if (!manifest || !current) return;
    this.prefetchSection(current.sectionId);
  }

  private prefetchSection(sectionId: string): void {
    if (this.prefetched.has(sectionId) || !this.state.manifest) return;
    this.prefetched.add(sectionId);
    const section = sectionById(this.state.manifest, sectionId);
    const count = Math.min(PREFETCH_FRAMES, section.frames.length);
    for (let k = 0; k < count; k++) {
      this.prefetchUrl(this.api.sectionFrameUrl(sectionId, k));
    }
  }
}
