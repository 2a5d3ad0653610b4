// Explorer state machine. All transitions run through one reducer so the
// phase rules hold everywhere: selecting_start -> walking, walking <-> turning.
// The client never invents topology: sections are entered only through the
// start screen or an exit returned by the server.

import type { BillboardEntry, ExitEntry, Manifest, SectionEntry } from "./types.js";
import { wrapAngle } from "./position.js";

export type Phase = "selecting_start" | "walking" | "turning";

export const SPEEDS = [0.5, 1, 2] as const;
export type Speed = (typeof SPEEDS)[number];

export const APPROACH_WINDOW_S = 2.0;

export interface PlaybackPointer {
  sectionId: string;
  tS: number; // video timestamp within the section span
  viewYawRad: number; // view direction relative to camera forward
}

export interface TurnProgress {
  nodeId: string;
  fromSection: string;
  toSection: string;
  framesTotal: number;
  frame: number;
}

export interface ExplorerState {
  phase: Phase;
  manifest: Manifest | null;
  current: PlaybackPointer | null;
  speed: Speed;
  pendingExits: ExitEntry[];
  turn: TurnProgress | null;
  billboards: BillboardEntry[];
  openBillboard: string | null;
  paused: boolean;
  lastError: string | null;
}

export const initialState: ExplorerState = {
  phase: "selecting_start",
  manifest: null,
  current: null,
  speed: 1,
  pendingExits: [],
  turn: null,
  billboards: [],
  openBillboard: null,
  paused: false,
  lastError: null,
};

export type Action =
  | { type: "manifest-loaded"; manifest: Manifest }
  | { type: "start-selected"; sectionId: string }
  | { type: "tick"; dtS: number }
  | { type: "exits-loaded"; sectionId: string; exits: ExitEntry[] }
  | { type: "take-exit"; exit: ExitEntry; nodeId: string; framesTotal: number }
  | { type: "turn-frame" }
  | { type: "set-speed"; speed: number }
  | { type: "drag"; dYawRad: number }
  | { type: "billboards-loaded"; billboards: BillboardEntry[] }
  | { type: "billboard-clicked"; billboardId: string }
  | { type: "panel-closed" }
  | { type: "fetch-failed"; message: string }
  | { type: "retry" };

export function sectionById(manifest: Manifest, sectionId: string): SectionEntry {
  const section = manifest.sections.find((s) => s.section_id === sectionId);
  if (!section) throw new Error(`unknown section ${sectionId}`);
  return section;
}

/** Whether the pointer is within the approach window of its section's end node. */
export function approachingEnd(state: ExplorerState): boolean {
  if (state.phase !== "walking" || !state.manifest || !state.current) return false;
  const section = sectionById(state.manifest, state.current.sectionId);
  if (section.end_node === "PATH_END") return false;
  return state.current.tS >= section.end_timestamp_s - APPROACH_WINDOW_S;
}

function enterSection(manifest: Manifest, sectionId: string): PlaybackPointer {
  const section = sectionById(manifest, sectionId);
  return { sectionId, tS: section.start_timestamp_s, viewYawRad: 0 };
}

export function reduce(state: ExplorerState, action: Action): ExplorerState {
  switch (action.type) {
    case "manifest-loaded":
      return { ...initialState, manifest: action.manifest };

    case "start-selected": {
      if (state.phase !== "selecting_start" || !state.manifest) return state;
      return {
        ...state,
        phase: "walking",
        current: enterSection(state.manifest, action.sectionId),
        pendingExits: [],
        billboards: [],
      };
    }

    case "tick": {
      if (state.phase !== "walking" || state.paused || !state.manifest || !state.current) {
        return state;
      }
      const section = sectionById(state.manifest, state.current.sectionId);
      const tS = Math.min(
        state.current.tS + action.dtS * state.speed,
        section.end_timestamp_s,
      );
      const next = { ...state, current: { ...state.current, tS } };
      // pending exits may exist only while approaching the section's end
      if (!approachingEnd(next)) next.pendingExits = [];
      return next;
    }

    case "exits-loaded": {
      if (
        state.phase !== "walking" ||
        !state.current ||
        state.current.sectionId !== action.sectionId ||
        !approachingEnd(state)
      ) {
        return state;
      }
      return { ...state, pendingExits: action.exits };
    }

    case "take-exit": {
      if (state.phase !== "walking" || !state.manifest || !state.current) return state;
      if (!state.pendingExits.some((e) => e.section_id === action.exit.section_id)) {
        return state; // only exits the server offered
      }
      if (action.framesTotal <= 0) {
        // no turn asset: hard cut straight into the next section
        return {
          ...state,
          phase: "walking",
          current: enterSection(state.manifest, action.exit.section_id),
          pendingExits: [],
          billboards: [],
        };
      }
      return {
        ...state,
        phase: "turning",
        pendingExits: [],
        billboards: [],
        turn: {
          nodeId: action.nodeId,
          fromSection: state.current.sectionId,
          toSection: action.exit.section_id,
          framesTotal: action.framesTotal,
          frame: 0,
        },
      };
    }

    case "turn-frame": {
      if (state.phase !== "turning" || !state.turn || !state.manifest) return state;
      const frame = state.turn.frame + 1;
      if (frame < state.turn.framesTotal) {
        return { ...state, turn: { ...state.turn, frame } };
      }
      return {
        ...state,
        phase: "walking",
        current: enterSection(state.manifest, state.turn.toSection),
        turn: null,
      };
    }

    case "set-speed": {
      const speed = SPEEDS.find((s) => s === action.speed);
      return speed === undefined ? state : { ...state, speed };
    }

    case "drag": {
      if (!state.current) return state;
      return {
        ...state,
        current: {
          ...state.current,
          viewYawRad: wrapAngle(state.current.viewYawRad + action.dYawRad),
        },
      };
    }

    case "billboards-loaded":
      return state.phase === "walking" ? { ...state, billboards: action.billboards } : state;

    case "billboard-clicked": {
      if (!state.billboards.some((b) => b.billboard_id === action.billboardId)) return state;
      return { ...state, openBillboard: action.billboardId };
    }

    case "panel-closed":
      return { ...state, openBillboard: null };

    case "fetch-failed":
      return { ...state, paused: true, lastError: action.message };

    case "retry":
      return { ...state, paused: false, lastError: null };
  }
}

/** Sections whose first pose is nearest to a landmark, one per direction. */
export function startCandidates(
  manifest: Manifest,
  point: [number, number],
  limit = 4,
): SectionEntry[] {
  const scored = manifest.sections
    .map((section) => {
      const [, x, y] = section.samples[0];
      return { section, d: Math.hypot(x - point[0], y - point[1]) };
    })
    .sort((a, b) => a.d - b.d || (a.section.section_id < b.section.section_id ? -1 : 1));
  const out: SectionEntry[] = [];
  const seenBearings: number[] = [];
  for (const { section } of scored) {
    const bearing = section.start_bearing_rad;
    if (seenBearings.some((b) => Math.abs(wrapAngle(b - bearing)) < 0.2)) continue;
    out.push(section);
    seenBearings.push(bearing);
    if (out.length >= limit) break;
  }
  return out;
}
