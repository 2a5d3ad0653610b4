// Wire types mirroring the server's manifest and API JSON (snake_case kept).

export interface GeoRef {
  mode: "local_xy" | "latlng_wgs84";
  origin_lat_deg?: number;
  origin_lng_deg?: number;
}

export interface VideoMeta {
  street_id: string;
  direction: "forward" | "backward";
  frame_rate_hz: number;
  n_poses: number;
  duration_s: number;
}

export interface NodeEntry {
  node_id: string;
  center: [number, number];
  incident_streets: string[];
  members: unknown[];
}

/** One per-pose sample: [t_s, map_x, map_y, yaw_rad]. */
export type Sample = [number, number, number, number];

export interface SectionEntry {
  section_id: string;
  video_id: string;
  start_pose: number;
  end_pose: number;
  start_node: string;
  end_node: string;
  start_timestamp_s: number;
  end_timestamp_s: number;
  start_bearing_rad: number;
  end_bearing_rad: number;
  frames: string[];
  samples: Sample[];
}

export interface ExitEntry {
  section_id: string;
  bearing_rad: number;
  label: string;
}

export interface LandmarkEntry {
  name: string;
  map_point: [number, number];
}

export interface BillboardEntry {
  billboard_id: string;
  video_id: string;
  anchor_timestamp_s: number;
  yaw_rad: number;
  pitch_rad: number;
  title: string;
  info: string;
}

export interface TurnAssetEntry {
  node_id: string;
  from_section: string;
  to_section: string;
  frames: string[];
}

export interface Manifest {
  manifest_version: number;
  area_name: string;
  geo_ref: GeoRef;
  videos: Record<string, VideoMeta>;
  nodes: NodeEntry[];
  sections: SectionEntry[];
  exits: { node_id: string; section_id: string; bearing_rad: number; label: string }[];
  landmarks: LandmarkEntry[];
  billboards: BillboardEntry[];
  turns: { method: "A" | "B" | "C"; n_frames: number; assets: TurnAssetEntry[] };
}

export const TURN_FPS = 30;
