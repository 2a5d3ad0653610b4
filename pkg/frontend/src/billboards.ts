// Billboard visibility and display size.

import type { BillboardEntry } from "./types.js";

export const BILLBOARD_WINDOW_S = 5.0;

export function visibleBillboards(
  billboards: BillboardEntry[],
  videoId: string,
  tS: number,
  windowS: number = BILLBOARD_WINDOW_S,
): BillboardEntry[] {
  return billboards
    .filter(
      (b) => b.video_id === videoId && Math.abs(b.anchor_timestamp_s - tS) <= windowS,
    )
    .sort(
      (a, b) =>
        Math.abs(a.anchor_timestamp_s - tS) - Math.abs(b.anchor_timestamp_s - tS) ||
        (a.billboard_id < b.billboard_id ? -1 : 1),
    );
}

/**
 * Size multiplier approximating near/far: full size at the anchor, shrinking
 * linearly to half size at the window edge.
 */
export function billboardScale(
  billboard: BillboardEntry,
  tS: number,
  windowS: number = BILLBOARD_WINDOW_S,
): number {
  const off = Math.min(Math.abs(billboard.anchor_timestamp_s - tS), windowS);
  return 1 - 0.5 * (off / windowS);
}
