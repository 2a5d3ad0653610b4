// Map-position interpolation along a section, mirroring the server's rule:
// linear between the bracketing pose samples, shortest arc for the heading.

import type { SectionEntry } from "./types.js";

export const TAU = 2 * Math.PI;

/** Wrap an angle to the canonical half-open interval [-pi, pi). */
export function wrapAngle(a: number): number {
  const w = ((a + Math.PI) % TAU + TAU) % TAU - Math.PI;
  return w;
}

export function angularDistance(a: number, b: number): number {
  return Math.abs(wrapAngle(a - b));
}

export interface MapPose {
  x: number;
  y: number;
  headingRad: number;
}

export function positionAt(section: SectionEntry, tS: number): MapPose {
  const samples = section.samples;
  const t0 = samples[0][0];
  const t1 = samples[samples.length - 1][0];
  if (tS < t0 || tS > t1) {
    throw new RangeError(`t=${tS} outside section span [${t0}, ${t1}]`);
  }
  // binary search for the last sample with time <= tS
  let lo = 0;
  let hi = samples.length - 1;
  while (lo < hi) {
    const mid = (lo + hi + 1) >> 1;
    if (samples[mid][0] <= tS) lo = mid;
    else hi = mid - 1;
  }
  if (lo >= samples.length - 1) {
    const [, x, y, yaw] = samples[samples.length - 1];
    return { x, y, headingRad: yaw };
  }
  const a = samples[lo];
  const b = samples[lo + 1];
  const span = b[0] - a[0];
  const frac = span === 0 ? 0 : (tS - a[0]) / span;
  // wrap only when the shortest-arc step leaves the range: at a sample
  // timestamp the heading must come back bit-exact
  let heading = a[3] + frac * wrapAngle(b[3] - a[3]);
  if (heading < -Math.PI || heading >= Math.PI) heading = wrapAngle(heading);
  return {
    x: a[1] + frac * (b[1] - a[1]),
    y: a[2] + frac * (b[2] - a[2]),
    headingRad: heading,
  };
}

/** Index into section.frames of the pose playing at time tS. */
export function frameIndexAt(section: SectionEntry, tS: number): number {
  let lo = 0;
  let hi = section.samples.length - 1;
  while (lo < hi) {
    const mid = (lo + hi + 1) >> 1;
    if (section.samples[mid][0] <= tS) lo = mid;
    else hi = mid - 1;
  }
  return lo;
}

/** Largest gap between consecutive pose positions, the marker tolerance. */
export function maxPoseSpacing(section: SectionEntry): number {
  let worst = 0;
  for (let i = 1; i < section.samples.length; i++) {
    const dx = section.samples[i][1] - section.samples[i - 1][1];
    const dy = section.samples[i][2] - section.samples[i - 1][2];
    worst = Math.max(worst, Math.hypot(dx, dy));
  }
  return worst;
}
