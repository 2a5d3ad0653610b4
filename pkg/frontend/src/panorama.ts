// Equirectangular panorama display on a 2D canvas.
//
// The source image convention matches the package: center column = camera
// forward, azimuth decreasing toward higher columns. Rendering projects a
// horizontal field of view around the view yaw using vertical strips (a
// cylindrical approximation good enough for street panoramas); billboards
// and arrows reuse the same projection to land on the right pixel.

export const H_FOV_RAD = 1.75; // ~100 degrees

const STRIP_PX = 4;

/** Source column (fractional) showing the given azimuth relative to camera forward. */
export function columnForRelativeAzimuth(width: number, relAzimuth: number): number {
  const col = width / 2 - (relAzimuth * width) / (2 * Math.PI);
  return ((col % width) + width) % width;
}

/** Screen angle (rad from view center, positive = right) of a relative azimuth. */
export function screenAngle(viewYawRad: number, relAzimuth: number): number {
  let a = viewYawRad - relAzimuth;
  while (a <= -Math.PI) a += 2 * Math.PI;
  while (a > Math.PI) a -= 2 * Math.PI;
  return a;
}

/** Horizontal screen x for a screen angle, or null when behind the viewer. */
export function screenXForAngle(
  angle: number,
  canvasWidth: number,
  hFov: number = H_FOV_RAD,
): number | null {
  if (Math.abs(angle) >= Math.PI / 2) return null;
  return canvasWidth * (0.5 + Math.tan(angle) / (2 * Math.tan(hFov / 2)));
}

export function drawPanorama(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource & { width: number; height: number },
  viewYawRad: number,
): void {
  const cw = ctx.canvas.width;
  const ch = ctx.canvas.height;
  const iw = image.width;
  const ih = image.height;
  const halfTan = Math.tan(H_FOV_RAD / 2);
  for (let sx = 0; sx < cw; sx += STRIP_PX) {
    const phi = Math.atan(((sx + STRIP_PX / 2) / cw - 0.5) * 2 * halfTan);
    const srcCol = columnForRelativeAzimuth(iw, viewYawRad - phi);
    // source columns consumed by this strip: d(col)/d(sx) * STRIP_PX
    const cosPhi = Math.cos(phi);
    const srcW = Math.max(1, (STRIP_PX * iw * halfTan * cosPhi * cosPhi) / (Math.PI * cw));
    const clamped = Math.min(srcCol, iw - 1);
    ctx.drawImage(image, clamped, 0, Math.min(srcW, iw - clamped), ih, sx, 0, STRIP_PX, ch);
  }
}

export interface OverlayPlacement {
  x: number;
  y: number;
}

/** Place an overlay anchored at (yaw, pitch) in the frame, or null if hidden. */
export function overlayPlacement(
  viewYawRad: number,
  yawRad: number,
  pitchRad: number,
  canvasWidth: number,
  canvasHeight: number,
): OverlayPlacement | null {
  const angle = screenAngle(viewYawRad, yawRad);
  const x = screenXForAngle(angle, canvasWidth);
  if (x === null || x < -canvasWidth * 0.2 || x > canvasWidth * 1.2) return null;
  const vFov = (H_FOV_RAD * canvasHeight) / canvasWidth;
  const y = canvasHeight * (0.5 - pitchRad / vFov);
  return { x, y };
}
