// Orthographic 3D -> 2D projection for the impact-space scatter.

export interface CameraState {
  /** rotation about the vertical axis, radians */
  yaw: number;
  /** rotation toward the viewer, radians */
  pitch: number;
}

export const DEFAULT_CAMERA: CameraState = { yaw: Math.PI / 5, pitch: Math.PI / 8 };

/** Project a unit-cube point ([0,1]^3) to 2D, y growing downward (SVG). */
export function project(
  x: number,
  y: number,
  z: number,
  camera: CameraState = DEFAULT_CAMERA,
): [number, number] {
  // center the cube, rotate yaw about Z then pitch about X, drop depth
  const cx = x - 0.5;
  const cy = y - 0.5;
  const cz = z - 0.5;
  const cosYaw = Math.cos(camera.yaw);
  const sinYaw = Math.sin(camera.yaw);
  const rx = cx * cosYaw - cy * sinYaw;
  const ry = cx * sinYaw + cy * cosYaw;
  const cosPitch = Math.cos(camera.pitch);
  const sinPitch = Math.sin(camera.pitch);
  const sy = ry * cosPitch - cz * sinPitch;
  return [rx, -sy];
}

/** Normalize a value into [0, 1] against an axis range. */
export function unit(value: number, range: [number, number]): number {
  const [lo, hi] = range;
  return hi === lo ? 0.5 : (value - lo) / (hi - lo);
}
