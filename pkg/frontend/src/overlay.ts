// Overlay compositing on raw RGBA buffers (canvas-free, unit testable).

export type OverlayMode = "labels" | "uncertainty" | "off";

export const PALETTE: [number, number, number][] = [
  [230, 80, 60],
  [70, 130, 230],
  [90, 200, 90],
  [240, 200, 60],
  [180, 90, 220],
  [80, 210, 210],
  [245, 130, 40],
  [150, 150, 150],
];

/**
 * Compose one slice into an RGBA buffer.
 *
 * base: grayscale u8 per pixel (nu*nv, row-major v then u);
 * labels/maxProb: same layout or null; mode off returns the raw slice.
 */
export function renderOverlay(
  base: Uint8Array,
  labels: Int32Array | null,
  maxProb: Uint8Array | null,
  mode: OverlayMode,
): Uint8ClampedArray {
  const n = base.length;
  const out = new Uint8ClampedArray(n * 4);
  for (let i = 0; i < n; i++) {
    const g = base[i];
    let r = g,
      gg = g,
      b = g;
    if (mode === "labels" && labels) {
      const [pr, pg, pb] = PALETTE[labels[i] % PALETTE.length];
      r = (g + pr) / 2; // 50% alpha tint over grayscale
      gg = (g + pg) / 2;
      b = (g + pb) / 2;
    } else if (mode === "uncertainty" && maxProb) {
      const heat = 255 - maxProb[i]; // 0 where certain
      r = g + ((255 - g) * heat) / 255;
      gg = g - (g * heat) / 510;
      b = g - (g * heat) / 255;
    }
    const o = i * 4;
    out[o] = r;
    out[o + 1] = gg;
    out[o + 2] = b;
    out[o + 3] = 255;
  }
  return out;
}

/** Extract the (axis, index) plane of a flat x-fastest volume. */
export function extractSlice<T extends { [i: number]: number; length: number }>(
  volume: T,
  dims: number[],
  axis: number,
  index: number,
  make: (n: number) => T,
): T {
  if (dims.length === 2) {
    const out = make(volume.length);
    for (let i = 0; i < volume.length; i++) out[i] = volume[i];
    return out;
  }
  const axes = [0, 1, 2].filter((a) => a !== axis);
  const [ua, va] = axes;
  const strides = [1, dims[0], dims[0] * dims[1]];
  const nu = dims[ua],
    nv = dims[va];
  const out = make(nu * nv);
  for (let v = 0; v < nv; v++) {
    for (let u = 0; u < nu; u++) {
      const flat =
        u * strides[ua] + v * strides[va] + index * strides[axis];
      out[v * nu + u] = volume[flat];
    }
  }
  return out;
}
