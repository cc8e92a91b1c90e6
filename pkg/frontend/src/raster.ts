// Stroke rasterization: brush path to flat voxel indices, deterministically.

export interface SliceView {
  dims: number[]; // volume extents, x fastest
  axis: number;   // slicing axis for 3D volumes (ignored for 2D)
  index: number;  // slice position along that axis
}

export interface StrokePoint {
  u: number; // column in slice pixels
  v: number; // row in slice pixels
}

/** In-plane axes of the slice, in (u, v) order. */
export function planeAxes(view: SliceView): [number, number] {
  if (view.dims.length === 2) return [0, 1];
  const axes = [0, 1, 2].filter((a) => a !== view.axis);
  return [axes[0], axes[1]];
}

export function planeExtents(view: SliceView): [number, number] {
  const [a, b] = planeAxes(view);
  return [view.dims[a], view.dims[b]];
}

function flatIndex(coords: number[], dims: number[]): number {
  let stride = 1;
  let out = 0;
  for (let axis = 0; axis < dims.length; axis++) {
    out += coords[axis] * stride;
    stride *= dims[axis];
  }
  return out;
}

/** Voxels of a brush disc stamped at every interpolated path position. */
export function rasterizeStroke(
  path: StrokePoint[],
  radius: number,
  view: SliceView,
): number[] {
  const [ua, va] = planeAxes(view);
  const [nu, nv] = planeExtents(view);
  const hit = new Set<number>();
  const stamp = (cu: number, cv: number) => {
    const r = Math.max(0, Math.floor(radius));
    for (let dv = -r; dv <= r; dv++) {
      for (let du = -r; du <= r; du++) {
        if (du * du + dv * dv > radius * radius) continue;
        const u = Math.round(cu) + du;
        const v = Math.round(cv) + dv;
        if (u < 0 || u >= nu || v < 0 || v >= nv) continue;
        const coords = new Array(view.dims.length).fill(view.index);
        coords[ua] = u;
        coords[va] = v;
        hit.add(flatIndex(coords, view.dims));
      }
    }
  };
  for (let i = 0; i < path.length; i++) {
    const p = path[i];
    if (i === 0) {
      stamp(p.u, p.v);
      continue;
    }
    const prev = path[i - 1];
    const steps = Math.max(
      1,
      Math.ceil(Math.max(Math.abs(p.u - prev.u), Math.abs(p.v - prev.v))),
    );
    for (let s = 1; s <= steps; s++) {
      stamp(
        prev.u + ((p.u - prev.u) * s) / steps,
        prev.v + ((p.v - prev.v) * s) / steps,
      );
    }
  }
  return Array.from(hit).sort((a, b) => a - b);
}
