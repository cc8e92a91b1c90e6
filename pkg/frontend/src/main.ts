// Browser entry point: canvas painting over the served slice.

import { Api } from "./api.js";
import { extractSlice, renderOverlay, OverlayMode, PALETTE } from "./overlay.js";
import { planeExtents, StrokePoint } from "./raster.js";
import { b64ToBytes, rleDecode } from "./rle.js";
import { SeedStudio } from "./state.js";

const ZOOM = 8;

const api = new Api("");
const studio = new SeedStudio(api);

const page = document.createElement("div");
page.innerHTML = `
  <style>
    body { font-family: system-ui, sans-serif; margin: 1rem; background: #16181d; color: #dfe3ea; }
    #bar { display: flex; gap: .8rem; align-items: center; flex-wrap: wrap; margin-bottom: .6rem; }
    #bar label { font-size: .85rem; }
    canvas { border: 1px solid #444; image-rendering: pixelated; cursor: crosshair; }
    #report { font-size: .85rem; color: #9fb3c8; margin-top: .5rem; white-space: pre; }
    button, select, input { background: #262a33; color: inherit; border: 1px solid #555; border-radius: 4px; padding: .2rem .5rem; }
    #swatch { display: inline-block; width: 1em; height: 1em; vertical-align: -0.15em; border-radius: 2px; }
  </style>
  <h2>Seed Studio</h2>
  <div id="bar">
    <label>image <input id="image-path" size="28" value="phantom.json"></label>
    <label>packs <input id="pack-paths" size="36" value="phantom_beta25.rwpk,phantom_beta50.rwpk"></label>
    <button id="open">Open</button>
    <label>label <select id="label"></select> <span id="swatch"></span></label>
    <label>brush <input id="brush" type="range" min="0" max="5" step="0.5" value="1.5"></label>
    <label>overlay <select id="mode">
      <option value="labels">labels</option>
      <option value="uncertainty">uncertainty</option>
      <option value="off">off</option>
    </select></label>
    <label>gamma <input id="gamma" type="number" step="0.001" min="0" value="0" style="width:5em"></label>
    <label>beta <input id="beta" type="number" step="5" min="0" value="50" style="width:5em"></label>
    <label>epsilon <input id="epsilon" type="number" step="0.01" min="0.01" value="0.1" style="width:5em"></label>
    <button id="apply">Apply params</button>
    <button id="undo">Undo stroke</button>
  </div>
  <canvas id="view" width="64" height="64"></canvas>
  <div id="report">no session</div>
`;
document.body.appendChild(page);

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const reportBox = document.getElementById("report")!;
const labelSelect = document.getElementById("label") as HTMLSelectElement;
const swatch = document.getElementById("swatch")!;

for (let i = 0; i < PALETTE.length; i++) {
  const opt = document.createElement("option");
  opt.value = String(i);
  opt.text = `label ${i}`;
  labelSelect.add(opt);
}

let baseSlice: Uint8Array | null = null;

async function fetchBaseSlice(): Promise<void> {
  if (!studio.session) return;
  const img = new Image();
  img.src = api.sliceUrl(studio.session.id);
  await img.decode();
  const [nu, nv] = planeExtents(studio.view);
  const scratch = document.createElement("canvas");
  scratch.width = nu;
  scratch.height = nv;
  const sctx = scratch.getContext("2d")!;
  sctx.drawImage(img, 0, 0);
  const rgba = sctx.getImageData(0, 0, nu, nv).data;
  baseSlice = new Uint8Array(nu * nv);
  for (let i = 0; i < nu * nv; i++) baseSlice[i] = rgba[i * 4];
  canvas.width = nu * ZOOM;
  canvas.height = nv * ZOOM;
}

function redraw(): void {
  if (!baseSlice || !studio.session) return;
  const [nu, nv] = planeExtents(studio.view);
  const dims = studio.view.dims;
  let labels: Int32Array | null = null;
  let maxProb: Uint8Array | null = null;
  if (studio.lastSolve) {
    const n = dims.reduce((a, b) => a * b, 1);
    const full = rleDecode(studio.lastSolve.labels_rle, n);
    labels = extractSlice(
      full, dims, studio.view.axis, studio.view.index,
      (len) => new Int32Array(len));
    const prob = b64ToBytes(studio.lastSolve.max_prob_b64);
    maxProb = extractSlice(
      prob, dims, studio.view.axis, studio.view.index,
      (len) => new Uint8Array(len));
  }
  const rgba = renderOverlay(baseSlice, labels, maxProb,
                             studio.overlayMode as OverlayMode);
  const imageData = new ImageData(new Uint8ClampedArray(rgba), nu, nv);
  const scratch = document.createElement("canvas");
  scratch.width = nu;
  scratch.height = nv;
  scratch.getContext("2d")!.putImageData(imageData, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(scratch, 0, 0, canvas.width, canvas.height);

  const r = studio.report;
  reportBox.textContent = [
    `session ${studio.session.id}  dims ${dims.join("x")}`,
    `beta ${studio.session.beta}  gamma ${studio.session.gamma}  epsilon ${studio.session.epsilon}`,
    r ? `m_use ${r.m_use}  online ${r.online_ms.toFixed(1)} ms  refreshed ${r.refreshed} (base beta ${r.base_beta})`
      : "paint to solve",
    studio.busy ? "solving..." : "",
    studio.lastError ? `error: ${studio.lastError}` : "",
  ].filter(Boolean).join("\n");
}

studio.onChange(redraw);

let drawing: StrokePoint[] | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  drawing = [{ u: ev.offsetX / ZOOM, v: ev.offsetY / ZOOM }];
});
canvas.addEventListener("pointermove", (ev) => {
  if (drawing) drawing.push({ u: ev.offsetX / ZOOM, v: ev.offsetY / ZOOM });
});
window.addEventListener("pointerup", () => {
  if (drawing && drawing.length) studio.paintStroke(drawing);
  drawing = null;
});

document.getElementById("open")!.addEventListener("click", async () => {
  const imagePath = (document.getElementById("image-path") as HTMLInputElement).value;
  const packs = (document.getElementById("pack-paths") as HTMLInputElement).value
    .split(",").map((s) => s.trim()).filter(Boolean);
  try {
    await studio.open(imagePath, packs);
    await fetchBaseSlice();
    redraw();
  } catch (err) {
    reportBox.textContent = `error: ${err instanceof Error ? err.message : err}`;
  }
});

document.getElementById("undo")!.addEventListener("click", () => studio.undo());
document.getElementById("apply")!.addEventListener("click", () => {
  void studio.setParams({
    gamma: Number((document.getElementById("gamma") as HTMLInputElement).value),
    beta: Number((document.getElementById("beta") as HTMLInputElement).value),
    epsilon: Number((document.getElementById("epsilon") as HTMLInputElement).value),
  }).then(() => studio.requestSolve());
});
labelSelect.addEventListener("change", () => {
  studio.brushLabel = Number(labelSelect.value);
  const [r, g, b] = PALETTE[studio.brushLabel % PALETTE.length];
  (swatch as HTMLElement).style.background = `rgb(${r},${g},${b})`;
});
(document.getElementById("brush") as HTMLInputElement).addEventListener(
  "input", (ev) => {
    studio.brushRadius = Number((ev.target as HTMLInputElement).value);
  });
(document.getElementById("mode") as HTMLSelectElement).addEventListener(
  "change", (ev) => {
    studio.overlayMode = (ev.target as HTMLSelectElement).value as OverlayMode;
    redraw();
  });
