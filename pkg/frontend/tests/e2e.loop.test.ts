// Scripted interactive-loop test against the real service: paint seeds on a
// served phantom, read the overlay, undo a stroke, change beta, and observe
// the refreshed flag and a new report.

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { extractSlice, renderOverlay } from "../src/overlay.js";
import { b64ToBytes, rleDecode } from "../src/rle.js";
import { SeedStudio } from "../src/state.js";

const PORT = 8765 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

const PREPARE = `
import sys
import specwalk as sw
out = sys.argv[1]
ph = sw.make_phantom("blobs2d", (16, 12), rng_seed=2, noise_sigma=0.04, num_regions=2)
sw.save_image(ph.image, out + "/phantom")
for beta in (25.0, 50.0):
    sw.save_pack(sw.precompute(ph.image, beta, m=48), out + f"/phantom_beta{beta:g}.rwpk")
print("ready")
`;

let server: ChildProcess | null = null;
let workdir = "";

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/sessions/none`);
      if (resp.status === 404) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "seedstudio-"));
  const prep = spawnSync("python3", ["-c", PREPARE, workdir], {
    encoding: "utf-8",
  });
  if (!prep.stdout.includes("ready")) {
    throw new Error(`phantom prep failed: ${prep.stderr}`);
  }
  server = spawn("python3", [
    "-m", "specwalk.cli", "serve", "--port", String(PORT),
  ], { stdio: "ignore" });
  await waitForServer();
}, 120_000);

afterAll(() => {
  server?.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe("interactive loop", () => {
  it("paints, solves, undoes, and refreshes", async () => {
    const api = new Api(BASE);
    const studio = new SeedStudio(api);
    const info = await studio.open(join(workdir, "phantom.json"), [
      join(workdir, "phantom_beta25.rwpk"),
      join(workdir, "phantom_beta50.rwpk"),
    ]);
    expect(info.dims).toEqual([16, 12]);

    // the slice endpoint serves the grayscale backdrop
    const slice = await fetch(api.sliceUrl(info.id));
    expect(slice.status).toBe(200);
    expect(slice.headers.get("content-type")).toBe("image/png");

    // two strokes with different labels -> an overlay with both regions
    studio.brushRadius = 1.5;
    studio.brushLabel = 0;
    studio.paintStroke([{ u: 3, v: 3 }, { u: 4, v: 4 }]);
    await studio.requestSolve();
    studio.brushLabel = 1;
    studio.paintStroke([{ u: 12, v: 8 }, { u: 13, v: 9 }]);
    await studio.requestSolve();

    expect(studio.lastSolve).not.toBeNull();
    const solve1 = studio.lastSolve!;
    expect(solve1.num_labels).toBe(2);
    expect(solve1.m_use).toBeGreaterThan(0);
    expect(solve1.online_ms).toBeGreaterThan(0);
    const n = 16 * 12;
    const labels = rleDecode(solve1.labels_rle, n);
    expect(new Set(labels).size).toBe(2);
    const maxProb = b64ToBytes(solve1.max_prob_b64);
    expect(maxProb.length).toBe(n);

    // overlay compositing over a synthetic backdrop
    const base = new Uint8Array(n).fill(128);
    const labelSlice = extractSlice(labels, [16, 12], 2, 0,
      (len) => new Int32Array(len));
    const rgba = renderOverlay(base, labelSlice, null, "labels");
    expect(rgba.length).toBe(n * 4);
    const tints = new Set<string>();
    for (let i = 0; i < n; i++) {
      tints.add(`${rgba[i * 4]},${rgba[i * 4 + 1]},${rgba[i * 4 + 2]}`);
    }
    expect(tints.size).toBe(2);

    // undo reverts to the single-label seed set
    const undone = studio.undo();
    expect(undone).toBe(true);
    await studio.requestSolve();
    const solve2 = studio.lastSolve!;
    const labels2 = rleDecode(solve2.labels_rle, n);
    expect(new Set(labels2).size).toBe(1);
    expect(studio.seeds().every((s) => s.label === 0)).toBe(true);

    // beta change triggers a refresh; the next report reflects it
    await studio.setParams({ beta: 40 });
    studio.brushLabel = 1;
    studio.paintStroke([{ u: 12, v: 8 }]);
    await studio.requestSolve();
    const solve3 = studio.lastSolve!;
    expect(solve3.refreshed).toBe(true);
    expect(solve3.base_beta).toBe(50); // log-nearest base for beta 40
    expect(studio.report!.refreshed).toBe(true);
    expect(
      solve3.m_use !== solve2.m_use ||
        solve3.online_ms !== solve2.online_ms,
    ).toBe(true);

    await api.deleteSession(info.id);
  }, 60_000);
});
