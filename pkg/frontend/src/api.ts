// Typed client for the seeding service endpoints.

export interface SessionInfo {
  id: string;
  dims: number[];
  num_labels: number | null;
  beta: number;
  gamma: number;
  epsilon: number;
  pack_m: number;
  refreshed: boolean;
}

export interface SolveResponse {
  dims: number[];
  num_labels: number;
  labels_rle: [number, number][];
  max_prob_b64: string;
  m_use: number;
  online_ms: number;
  refreshed: boolean;
  base_beta: number;
}

export interface ParamsResponse {
  refreshed: boolean;
  base_beta: number;
  beta: number;
  gamma: number;
  epsilon: number;
}

export interface Seed {
  index: number;
  label: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body.detail) detail = String(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class Api {
  constructor(private base: string = "") {}

  createSession(imagePath: string, packPaths: string[]): Promise<SessionInfo> {
    return fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ image_path: imagePath, pack_paths: packPaths }),
    }).then((r) => expectJson<SessionInfo>(r));
  }

  sessionInfo(id: string): Promise<SessionInfo> {
    return fetch(`${this.base}/sessions/${id}`).then((r) =>
      expectJson<SessionInfo>(r),
    );
  }

  sliceUrl(id: string, axis?: number, index?: number): string {
    const q =
      axis === undefined ? "" : `?axis=${axis}&index=${index ?? 0}`;
    return `${this.base}/sessions/${id}/slice${q}`;
  }

  setParams(
    id: string,
    params: { gamma?: number; beta?: number; epsilon?: number },
  ): Promise<ParamsResponse> {
    return fetch(`${this.base}/sessions/${id}/params`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    }).then((r) => expectJson<ParamsResponse>(r));
  }

  postSeeds(id: string, seeds: Seed[]): Promise<SolveResponse> {
    return fetch(`${this.base}/sessions/${id}/seeds`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ seeds }),
    }).then((r) => expectJson<SolveResponse>(r));
  }

  deleteSession(id: string): Promise<void> {
    return fetch(`${this.base}/sessions/${id}`, { method: "DELETE" }).then(
      (r) => {
        if (!r.ok && r.status !== 204) throw new ApiError(r.status, "delete");
      },
    );
  }
}
