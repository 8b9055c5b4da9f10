// Thin REST client over the service API.

import type { CheckpointInfo, EditSpecDoc, Job, MotionDoc, SkeletonResponse } from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail ?? body);
    } catch {
      /* keep statusText */
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class ApiClient {
  constructor(private base = "") {}

  generate(body: { text: string; seed?: number; cfg_scale?: number; steps?: number; delta?: number }): Promise<Job> {
    return request(`${this.base}/api/generate`, { method: "POST", body: JSON.stringify(body) });
  }

  edit(spec: EditSpecDoc, seed?: number): Promise<Job> {
    return request(`${this.base}/api/edit`, { method: "POST", body: JSON.stringify({ spec, seed }) });
  }

  job(id: string): Promise<Job> {
    return request(`${this.base}/api/jobs/${id}`);
  }

  motion(id: string): Promise<MotionDoc> {
    return request(`${this.base}/api/motions/${id}`);
  }

  skeleton(): Promise<SkeletonResponse> {
    return request(`${this.base}/api/skeleton`);
  }

  checkpoints(): Promise<CheckpointInfo[]> {
    return request(`${this.base}/api/checkpoints`);
  }

  activate(id: string): Promise<{ active: string }> {
    return request(`${this.base}/api/checkpoints/${id}/activate`, { method: "POST" });
  }
}
