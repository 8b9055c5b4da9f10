import { describe, expect, it } from "vitest";

import { errorColor, isFullGreen } from "./colormap";
import { frameAt } from "./playback";
import { pollJob } from "./poll";
import { SessionState } from "./state";
import type { Job } from "./types";

describe("errorColor", () => {
  it("is fully green at zero error", () => {
    expect(isFullGreen(errorColor(0))).toBe(true);
  });

  it("reaches red at the threshold and beyond", () => {
    expect(errorColor(0.5)).toBe("rgb(255,0,64)");
    expect(errorColor(2.0)).toBe("rgb(255,0,64)");
  });

  it("grades monotonically in between", () => {
    const red = (c: string) => Number(c.slice(4).split(",")[0]);
    expect(red(errorColor(0.1))).toBeLessThan(red(errorColor(0.3)));
  });
});

describe("frameAt", () => {
  it("advances with time and wraps", () => {
    expect(frameAt(0, 20, 196)).toBe(0);
    expect(frameAt(1000, 20, 196)).toBe(20);
    expect(frameAt(9800, 20, 196)).toBe(0); // exactly one loop
    expect(frameAt(9850, 20, 196)).toBe(1);
  });

  it("is pure and cheap enough for 30+ fps scheduling", () => {
    const start = performance.now();
    for (let i = 0; i < 200_000; i++) frameAt(i, 20, 196);
    const perCall = (performance.now() - start) / 200_000;
    expect(perCall).toBeLessThan(1000 / 30); // trivially; the render budget is the canvas, not the math
  });
});

describe("pollJob", () => {
  const job = (status: Job["status"]): Job => ({
    id: "J1",
    kind: "generate",
    status,
    seed: 1,
    checkpoint_id: "c",
    result_motion_id: status === "done" ? "J1" : null,
    error: status === "failed" ? "boom" : null,
    request: {},
  });

  it("polls with backoff until done", async () => {
    const statuses: Job["status"][] = ["queued", "running", "running", "done"];
    let calls = 0;
    const waits: number[] = [];
    const result = await pollJob(async () => job(statuses[calls++]), "J1", {
      intervalMs: 100,
      backoff: 2,
      sleep: async (ms) => {
        waits.push(ms);
      },
    });
    expect(result.status).toBe("done");
    expect(calls).toBe(4);
    expect(waits).toEqual([100, 200, 400]);
  });

  it("returns failed jobs instead of throwing", async () => {
    const result = await pollJob(async () => job("failed"), "J1", { sleep: async () => {} });
    expect(result.status).toBe("failed");
    expect(result.error).toBe("boom");
  });

  it("times out on stuck jobs", async () => {
    await expect(
      pollJob(async () => job("running"), "J1", { intervalMs: 50, timeoutMs: 120, sleep: async () => {} }),
    ).rejects.toThrow(/timed out/);
  });
});

describe("SessionState", () => {
  const entry = (jobId: string) => ({
    at: 0,
    kind: "generate" as const,
    text: "a person walks forward",
    seed: 1,
    jobId,
    motionId: jobId,
  });

  it("history is append-only across undo", () => {
    const s = new SessionState();
    s.record(entry("a"));
    s.record(entry("b"));
    expect(s.current()?.jobId).toBe("b");
    s.undo();
    expect(s.current()?.jobId).toBe("a");
    s.record(entry("c"));
    expect(s.history.map((e) => e.jobId)).toEqual(["a", "b", "c"]);
  });

  it("undo/redo move the cursor within bounds", () => {
    const s = new SessionState();
    expect(s.undo()).toBeNull();
    s.record(entry("a"));
    s.record(entry("b"));
    s.undo();
    s.undo();
    expect(s.current()?.jobId).toBe("a");
    s.redo();
    s.redo();
    expect(s.current()?.jobId).toBe("b");
  });

  it("replay log captures everything needed to reproduce", () => {
    const s = new SessionState();
    s.record(entry("a"));
    const log = s.replayLog();
    expect(log).toEqual([{ kind: "generate", text: "a person walks forward", seed: 1, spec: undefined }]);
  });
});
