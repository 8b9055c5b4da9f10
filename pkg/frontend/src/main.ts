// Editing studio: sketch, keyframe and lower-body controls driving the
// generation service, with skeleton playback of every result.

import { ApiClient, ApiError } from "./api";
import { SkeletonPlayer } from "./playback";
import { pollJob } from "./poll";
import { simplifyPath } from "./resample";
import { PathSketcher } from "./sketch";
import { controlErrors, lowerBodyLockSpec, poseAtFrame, keyframeEditSpec, sketchToEditSpec } from "./specs";
import { SessionState } from "./state";
import type { EditSpecDoc, MotionDoc, SkeletonResponse } from "./types";

const api = new ApiClient("");
const state = new SessionState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function toast(message: string, isError = true): void {
  const box = el<HTMLDivElement>("toasts");
  const item = document.createElement("div");
  item.className = `toast${isError ? " error" : ""}`;
  item.textContent = message;
  box.appendChild(item);
  setTimeout(() => item.remove(), 5000);
}

let skeletonInfo: SkeletonResponse | null = null;
let player: SkeletonPlayer | null = null;
let currentMotion: MotionDoc | null = null;
let currentSpec: EditSpecDoc | null = null;

async function init(): Promise<void> {
  const sketcher = new PathSketcher(el<HTMLCanvasElement>("sketch"));
  sketcher.draw();

  try {
    skeletonInfo = await api.skeleton();
    el<HTMLSpanElement>("checkpoint").textContent = skeletonInfo.checkpoint_id;
    player = new SkeletonPlayer(el<HTMLCanvasElement>("playback"), skeletonInfo.skeleton);
    player.onFrame = (f) => {
      const scrub = el<HTMLInputElement>("scrub");
      if (document.activeElement !== scrub) scrub.value = String(f);
      el<HTMLSpanElement>("frameinfo").textContent = currentMotion
        ? `${f + 1}/${currentMotion.global_joints.length}`
        : "";
    };
  } catch (err) {
    toast(`offline: ${(err as Error).message} — cached playback only`);
  }

  el<HTMLButtonElement>("btn-generate").onclick = () =>
    submit(() => api.generate({ text: text(), seed: seed() }), "generate", null);

  el<HTMLButtonElement>("btn-path").onclick = () => {
    const path = simplifyPath(sketcher.path());
    if (!skeletonInfo) return toast("no model connected");
    if (path.length < 2) return toast("sketch a path first");
    const spec = sketchToEditSpec(path, text(), skeletonInfo.skeleton, skeletonInfo.seq_len);
    submit(() => api.edit(spec, seed()), "edit", spec);
  };

  el<HTMLButtonElement>("btn-inbetween").onclick = () => {
    if (!skeletonInfo) return toast("no model connected");
    if (!currentMotion) return toast("load a motion first (its first/last frames become keyframes)");
    const start = poseAtFrame(currentMotion, 0);
    const end = poseAtFrame(currentMotion, currentMotion.global_joints.length - 1);
    const nCtx = Number(el<HTMLInputElement>("nctx").value) || 2;
    const spec = keyframeEditSpec(start, end, nCtx, text(), skeletonInfo.seq_len);
    submit(() => api.edit(spec, seed()), "edit", spec);
  };

  el<HTMLButtonElement>("btn-lock").onclick = () => {
    if (!skeletonInfo) return toast("no model connected");
    if (!currentMotion) return toast("load a motion first");
    const spec = lowerBodyLockSpec(currentMotion, skeletonInfo.skeleton, text(), skeletonInfo.seq_len);
    submit(() => api.edit(spec, seed()), "edit", spec);
  };

  el<HTMLButtonElement>("btn-clear").onclick = () => sketcher.clear();
  el<HTMLButtonElement>("btn-play").onclick = () => player?.play();
  el<HTMLButtonElement>("btn-pause").onclick = () => player?.pause();
  el<HTMLInputElement>("scrub").oninput = (e) =>
    player?.scrub(Number((e.target as HTMLInputElement).value));
  el<HTMLButtonElement>("btn-undo").onclick = () => {
    const entry = state.undo();
    if (entry?.motionId) loadMotion(entry.motionId, entry.spec ?? null);
  };
  el<HTMLButtonElement>("btn-redo").onclick = () => {
    const entry = state.redo();
    if (entry?.motionId) loadMotion(entry.motionId, entry.spec ?? null);
  };
}

function text(): string {
  return el<HTMLInputElement>("prompt").value.trim() || "a person walks forward";
}

function seed(): number | undefined {
  const raw = el<HTMLInputElement>("seed").value.trim();
  return raw ? Number(raw) : undefined;
}

async function submit(
  start: () => Promise<import("./types").Job>,
  kind: "generate" | "edit",
  spec: EditSpecDoc | null,
): Promise<void> {
  try {
    const job = await start();
    renderJob(job.id, job.status);
    const done = await pollJob((id) => api.job(id), job.id, {
      onUpdate: (j) => renderJob(j.id, j.status),
    });
    if (done.status === "failed") {
      toast(`job failed: ${done.error}`);
      return;
    }
    state.record({
      at: Date.now(),
      kind,
      text: text(),
      seed: done.seed,
      jobId: done.id,
      motionId: done.result_motion_id,
      spec: spec ?? undefined,
    });
    renderHistory();
    if (done.result_motion_id) await loadMotion(done.result_motion_id, spec);
  } catch (err) {
    if (err instanceof ApiError) toast(`${err.status}: ${err.message}`);
    else toast((err as Error).message);
  }
}

async function loadMotion(motionId: string, spec: EditSpecDoc | null): Promise<void> {
  try {
    currentMotion = await api.motion(motionId);
    currentSpec = spec;
    const errors = spec ? controlErrors(currentMotion, spec) : null;
    const scrub = el<HTMLInputElement>("scrub");
    scrub.max = String(currentMotion.global_joints.length - 1);
    player?.load(currentMotion, currentSpec, errors);
    el<HTMLSpanElement>("motioninfo").textContent =
      `${motionId.slice(0, 8)}… ${currentMotion.length} frames @ ${currentMotion.fps} fps`;
  } catch (err) {
    toast(`could not load motion: ${(err as Error).message}`);
  }
}

function renderJob(id: string, status: string): void {
  const panel = el<HTMLUListElement>("jobs");
  let item = document.getElementById(`job-${id}`);
  if (!item) {
    item = document.createElement("li");
    item.id = `job-${id}`;
    panel.prepend(item);
  }
  item.textContent = `${id.slice(0, 10)}… ${status}`;
}

function renderHistory(): void {
  const list = el<HTMLUListElement>("history");
  list.innerHTML = "";
  for (const entry of state.history) {
    const item = document.createElement("li");
    item.textContent = `${entry.kind}: "${entry.text}" (seed ${entry.seed})`;
    if (entry.motionId) {
      item.style.cursor = "pointer";
      item.onclick = () => loadMotion(entry.motionId!, entry.spec ?? null);
    }
    list.appendChild(item);
  }
}

init();
