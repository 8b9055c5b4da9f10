// Edit-spec builders: the client never does model math, it only assembles
// the control targets the service understands.

import { resamplePolyline } from "./resample";
import type { EditSpecDoc, GuidanceOptions, MotionDoc, SkeletonSpec, Vec2 } from "./types";

function emptyGrid(nJoints: number, frames: number): { mask: number[][]; targets: number[][][] } {
  const mask = Array.from({ length: nJoints }, () => new Array<number>(frames).fill(0));
  const targets = Array.from({ length: nJoints }, () =>
    Array.from({ length: frames }, () => [0, 0, 0] as number[]),
  );
  return { mask, targets };
}

export function restPelvisHeight(skeleton: SkeletonSpec): number {
  return skeleton.bone_offsets[0][1];
}

/** Sketch -> pelvis-trajectory spec, resampled by arc length to the frame grid. */
export function sketchToEditSpec(
  path: Vec2[],
  text: string,
  skeleton: SkeletonSpec,
  frames: number,
  guidance?: GuidanceOptions,
): EditSpecDoc {
  const resampled = resamplePolyline(path, frames);
  const { mask, targets } = emptyGrid(skeleton.n_joints, frames);
  const h = restPelvisHeight(skeleton);
  for (let f = 0; f < frames; f++) {
    mask[0][f] = 1;
    targets[0][f] = [resampled[f][0], h, resampled[f][1]];
  }
  return { task: "path_following", text, mask, targets, guidance };
}

/** Start/end keyframe spec: all joints pinned on the first/last nCtx frames. */
export function keyframeEditSpec(
  startPose: number[][],
  endPose: number[][],
  nCtx: number,
  text: string,
  frames: number,
  guidance?: GuidanceOptions,
): EditSpecDoc {
  const nJoints = startPose.length;
  if (endPose.length !== nJoints) throw new Error("pose joint counts differ");
  if (nCtx < 1 || 2 * nCtx >= frames) throw new Error("invalid context width");
  const { mask, targets } = emptyGrid(nJoints, frames);
  for (let j = 0; j < nJoints; j++) {
    for (let f = 0; f < nCtx; f++) {
      mask[j][f] = 1;
      targets[j][f] = [...startPose[j]];
      mask[j][frames - 1 - f] = 1;
      targets[j][frames - 1 - f] = [...endPose[j]];
    }
  }
  return { task: "in_betweening", text, mask, targets, guidance };
}

/** Pose of one frame of a motion, as (joints x 3). */
export function poseAtFrame(motion: MotionDoc, frame: number): number[][] {
  const flat = motion.global_joints[Math.max(0, Math.min(frame, motion.global_joints.length - 1))];
  const pose: number[][] = [];
  for (let j = 0; j < motion.n_joints; j++) pose.push([flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]]);
  return pose;
}

/** Lower-body lock: pin the tagged joints to a previous result's trajectory. */
export function lowerBodyLockSpec(
  motion: MotionDoc,
  skeleton: SkeletonSpec,
  text: string,
  frames: number,
  guidance?: GuidanceOptions,
): EditSpecDoc {
  if (!skeleton.lower_body.length) throw new Error("skeleton has no lower-body tags");
  const { mask, targets } = emptyGrid(skeleton.n_joints, frames);
  const active = Math.min(motion.global_joints.length, frames);
  for (const j of skeleton.lower_body) {
    for (let f = 0; f < active; f++) {
      const flat = motion.global_joints[f];
      mask[j][f] = 1;
      targets[j][f] = [flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]];
    }
  }
  return { task: "upper_body", text, mask, targets, guidance };
}

/** Masked-entry errors between a result motion and its spec (for overlays). */
export function controlErrors(motion: MotionDoc, spec: EditSpecDoc): (number | null)[][] {
  const frames = Math.min(motion.global_joints.length, spec.mask[0].length);
  return spec.mask.map((row, j) =>
    row.map((bit, f) => {
      if (!bit || f >= frames) return null;
      const flat = motion.global_joints[f];
      const dx = flat[3 * j] - spec.targets[j][f][0];
      const dy = flat[3 * j + 1] - spec.targets[j][f][1];
      const dz = flat[3 * j + 2] - spec.targets[j][f][2];
      return Math.hypot(dx, dy, dz);
    }),
  );
}
