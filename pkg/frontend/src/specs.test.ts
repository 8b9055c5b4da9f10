import { describe, expect, it } from "vitest";

import { arcLength } from "./resample";
import { controlErrors, keyframeEditSpec, lowerBodyLockSpec, poseAtFrame, sketchToEditSpec } from "./specs";
import type { MotionDoc, SkeletonSpec, Vec2 } from "./types";

const skeleton: SkeletonSpec = {
  name: "toy5",
  n_joints: 5,
  parent_index: [-1, 0, 1, 0, 3],
  bone_offsets: [
    [0, 0.9, 0],
    [0.1, -0.88, 0],
    [0, -0.02, 0.15],
    [-0.1, -0.88, 0],
    [0, -0.02, 0.15],
  ],
  fps: 20,
  joint_names: ["pelvis", "l_heel", "l_toe", "r_heel", "r_toe"],
  foot_joints: [1, 2, 3, 4],
  heading_pair: [1, 3],
  lower_body: [0, 1, 2, 3, 4],
};

function fakeMotion(frames: number): MotionDoc {
  const joints: number[][] = [];
  for (let f = 0; f < frames; f++) {
    const flat: number[] = [];
    for (let j = 0; j < skeleton.n_joints; j++) flat.push(f * 0.01 + j, 0.5, f * 0.02);
    joints.push(flat);
  }
  return {
    version: 1,
    fps: 20,
    n_joints: skeleton.n_joints,
    length: frames,
    representation: "encoder",
    features: [],
    caption: null,
    global_joints: joints,
  };
}

describe("sketchToEditSpec", () => {
  it("masks the pelvis row on every frame and nothing else", () => {
    const path: Vec2[] = [[0, 0], [0, 2]];
    const spec = sketchToEditSpec(path, "a person walks forward", skeleton, 64);
    expect(spec.task).toBe("path_following");
    expect(spec.mask[0].every((v) => v === 1)).toBe(true);
    for (let j = 1; j < skeleton.n_joints; j++) expect(spec.mask[j].every((v) => v === 0)).toBe(true);
  });

  it("a sketched 2 m path yields targets spanning 2 m within 1%", () => {
    const path: Vec2[] = [[0, 0], [0.3, 0.7], [0.1, 1.4], [0, 2]];
    const spec = sketchToEditSpec(path, "x", skeleton, 196);
    const targetPath: Vec2[] = spec.targets[0].map((t) => [t[0], t[2]]);
    const want = arcLength(path);
    expect(Math.abs(arcLength(targetPath) - want) / want).toBeLessThan(0.01);
    // pelvis height filled from the rest pose
    expect(spec.targets[0][0][1]).toBeCloseTo(0.9, 5);
  });
});

describe("keyframeEditSpec", () => {
  it("pins all joints on the boundary frames", () => {
    const start = Array.from({ length: 5 }, (_, j) => [j, 0, 0]);
    const end = Array.from({ length: 5 }, (_, j) => [j, 1, 0]);
    const spec = keyframeEditSpec(start, end, 2, "x", 32);
    const bits = spec.mask.flat().reduce((a, b) => a + b, 0);
    expect(bits).toBe(2 * 2 * 5);
    expect(spec.targets[3][0]).toEqual([3, 0, 0]);
    expect(spec.targets[3][31]).toEqual([3, 1, 0]);
  });

  it("rejects overlapping context", () => {
    const pose = Array.from({ length: 5 }, () => [0, 0, 0]);
    expect(() => keyframeEditSpec(pose, pose, 16, "x", 32)).toThrow();
  });
});

describe("lowerBodyLockSpec", () => {
  it("copies the motion's lower-body joints exactly", () => {
    const motion = fakeMotion(24);
    const spec = lowerBodyLockSpec(motion, skeleton, "x", 32);
    expect(spec.task).toBe("upper_body");
    for (const j of skeleton.lower_body) {
      expect(spec.mask[j].slice(0, 24).every((v) => v === 1)).toBe(true);
      expect(spec.mask[j].slice(24).every((v) => v === 0)).toBe(true);
      expect(spec.targets[j][5]).toEqual([5 * 0.01 + j, 0.5, 5 * 0.02]);
    }
  });
});

describe("controlErrors / poseAtFrame", () => {
  it("is zero for a perfect match and null outside the mask", () => {
    const motion = fakeMotion(16);
    const spec = lowerBodyLockSpec(motion, skeleton, "x", 16);
    const errs = controlErrors(motion, spec);
    for (const j of skeleton.lower_body) {
      for (let f = 0; f < 16; f++) expect(errs[j][f]).toBeCloseTo(0, 10);
    }
  });

  it("reports the offset magnitude", () => {
    const motion = fakeMotion(16);
    const spec = lowerBodyLockSpec(motion, skeleton, "x", 16);
    spec.targets[0][3][0] += 0.25;
    const errs = controlErrors(motion, spec);
    expect(errs[0][3]).toBeCloseTo(0.25, 10);
  });

  it("poseAtFrame unflattens joints", () => {
    const motion = fakeMotion(4);
    const pose = poseAtFrame(motion, 2);
    expect(pose.length).toBe(5);
    expect(pose[1]).toEqual([2 * 0.01 + 1, 0.5, 2 * 0.02]);
  });
});
