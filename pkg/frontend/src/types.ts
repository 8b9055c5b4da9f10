// Wire types shared with the service REST API.

export interface SkeletonSpec {
  name: string;
  n_joints: number;
  parent_index: number[];
  bone_offsets: number[][];
  fps: number;
  joint_names: string[];
  foot_joints: number[] | null;
  heading_pair: number[] | null;
  heading_mode?: string;
  lower_body: number[];
}

export interface SkeletonResponse {
  checkpoint_id: string;
  skeleton: SkeletonSpec;
  seq_len: number;
}

export interface GuidanceOptions {
  rho?: number;
  step_mode?: "normalized" | "constant";
  time_travel?: number[] | null;
  steps?: number;
  cfg_scale?: number;
  delta?: number;
}

export interface EditSpecDoc {
  task: "path_following" | "in_betweening" | "upper_body";
  text: string;
  mask: number[][];        // joints x frames
  targets: number[][][];   // joints x frames x 3
  guidance?: GuidanceOptions;
}

export interface Job {
  id: string;
  kind: "generate" | "edit";
  status: "queued" | "running" | "done" | "failed";
  seed: number;
  checkpoint_id: string;
  result_motion_id: string | null;
  error: string | null;
  request: Record<string, unknown>;
}

export interface MotionDoc {
  version: number;
  fps: number;
  n_joints: number;
  length: number;
  representation: string;
  features: number[][];
  caption: string | null;
  global_joints: number[][]; // length x (n_joints*3), active frames only
  generator?: Record<string, unknown>;
}

export interface CheckpointInfo {
  id: string;
  path: string;
  active: boolean;
}

export type Vec2 = [number, number];
