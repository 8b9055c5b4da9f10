// Session state: current result, pending jobs and an append-only history.

import type { EditSpecDoc, Job } from "./types";

export interface HistoryEntry {
  at: number;
  kind: "generate" | "edit";
  text: string;
  seed: number;
  jobId: string;
  motionId: string | null;
  spec?: EditSpecDoc;
}

export class SessionState {
  readonly history: HistoryEntry[] = [];
  private cursor = -1;
  readonly pending = new Map<string, Job>();
  activeCheckpoint: string | null = null;

  record(entry: HistoryEntry): void {
    this.history.push(entry);
    this.cursor = this.history.length - 1;
  }

  /** Entry currently shown; undo/redo move a cursor, history itself never shrinks. */
  current(): HistoryEntry | null {
    return this.cursor >= 0 ? this.history[this.cursor] : null;
  }

  undo(): HistoryEntry | null {
    if (this.cursor > 0) this.cursor--;
    return this.current();
  }

  redo(): HistoryEntry | null {
    if (this.cursor < this.history.length - 1) this.cursor++;
    return this.current();
  }

  /** Replay log: enough to regenerate every result via the API. */
  replayLog(): { kind: string; text: string; seed: number; spec?: EditSpecDoc }[] {
    return this.history.map(({ kind, text, seed, spec }) => ({ kind, text, seed, spec }));
  }
}
