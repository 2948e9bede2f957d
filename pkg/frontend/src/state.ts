/**
 * Client-side mirror of the session state stream.
 *
 * A full snapshot seeds the mirror; each delta folds over the previous state
 * exactly as the server computes it (per-entry upserts and removals for the
 * three big instance maps, wholesale replacement for every other top-level
 * key).  After every fold the mirror recomputes the state digest and
 * compares it with the digest the server sent — a mismatch means the stream
 * desynced and the caller must resync from a fresh snapshot.
 */

import type {
  DeltaChanges,
  DeltaPayload,
  MapDelta,
  SnapshotPayload,
  StaticPayload,
  WireObject,
  WireState,
} from "./protocol.js";
import { stateDigest } from "./protocol.js";

const MAP_KEYS = ["objects", "droplets", "dynamic_models"] as const;

export function foldDelta(base: WireState, changes: DeltaChanges): WireState {
  const out: Record<string, unknown> = {};
  const baseRec = base as unknown as Record<string, unknown>;
  for (const [key, value] of Object.entries(baseRec)) {
    out[key] = (MAP_KEYS as readonly string[]).includes(key)
      ? { ...(value as Record<string, unknown>) }
      : value;
  }
  for (const key of MAP_KEYS) {
    const entry: MapDelta | undefined = changes[key];
    if (!entry) continue;
    const target = out[key] as Record<string, unknown>;
    for (const removed of entry.remove ?? []) {
      delete target[removed];
    }
    Object.assign(target, entry.set ?? {});
  }
  Object.assign(out, changes.top ?? {});
  return out as unknown as WireState;
}

export type MirrorUpdate =
  | { kind: "snapshot"; step: number }
  | { kind: "delta"; step: number }
  | { kind: "desync"; step: number; expected: string; actual: string };

export class SessionMirror {
  state: WireState | null = null;
  staticScene: StaticPayload | null = null;
  step = -1;
  digest: string | null = null;

  applySnapshot(payload: SnapshotPayload): MirrorUpdate {
    this.state = payload.state;
    this.staticScene = payload.static;
    this.step = payload.step;
    this.digest = payload.digest;
    return { kind: "snapshot", step: payload.step };
  }

  /**
   * Fold one delta and verify the resulting digest.  On mismatch the mirror
   * keeps the folded (wrong) state but reports the desync so the owner can
   * reconnect for a fresh snapshot.
   */
  async applyDelta(payload: DeltaPayload): Promise<MirrorUpdate> {
    if (this.state === null) {
      return {
        kind: "desync",
        step: payload.step,
        expected: payload.digest,
        actual: "(no snapshot yet)",
      };
    }
    this.state = foldDelta(this.state, payload.changes);
    this.step = payload.step;
    const actual = await stateDigest(this.state);
    this.digest = payload.digest;
    if (actual !== payload.digest) {
      return {
        kind: "desync",
        step: payload.step,
        expected: payload.digest,
        actual,
      };
    }
    return { kind: "delta", step: payload.step };
  }

  object(instance: string): WireObject | undefined {
    return this.state?.objects[instance];
  }

  /** Live object ids (consumed tombstones excluded), sorted. */
  liveObjectIds(): string[] {
    if (this.state === null) return [];
    return Object.entries(this.state.objects)
      .filter(([, obj]) => !obj.consumed)
      .map(([id]) => id)
      .sort();
  }

  dropletCount(): number {
    if (this.state === null) return 0;
    return Object.keys(this.state.droplets).length;
  }
}
