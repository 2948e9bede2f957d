import { describe, expect, it } from "vitest";

import { stateDigest, type DeltaChanges, type EncodedAction, type PredicateEvent, type SnapshotPayload, type WireState } from "../src/protocol.js";
import { foldDelta, SessionMirror } from "../src/state.js";
import { deepClone, fixture } from "./helpers.js";

interface FoldFixture {
  cases: {
    base: WireState;
    delta: DeltaChanges;
    result: WireState;
    result_digest: string;
  }[];
}

interface StreamStep {
  step: number;
  actions: EncodedAction[];
  digest: string;
  success: boolean;
  done: boolean;
  events: PredicateEvent[];
  changes?: DeltaChanges;
  snapshot?: SnapshotPayload;
}

interface StreamFixture {
  task: { id: string; goal: string[] };
  snapshot: SnapshotPayload;
  initial_digest: string;
  steps: StreamStep[];
  counts: { deltas: number; snapshots: number; droplet_upserts: number; events: number };
}

const foldCases = fixture<FoldFixture>("fold");
const stream = fixture<StreamFixture>("session_stream");

describe("delta folding", () => {
  it("applies map removals, upserts, and top-level replacement", async () => {
    for (const [index, c] of foldCases.cases.entries()) {
      const folded = foldDelta(c.base, c.delta);
      expect(folded, `case ${index}`).toEqual(c.result);
      expect(await stateDigest(folded), `case ${index} digest`).toBe(c.result_digest);
    }
  });

  it("leaves the base state untouched", () => {
    const c = foldCases.cases[0]!;
    const before = deepClone(c.base);
    foldDelta(c.base, c.delta);
    expect(c.base).toEqual(before);
  });

  it("treats an empty delta as identity", async () => {
    const identity = foldCases.cases.find(
      (c) => Object.keys(c.delta).length === 0,
    );
    expect(identity).toBeDefined();
    expect(foldDelta(identity!.base, identity!.delta)).toEqual(identity!.base);
  });
});

describe("session mirror over a recorded stream", () => {
  it("stays digest-clean across every delta and the mid-stream snapshot", async () => {
    const mirror = new SessionMirror();
    mirror.applySnapshot(stream.snapshot);
    expect(mirror.step).toBe(0);
    expect(mirror.digest).toBe(stream.initial_digest);
    expect(await stateDigest(mirror.state!)).toBe(stream.initial_digest);

    let snapshots = 0;
    let deltas = 0;
    for (const entry of stream.steps) {
      if (entry.snapshot) {
        const update = mirror.applySnapshot(entry.snapshot);
        expect(update.kind).toBe("snapshot");
        snapshots += 1;
      } else {
        const update = await mirror.applyDelta({
          step: entry.step,
          digest: entry.digest,
          changes: entry.changes!,
        });
        expect(update.kind, `step ${entry.step}`).toBe("delta");
        deltas += 1;
      }
      expect(mirror.step).toBe(entry.step);
      expect(mirror.digest).toBe(entry.digest);
    }
    expect(snapshots).toBe(stream.counts.snapshots);
    expect(deltas).toBe(stream.counts.deltas);

    // The folded end state must hash to the final digest independently.
    const last = stream.steps[stream.steps.length - 1]!;
    expect(await stateDigest(mirror.state!)).toBe(last.digest);
  });

  it("reports a desync when a delta is tampered with", async () => {
    const mirror = new SessionMirror();
    mirror.applySnapshot(stream.snapshot);
    const first = stream.steps[0]!;
    const corrupted = deepClone(first.changes!);
    const top = (corrupted.top ??= {});
    top["droplets_emitted"] = 999999;
    const update = await mirror.applyDelta({
      step: first.step,
      digest: first.digest,
      changes: corrupted,
    });
    expect(update.kind).toBe("desync");
    if (update.kind === "desync") {
      expect(update.expected).toBe(first.digest);
      expect(update.actual).not.toBe(first.digest);
    }
  });

  it("tracks live objects and droplets", () => {
    const mirror = new SessionMirror();
    mirror.applySnapshot(stream.snapshot);
    const ids = mirror.liveObjectIds();
    expect(ids).toContain("towel_1");
    expect(ids).toContain("faucet_1");
    expect(mirror.dropletCount()).toBe(0);
  });

  it("accumulates droplet upserts from the stream", async () => {
    const mirror = new SessionMirror();
    mirror.applySnapshot(stream.snapshot);
    let sawDroplet = false;
    for (const entry of stream.steps) {
      if (entry.snapshot) {
        mirror.applySnapshot(entry.snapshot);
      } else {
        await mirror.applyDelta({
          step: entry.step,
          digest: entry.digest,
          changes: entry.changes!,
        });
      }
      if (mirror.dropletCount() > 0) sawDroplet = true;
    }
    expect(sawDroplet).toBe(true);
    // The soak goal was reached, so the kernel reported success.
    const last = stream.steps[stream.steps.length - 1]!;
    expect(last.success).toBe(true);
    expect(last.done).toBe(true);
    const towel = mirror.state!.objects["towel_1"]!;
    expect(towel.wetness).toBeGreaterThan(0);
  });
});
