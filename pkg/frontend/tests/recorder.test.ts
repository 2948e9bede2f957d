import { describe, expect, it } from "vitest";

import { RecorderModel } from "../src/recorder.js";
import type { RecordAckPayload } from "../src/protocol.js";

function startAck(step = 0, target = "demo.log"): RecordAckPayload {
  return { op: "start", step, recording: true, target } as RecordAckPayload;
}

describe("client-side guards", () => {
  it("allows start only at step zero with a target name", () => {
    const rec = new RecorderModel();
    expect(rec.guardStart(0, "demo.log")).toBeNull();
    expect(rec.guardStart(3, "demo.log")).toMatch(/before the first step/);
    expect(rec.guardStart(0, "   ")).toMatch(/target file name/);
  });

  it("rejects recording while recording without asking the server", () => {
    const rec = new RecorderModel();
    rec.onStartAck(startAck());
    expect(rec.guardStart(0, "other.log")).toBe("already recording");
  });

  it("disables stop and mark when idle", () => {
    const rec = new RecorderModel();
    expect(rec.guardStop()).toBe("not recording");
    expect(rec.guardMark()).toBe("not recording");
    rec.onStartAck(startAck());
    expect(rec.guardStop()).toBeNull();
    expect(rec.guardMark()).toBeNull();
  });
});

describe("acknowledged lifecycle", () => {
  it("tracks start, marks, and stop into a finished log entry", () => {
    const rec = new RecorderModel();
    rec.onStartAck(startAck(0, "demo.log"));
    expect(rec.phase).toBe("recording");
    expect(rec.target).toBe("demo.log");

    rec.onMarkAck({ op: "mark", step: 4, recording: true, label: "before" } as RecordAckPayload);
    rec.onMarkAck({ op: "mark", step: 9, recording: true, label: "after" } as RecordAckPayload);

    const log = rec.onStopAck({
      op: "stop",
      step: 12,
      recording: false,
      final_digest: "ab".repeat(32),
      success: false,
    } as RecordAckPayload);

    expect(rec.phase).toBe("idle");
    expect(rec.target).toBeNull();
    expect(log).toEqual({
      target: "demo.log",
      finalDigest: "ab".repeat(32),
      steps: 12,
      success: false,
      markers: [
        { step: 4, label: "before" },
        { step: 9, label: "after" },
      ],
      verified: null,
    });
    expect(rec.finished).toEqual([log]);
    // Markers reset for the next take.
    expect(rec.markers).toEqual([]);
  });

  it("records server-side replay verification per finished log", () => {
    const rec = new RecorderModel();
    rec.onStartAck(startAck());
    rec.onStopAck({
      op: "stop",
      step: 5,
      recording: false,
      final_digest: "00".repeat(32),
      success: true,
    } as RecordAckPayload);
    rec.onVerify("demo.log", true);
    expect(rec.finished[0]!.verified).toBe(true);
    rec.onVerify("missing.log", false); // unknown target: no crash, no change
    expect(rec.finished[0]!.verified).toBe(true);
  });
});

describe("download paths", () => {
  it("maps relative targets onto the static endpoint", () => {
    expect(RecorderModel.downloadPath("demo.log")).toBe("/demo.log");
    expect(RecorderModel.downloadPath("runs/take1.log")).toBe("/runs/take1.log");
  });

  it("refuses absolute targets", () => {
    expect(RecorderModel.downloadPath("/tmp/demo.log")).toBeNull();
    expect(RecorderModel.downloadPath("C:\\demos\\x.log")).toBeNull();
  });
});
