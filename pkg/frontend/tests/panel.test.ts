import { beforeEach, describe, expect, it } from "vitest";

import { PredicatePanel } from "../src/panel.js";
import type { PredicateEvent, WireObject, WireState } from "../src/protocol.js";
import { fixture } from "./helpers.js";

interface StreamFixture {
  task: { id: string; goal: string[] };
  snapshot: { state: WireState };
  steps: {
    step: number;
    success: boolean;
    done: boolean;
    events: PredicateEvent[];
  }[];
}

const stream = fixture<StreamFixture>("session_stream");
const instanceIds = Object.keys(stream.snapshot.state.objects);

describe("goal rows", () => {
  it("starts unknown and flips only on kernel goal events", () => {
    const panel = new PredicatePanel(stream.task.goal);
    expect(panel.goals).toHaveLength(1);
    const row = panel.goals[0]!;
    expect(row.value).toBeNull();
    expect(row.flips).toEqual([]);

    // Replay exactly what the server would have sent: one
    // predicate_events message per step that produced events.
    for (const entry of stream.steps) {
      if (entry.events.length === 0) continue;
      panel.ingest({
        step: entry.step,
        events: entry.events,
        success: entry.success,
        done: entry.done,
      });
    }

    expect(row.value).toBe(true);
    expect(row.flips).toEqual([{ step: 239, value: true }]);
  });

  it("matches goal text with different spacing to the same row", () => {
    const panel = new PredicatePanel(["Soaked( towel_1 )=true"]);
    panel.ingest({
      step: 7,
      events: [{ kind: "goal", condition: "Soaked(towel_1)=true", value: true }],
      success: true,
      done: false,
    });
    expect(panel.goals[0]!.value).toBe(true);
    expect(panel.goals[0]!.flips).toEqual([{ step: 7, value: true }]);
  });

  it("keeps unparseable goal lines as inert rows", () => {
    const panel = new PredicatePanel(["this is not a condition"]);
    expect(panel.goals[0]!.key).toBe("this is not a condition");
    panel.ingest({
      step: 1,
      events: [{ kind: "goal", condition: "Cooked(meat_1)=true", value: true }],
      success: false,
      done: false,
    });
    expect(panel.goals[0]!.value).toBeNull();
  });
});

describe("success banner", () => {
  it("flips exactly when the kernel first reports success", () => {
    const panel = new PredicatePanel(stream.task.goal);
    for (const entry of stream.steps) {
      if (entry.events.length === 0) {
        // Status also rides on action acknowledgments.
        panel.noteKernelStatus(entry.step, entry.success, entry.done);
      } else {
        panel.ingest({
          step: entry.step,
          events: entry.events,
          success: entry.success,
          done: entry.done,
        });
      }
      if (entry.step < 239) {
        expect(panel.success, `step ${entry.step}`).toBe(false);
        expect(panel.successStep).toBeNull();
      }
    }
    expect(panel.success).toBe(true);
    expect(panel.done).toBe(true);
    expect(panel.successStep).toBe(239);
  });

  it("never asserts success on its own", () => {
    const panel = new PredicatePanel(["Soaked(towel_1)=true"]);
    // A goal event with value=true is NOT the success flag: the banner
    // follows the kernel's reported conjunction, nothing else.
    panel.ingest({
      step: 5,
      events: [{ kind: "goal", condition: "Soaked(towel_1)=true", value: true }],
      success: false,
      done: false,
    });
    expect(panel.goals[0]!.value).toBe(true);
    expect(panel.success).toBe(false);
    expect(panel.successStep).toBeNull();
  });
});

describe("watch rows", () => {
  let panel: PredicatePanel;

  beforeEach(() => {
    panel = new PredicatePanel(stream.task.goal);
  });

  it("rejects unknown instances with an inline error row", () => {
    const row = panel.addWatch("ghost_9", instanceIds);
    expect(row.error).toMatch(/no instance named "ghost_9"/);
    // An errored row never receives data, even if an event names it.
    panel.ingest({
      step: 3,
      events: [{ kind: "tags", instance: "ghost_9", tags: ["On"] }],
      success: false,
      done: false,
    });
    expect(row.tags).toBeNull();
    expect(row.flips).toEqual([]);
  });

  it("stamps tag flips with the step the kernel reported", () => {
    const faucet = panel.addWatch("faucet_1", instanceIds);
    const towel = panel.addWatch("towel_1", instanceIds);
    expect(faucet.error).toBeNull();
    expect(faucet.tags).toBeNull(); // unknown until the kernel speaks

    for (const entry of stream.steps) {
      if (entry.events.length === 0) continue;
      panel.ingest({
        step: entry.step,
        events: entry.events,
        success: entry.success,
        done: entry.done,
      });
    }

    expect(faucet.tags).toEqual(["On"]);
    expect(faucet.flips).toEqual([{ step: 231, value: ["On"] }]);
    expect(towel.tags).toEqual(["Soaked"]);
    expect(towel.flips).toEqual([{ step: 239, value: ["Soaked"] }]);
  });

  it("mirrors literal flag bits from folded kernel state", () => {
    const row = panel.addWatch("faucet_1", instanceIds);
    expect(row.flags).toBeNull();
    const objects = stream.snapshot.state.objects;
    panel.refreshFlags(objects);
    expect(row.flags).toEqual({
      toggled: objects["faucet_1"]!.toggled,
      sliced: objects["faucet_1"]!.sliced,
      wetness: objects["faucet_1"]!.wetness,
    });
  });

  it("supports removal", () => {
    panel.addWatch("faucet_1", instanceIds);
    panel.removeWatch("faucet_1");
    expect(panel.watches).toEqual([]);
  });
});

describe("event feed", () => {
  it("records a readable line per event and stays bounded", () => {
    const panel = new PredicatePanel([]);
    panel.addWatch("cup_1", ["cup_1"]);
    for (let step = 1; step <= 300; step++) {
      panel.ingest({
        step,
        events: [{ kind: "tags", instance: "cup_1", tags: step % 2 ? ["On"] : [] }],
        success: false,
        done: false,
      });
    }
    expect(panel.feed.length).toBeLessThanOrEqual(200);
    const last = panel.feed[panel.feed.length - 1]!;
    expect(last.step).toBe(300);
    expect(last.text).toContain("cup_1");
  });
});

describe("flag mirror on missing objects", () => {
  it("clears flags when the instance vanishes from state", () => {
    const panel = new PredicatePanel([]);
    const row = panel.addWatch("cup_1", ["cup_1"]);
    const cup = { toggled: true, sliced: false, wetness: 2 } as WireObject;
    panel.refreshFlags({ cup_1: cup } as Record<string, WireObject>);
    expect(row.flags).toEqual({ toggled: true, sliced: false, wetness: 2 });
    panel.refreshFlags({});
    expect(row.flags).toBeNull();
  });
});
