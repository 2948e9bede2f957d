/**
 * End-to-end acceptance drive against a real server over a real socket.
 *
 * A scripted session stands in for a browser: it connects, steers a hand
 * onto the stove's toggle control, watches the predicate panel flip the
 * stove to "On" within the same step's delta, records the whole demo,
 * downloads the finished log over the same port's static endpoint, and
 * replays it digest-clean through the command-line tool.
 */

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { cp, mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { WebSocket } from "ws";

import { BridgeClient, ServerError, type SocketLike } from "../src/client.js";
import {
  aabbCenter,
  decodeRooms,
  objectLinkGeoms,
  vDist,
  vNorm,
  vScale,
  vSub,
  type Vec3,
} from "../src/geom.js";
import { PredicatePanel } from "../src/panel.js";
import {
  decodeVec,
  moveHand,
  noop,
  type PredicateEventsPayload,
} from "../src/protocol.js";
import { RecorderModel } from "../src/recorder.js";
import { teleportTo } from "../src/steer.js";

const execFileAsync = promisify(execFile);
const HERE = dirname(fileURLToPath(import.meta.url));
const DIST = join(HERE, "..", "dist");

/** Hand moves command velocity over one step of this duration. */
const STEP_SECONDS = 1 / 30;

let server: ChildProcess | null = null;
let serverExited: Promise<number | null> | null = null;
let staticDir = "";
let scratchDir = "";
let httpBase = "";
let wsUrl = "";

beforeAll(async () => {
  expect(
    existsSync(join(DIST, "index.html")) && existsSync(join(DIST, "main.js")),
    "dist/ must be built before the e2e (npm run build)",
  ).toBe(true);

  // The server's working directory doubles as the static root so that a
  // relative recording target becomes downloadable over plain HTTP.
  staticDir = await mkdtemp(join(tmpdir(), "console-static-"));
  scratchDir = await mkdtemp(join(tmpdir(), "console-scratch-"));
  await cp(DIST, staticDir, { recursive: true });

  server = spawn(
    "python3",
    [
      "-m",
      "oikos",
      "serve",
      "cooking_meat",
      "--port",
      "0",
      "--seed",
      "0",
      "--static",
      staticDir,
    ],
    { cwd: staticDir, stdio: ["ignore", "pipe", "pipe"] },
  );
  serverExited = new Promise((resolve) => server!.once("exit", resolve));

  const port = await new Promise<number>((resolve, reject) => {
    let text = "";
    const timer = setTimeout(
      () => reject(new Error(`server never announced a port:\n${text}`)),
      30_000,
    );
    server!.stderr!.on("data", (chunk: Buffer) => {
      text += chunk.toString();
      const m = /ws:\/\/127\.0\.0\.1:(\d+)/.exec(text);
      if (m) {
        clearTimeout(timer);
        resolve(Number(m[1]));
      }
    });
    server!.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}):\n${text}`));
    });
  });

  httpBase = `http://127.0.0.1:${port}`;
  wsUrl = `ws://127.0.0.1:${port}/`;
});

afterAll(async () => {
  if (server !== null && server.exitCode === null) {
    server.kill("SIGTERM");
    await serverExited;
  }
  if (staticDir !== "") await rm(staticDir, { recursive: true, force: true });
  if (scratchDir !== "") await rm(scratchDir, { recursive: true, force: true });
});

function openSocket(): SocketLike {
  return new WebSocket(wsUrl) as unknown as SocketLike;
}

describe("scripted console session", () => {
  it("toggles the stove, sees the panel flip within one delta, and replays the demo digest-clean", async () => {
    // --- connect -------------------------------------------------------------------
    const eventLog: PredicateEventsPayload[] = [];
    let stoveToggledAtIngest: boolean | null = null;
    let firstToggledStep: number | null = null;

    const client: BridgeClient = new BridgeClient(openSocket, "controller", {
      predicateEvents: (payload) => {
        eventLog.push(payload);
        // At ingest time the same step's delta must already be folded:
        // the wire order is delta, then predicate_events, then the ack.
        if (payload.events.some((e) => e.kind === "tags" && e.instance === "stove_1")) {
          stoveToggledAtIngest = client.mirror.object("stove_1")?.toggled ?? null;
        }
      },
      update: () => {
        if (firstToggledStep === null && client.mirror.object("stove_1")?.toggled) {
          firstToggledStep = client.mirror.step;
        }
      },
    });

    const attach = await client.connect();
    expect(attach.protocol).toBe("oikos/1");
    expect(attach.role).toBe("controller");
    expect(attach.task.id).toBe("cooking_meat");
    expect(attach.step).toBe(0);
    expect(attach.recording).toBe(false);
    expect(client.mirror.step).toBe(0);
    expect(client.mirror.digest).toBe(attach.digest);

    // --- predicate panel -----------------------------------------------------------
    const panel = new PredicatePanel(attach.task.goal);
    const known = client.mirror.liveObjectIds();
    const stoveRow = panel.addWatch("stove_1", known);
    expect(stoveRow.error).toBeNull();
    const ghostRow = panel.addWatch("ghost_9", known);
    expect(ghostRow.error).toMatch(/no instance named/);

    // --- recorder: start before the first step --------------------------------------
    const recorder = new RecorderModel();
    expect(recorder.guardStart(client.mirror.step, "demo.log")).toBeNull();
    const startAck = await client.recordControl({ op: "start", target: "demo.log" });
    recorder.onStartAck(startAck);
    expect(startAck.recording).toBe(true);
    expect(startAck.step).toBe(0);
    expect(client.recording).toBe(true);

    // Recording-while-recording: vetoed client-side AND refused by the server.
    expect(recorder.guardStart(client.mirror.step, "other.log")).toBe("already recording");
    await expect(
      client.recordControl({ op: "start", target: "other.log" }),
    ).rejects.toThrowError(ServerError);
    expect(client.recording).toBe(true);

    recorder.onMarkAck(await client.recordControl({ op: "mark", label: "approach" }));

    // --- steer: advisory teleport pre-check, then the real jump ----------------------
    const rooms = decodeRooms(client.mirror.staticScene!);
    const vetoed = teleportTo([99, 99], rooms);
    expect(vetoed.ok).toBe(false);
    const sentBefore = client.inFlight;
    expect(sentBefore).toBe(0); // the veto really did not send anything

    const jump = teleportTo([-1.2, -0.3], rooms);
    expect(jump.ok).toBe(true);
    if (!jump.ok) throw new Error("unreachable");
    await client.sendActions([jump.action]);
    const basePos = decodeVec(client.mirror.state!.agent.base_pos);
    expect(basePos[0]).toBeCloseTo(-1.2, 12);
    expect(basePos[1]).toBeCloseTo(-0.3, 12);

    // --- find the stove's toggle control from the static scene ----------------------
    const stove = client.mirror.object("stove_1")!;
    const model = client.mirror.staticScene!.models[stove.model]!;
    const toggleLinkId = model.virtual_links["TogglingLink"]!;
    expect(toggleLinkId).toBeTruthy();
    const knobBox = objectLinkGeoms(
      client.mirror.staticScene!,
      stove,
      client.mirror.state!.dynamic_models,
    ).find((g) => g.linkId === toggleLinkId)!.aabb;
    const knob = aabbCenter(knobBox);

    const handPos = (): Vec3 => {
      const hand = client.mirror.state!.agent.hands["left"]!;
      const p = decodeVec(hand.pose.pos);
      return [p[0]!, p[1]!, p[2]!];
    };

    // One hand move per step: command the remaining offset as a velocity,
    // stop when close or when collision clamping freezes the hand.
    const reach = async (target: Vec3): Promise<void> => {
      for (let i = 0; i < 80; i++) {
        const pos = handPos();
        const delta = vSub(target, pos);
        if (vNorm(delta) <= 0.004) return;
        await client.sendActions([
          moveHand("left", vScale(delta, 1 / STEP_SECONDS), [0, 0, 0], 0),
        ]);
        if (vDist(handPos(), pos) < 1e-9) return;
      }
      throw new Error(`hand never settled near ${JSON.stringify(target)}`);
    };

    // Come in high from +y, drop level with the control, push in.
    await reach([knob[0], knob[1] + 0.2, 1.0]);
    await reach([knob[0], knob[1] + 0.2, knob[2] + 0.3]);
    await reach([knob[0], knob[1] + 0.2, knob[2]]);
    expect(client.mirror.object("stove_1")!.toggled).toBe(false);
    recorder.onMarkAck(await client.recordControl({ op: "mark", label: "push" }));
    await reach(knob);

    // --- the acceptance beat: panel flips ToggledOn within one delta ----------------
    expect(client.mirror.object("stove_1")!.toggled).toBe(true);
    expect(firstToggledStep).not.toBeNull();

    for (const payload of eventLog) panel.ingest(payload);
    panel.refreshFlags(client.mirror.state!.objects);

    expect(stoveRow.tags).toContain("On");
    expect(stoveRow.flips.length).toBeGreaterThan(0);
    const flip = stoveRow.flips.find((f) => f.value.includes("On"))!;
    // The tags event is stamped with the very step whose delta carried
    // toggled=true, and the mirror had already folded that delta when the
    // event arrived: the flip is visible within one delta, not later.
    expect(flip.step).toBe(firstToggledStep);
    expect(stoveToggledAtIngest).toBe(true);
    expect(stoveRow.flags).toMatchObject({ toggled: true });
    expect(ghostRow.tags).toBeNull();

    // The task goal (cooked meat) is still pending; the banner must not lie.
    panel.noteKernelStatus(client.mirror.step, client.attach!.success, client.attach!.done);
    expect(panel.success).toBe(false);
    expect(panel.successStep).toBeNull();

    // --- stop recording and verify server-side --------------------------------------
    await client.sendActions([noop()]);
    expect(recorder.guardStop()).toBeNull();
    const stopAck = await client.recordControl({ op: "stop" });
    const log = recorder.onStopAck(stopAck);
    expect(client.recording).toBe(false);
    expect(log.finalDigest).toBe(client.mirror.digest); // our fold, their log
    expect(log.steps).toBe(client.mirror.step);
    expect(log.markers.map((m) => m.label)).toEqual(["approach", "push"]);

    const verifyAck = await client.replayVerify("demo.log");
    expect(verifyAck.ok).toBe(true);
    expect(verifyAck.final_digest).toBe(log.finalDigest);
    recorder.onVerify("demo.log", verifyAck.ok);
    expect(recorder.finished[0]!.verified).toBe(true);

    // --- download the demo over the same port ---------------------------------------
    const path = RecorderModel.downloadPath(log.target)!;
    expect(path).toBe("/demo.log");
    const download = await fetch(httpBase + path);
    expect(download.status).toBe(200);
    const logText = await download.text();
    expect(logText.length).toBeGreaterThan(0);
    const downloaded = join(scratchDir, "downloaded.log");
    await writeFile(downloaded, logText);

    // The console itself is served from the same endpoint.
    const page = await fetch(httpBase + "/");
    expect(page.status).toBe(200);
    expect(await page.text()).toContain("main.js");
    expect((await fetch(httpBase + "/main.js")).status).toBe(200);

    // --- the downloaded log replays digest-clean in the CLI --------------------------
    const { stdout } = await execFileAsync("python3", [
      "-m",
      "oikos",
      "replay",
      downloaded,
    ]);
    const replayed = JSON.parse(stdout) as {
      ok: boolean;
      final_digest: string;
      steps: number;
      success: boolean;
    };
    expect(replayed.ok).toBe(true);
    expect(replayed.final_digest).toBe(log.finalDigest);
    expect(replayed.steps).toBe(log.steps);

    client.disconnect();
  });

  it("lets an observer watch but never act", async () => {
    let closed = false;
    const observer = new BridgeClient(openSocket, "observer", {
      close: () => {
        closed = true;
      },
    });
    const attach = await observer.connect();
    expect(attach.role).toBe("observer");
    expect(observer.mirror.state).not.toBeNull();
    expect(observer.mirror.digest).toBe(attach.digest);

    await expect(observer.sendActions([noop()])).rejects.toThrowError(ServerError);
    // A protocol violation tears the connection down server-side.
    for (let i = 0; i < 100 && !closed; i++) {
      await new Promise((r) => setTimeout(r, 10));
    }
    expect(closed).toBe(true);
  });
});
