/**
 * Browser entry point: wires the protocol client, scene view, predicate
 * panel, steering controls and demo recorder into the page served by the
 * session server itself.
 */

import { BridgeClient } from "./client.js";
import type { RoomShape } from "./geom.js";
import { decodeRooms } from "./geom.js";
import { PredicatePanel } from "./panel.js";
import type { EncodedAction } from "./protocol.js";
import { RecorderModel } from "./recorder.js";
import { OrbitCamera, drawScene } from "./render.js";
import type { HandName } from "./steer.js";
import {
  DEFAULT_STEER,
  dragToAction,
  gripToAction,
  keysToAction,
  teleportTo,
} from "./steer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d")!;
const camera = new OrbitCamera();
const steer = { ...DEFAULT_STEER };

let panel: PredicatePanel | null = null;
const recorder = new RecorderModel();
let rooms: RoomShape[] = [];
const tagsByInstance = new Map<string, readonly string[]>();
const keysDown = new Set<string>();
let frameQueued = false;

function toast(text: string, kind: "info" | "error" = "info"): void {
  const box = el<HTMLDivElement>("toasts");
  const node = document.createElement("div");
  node.className = `toast ${kind}`;
  node.textContent = text;
  box.appendChild(node);
  setTimeout(() => node.remove(), 4000);
}

const client = new BridgeClient(
  () => new WebSocket(`ws://${location.host}/`),
  "controller",
  {
    attach(payload) {
      el("task-title").textContent = payload.task.title;
      el("session-meta").textContent =
        `${payload.task.id} · seed ${payload.seed} · scene ${payload.scene_digest.slice(0, 12)}`;
      if (panel === null) {
        panel = new PredicatePanel(payload.task.goal);
        for (const line of [...payload.task.goal, ...payload.task.initial]) {
          const m = /\(([^,()]+)/.exec(line);
          if (m !== undefined && m !== null && m[1] !== undefined) {
            maybeAutoWatch(m[1].trim());
          }
        }
      }
      panel.noteKernelStatus(payload.step, payload.success, payload.done);
      renderPanel();
      renderRecorder();
    },
    update(update) {
      if (update.kind === "desync") {
        toast(`stream desynced at step ${update.step}; resyncing`, "error");
        return;
      }
      if (update.kind === "snapshot" && client.mirror.staticScene !== null) {
        rooms = decodeRooms(client.mirror.staticScene);
      }
      if (panel !== null && client.mirror.state !== null) {
        panel.refreshFlags(client.mirror.state.objects);
      }
      el("step-indicator").textContent = `step ${client.mirror.step}`;
      el("digest-indicator").textContent = client.mirror.digest?.slice(0, 12) ?? "";
      renderPanel();
      scheduleFrame();
    },
    predicateEvents(payload) {
      if (panel === null) return;
      panel.ingest(payload);
      for (const event of payload.events) {
        if (event.kind === "tags") tagsByInstance.set(event.instance, event.tags);
      }
      renderPanel();
      scheduleFrame();
    },
    serverError(payload) {
      toast(`${payload.code}: ${payload.reason}`, "error");
      updateBusy();
    },
    bye(reason) {
      toast(`server: ${reason}`);
    },
    close() {
      el("conn-indicator").textContent = "disconnected";
      el("conn-indicator").className = "pill bad";
    },
    resync(attempt) {
      toast(`resync #${attempt}`);
    },
  },
);

function maybeAutoWatch(instance: string): void {
  if (panel === null) return;
  if (panel.watches.some((w) => w.instance === instance)) return;
  panel.addWatch(instance, client.mirror.liveObjectIds());
}

// --- rendering -------------------------------------------------------------------

function scheduleFrame(): void {
  if (frameQueued) return;
  frameQueued = true;
  requestAnimationFrame(() => {
    frameQueued = false;
    paint();
  });
}

function paint(): void {
  const { state, staticScene } = client.mirror;
  if (state === null || staticScene === null) return;
  drawScene(ctx, camera, canvas.width, canvas.height, {
    state,
    staticScene,
    rooms,
    tags: tagsByInstance,
    selected: null,
  });
}

function renderPanel(): void {
  if (panel === null) return;
  const goals = el<HTMLTableSectionElement>("goal-rows");
  goals.innerHTML = "";
  for (const row of panel.goals) {
    const tr = document.createElement("tr");
    const value =
      row.value === null ? "—" : row.value ? "true" : "false";
    const last = row.flips[row.flips.length - 1];
    tr.innerHTML =
      `<td>${row.text}</td>` +
      `<td class="${row.value === null ? "" : row.value ? "ok" : "bad"}">${value}</td>` +
      `<td>${last !== undefined ? `step ${last.step}` : ""}</td>`;
    goals.appendChild(tr);
  }
  const watches = el<HTMLTableSectionElement>("watch-rows");
  watches.innerHTML = "";
  for (const row of panel.watches) {
    const tr = document.createElement("tr");
    if (row.error !== null) {
      tr.innerHTML = `<td>${row.instance}</td><td colspan="2" class="bad">${row.error}</td>`;
    } else {
      const tags = row.tags === null ? "—" : row.tags.join(", ") || "(none)";
      const flags =
        row.flags === null
          ? ""
          : `toggled=${row.flags.toggled} sliced=${row.flags.sliced} wetness=${row.flags.wetness}`;
      const last = row.flips[row.flips.length - 1];
      tr.innerHTML =
        `<td>${row.instance}</td>` +
        `<td>${tags}<div class="dim">${flags}</div></td>` +
        `<td>${last !== undefined ? `step ${last.step}` : ""}</td>`;
    }
    watches.appendChild(tr);
  }
  const feed = el<HTMLUListElement>("event-feed");
  feed.innerHTML = "";
  for (const entry of panel.feed.slice(-12).reverse()) {
    const li = document.createElement("li");
    li.textContent = `[${entry.step}] ${entry.text}`;
    feed.appendChild(li);
  }
  const banner = el<HTMLDivElement>("goal-banner");
  if (panel.success) {
    banner.textContent = `SUCCESS at step ${panel.successStep}`;
    banner.className = "banner ok";
  } else if (panel.done) {
    banner.textContent = "episode over (time limit)";
    banner.className = "banner bad";
  } else {
    banner.textContent = "goal pending";
    banner.className = "banner";
  }
  el("conn-indicator").textContent = client.attach !== null ? client.attach.role : "connecting";
  el("conn-indicator").className = "pill ok";
}

function renderRecorder(): void {
  const startBtn = el<HTMLButtonElement>("rec-start");
  const stopBtn = el<HTMLButtonElement>("rec-stop");
  const markBtn = el<HTMLButtonElement>("rec-mark");
  const target = el<HTMLInputElement>("rec-target").value;
  const startGuard = recorder.guardStart(client.mirror.step, target);
  startBtn.disabled = startGuard !== null;
  startBtn.title = startGuard ?? "";
  const stopGuard = recorder.guardStop();
  stopBtn.disabled = stopGuard !== null;
  stopBtn.title = stopGuard ?? "";
  markBtn.disabled = recorder.guardMark() !== null;
  el("rec-state").textContent =
    recorder.phase === "recording"
      ? `recording → ${recorder.target} (${recorder.markers.length} marks)`
      : "idle";
  const list = el<HTMLUListElement>("rec-finished");
  list.innerHTML = "";
  for (const log of recorder.finished) {
    const li = document.createElement("li");
    const path = RecorderModel.downloadPath(log.target);
    const verified =
      log.verified === null ? "" : log.verified ? " · replay ok" : " · replay FAILED";
    li.innerHTML =
      (path !== null
        ? `<a href="${path}" download>${log.target}</a>`
        : log.target) +
      ` · ${log.steps} steps · ${log.finalDigest.slice(0, 12)}${verified}`;
    list.appendChild(li);
  }
}

function updateBusy(): void {
  el("controls").classList.toggle("busy", !client.canSend);
  el("busy-indicator").textContent = client.canSend ? "" : "busy — backpressure";
}

// --- actions ---------------------------------------------------------------------

async function sendOne(action: EncodedAction): Promise<void> {
  if (!client.canSend) {
    updateBusy();
    return;
  }
  try {
    await client.sendActions([action]);
  } catch (err) {
    toast(String(err), "error");
  } finally {
    updateBusy();
    renderRecorder();
  }
}

// Held movement keys: one combined twist message per animation frame.
function keyPump(): void {
  const action = keysToAction(keysDown, steer);
  if (action !== null) void sendOne(action);
  requestAnimationFrame(keyPump);
}

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  keysDown.add(ev.code);
});
window.addEventListener("keyup", (ev) => keysDown.delete(ev.code));

let dragging: { x: number; y: number; mode: "orbit" | "hand" } | null = null;
canvas.addEventListener("pointerdown", (ev) => {
  dragging = { x: ev.offsetX, y: ev.offsetY, mode: ev.altKey ? "hand" : "orbit" };
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (dragging === null) return;
  const dx = ev.offsetX - dragging.x;
  const dy = ev.offsetY - dragging.y;
  dragging.x = ev.offsetX;
  dragging.y = ev.offsetY;
  if (dragging.mode === "orbit") {
    camera.orbit(dx * 0.008, dy * 0.006);
    scheduleFrame();
  } else {
    // Alt-drag: steer the selected hand in the ground plane (shift: vertical).
    const scale = 30 / camera.zoom; // pixels per frame -> meters per second
    const clamp = (v: number) => Math.max(-2, Math.min(2, v));
    void sendOne(
      dragToAction(clamp(dx * scale), clamp(-dy * scale), ev.shiftKey, steer),
    );
  }
});
canvas.addEventListener("pointerup", () => (dragging = null));
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera.zoomBy(ev.deltaY < 0 ? 1.1 : 0.9);
  scheduleFrame();
});
canvas.addEventListener("dblclick", (ev) => {
  const floorZ = rooms[0]?.floorZ ?? 0;
  const point = camera.unprojectToPlane(
    ev.offsetX,
    ev.offsetY,
    canvas.width,
    canvas.height,
    floorZ,
  );
  const result = teleportTo(point, rooms);
  if (!result.ok) {
    toast(result.reason, "error");
    return;
  }
  void sendOne(result.action);
});

// --- control widgets ---------------------------------------------------------------

el<HTMLSelectElement>("hand-select").addEventListener("change", (ev) => {
  steer.hand = (ev.target as HTMLSelectElement).value as HandName;
});
el<HTMLInputElement>("press-dial").addEventListener("input", (ev) => {
  steer.press = Number((ev.target as HTMLInputElement).value);
  el("press-value").textContent = `${steer.press.toFixed(1)} N`;
});
for (const hand of ["left", "right"] as const) {
  el<HTMLInputElement>(`grip-${hand}`).addEventListener("change", (ev) => {
    const fraction = Number((ev.target as HTMLInputElement).value);
    void sendOne(gripToAction(hand, fraction));
  });
}
el<HTMLInputElement>("autoplay-rate").addEventListener("change", async (ev) => {
  const rate = Number((ev.target as HTMLInputElement).value);
  try {
    await client.setAutoplay(Number.isFinite(rate) && rate >= 0 ? rate : 0);
    toast(rate > 0 ? `autoplay at ${rate} steps/s` : "autoplay off");
  } catch (err) {
    toast(String(err), "error");
  }
});
el<HTMLButtonElement>("noop-step").addEventListener("click", () => {
  void sendOne({ kind: "noop" });
});

el<HTMLButtonElement>("watch-add").addEventListener("click", () => {
  const input = el<HTMLInputElement>("watch-input");
  const instance = input.value.trim();
  if (instance === "" || panel === null) return;
  panel.addWatch(instance, client.mirror.liveObjectIds());
  if (client.mirror.state !== null) panel.refreshFlags(client.mirror.state.objects);
  input.value = "";
  renderPanel();
});

el<HTMLButtonElement>("rec-start").addEventListener("click", async () => {
  const target = el<HTMLInputElement>("rec-target").value.trim();
  const guard = recorder.guardStart(client.mirror.step, target);
  if (guard !== null) {
    toast(guard, "error");
    return;
  }
  try {
    const ack = await client.recordControl({ op: "start", target });
    recorder.onStartAck(ack);
  } catch (err) {
    toast(String(err), "error");
  }
  renderRecorder();
});
el<HTMLButtonElement>("rec-stop").addEventListener("click", async () => {
  if (recorder.guardStop() !== null) return;
  try {
    const ack = await client.recordControl({ op: "stop" });
    const log = recorder.onStopAck(ack);
    const verify = await client.replayVerify(log.target);
    recorder.onVerify(log.target, verify.ok);
  } catch (err) {
    toast(String(err), "error");
  }
  renderRecorder();
});
el<HTMLButtonElement>("rec-mark").addEventListener("click", async () => {
  if (recorder.guardMark() !== null) return;
  const label = el<HTMLInputElement>("rec-label").value.trim() || "mark";
  try {
    const ack = await client.recordControl({ op: "mark", label });
    recorder.onMarkAck(ack);
  } catch (err) {
    toast(String(err), "error");
  }
  renderRecorder();
});
el<HTMLInputElement>("rec-target").addEventListener("input", renderRecorder);

// --- boot ------------------------------------------------------------------------

void (async () => {
  try {
    await client.connect();
    toast("attached");
    renderRecorder();
    scheduleFrame();
    keyPump();
  } catch (err) {
    toast(`connect failed: ${String(err)}`, "error");
  }
})();
