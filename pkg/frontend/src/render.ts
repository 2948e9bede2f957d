/**
 * 2.5D scene view: an orbiting orthographic camera over AABB geometry.
 *
 * Objects draw as their link boxes; appearance tags from the kernel map to
 * color coding (cooked, burnt, frozen, soaked, dusty, stained, a glow for
 * toggled-on, a split mark for sliced).  Droplets and surface particles draw
 * as dots.  The painter is immediate-mode over a Canvas-2D-compatible
 * context and renders whatever the mirror holds — one frame per applied
 * message at most, scheduled by the caller.
 */

import type { Aabb, RoomShape, Vec3 } from "./geom.js";
import { decodePose, objectLinkGeoms, transformPoint } from "./geom.js";
import type { StaticPayload, WireState } from "./protocol.js";
import { decodeVec } from "./protocol.js";

// --- camera ----------------------------------------------------------------------

export class OrbitCamera {
  yaw = Math.PI / 4;
  pitch = Math.PI / 5;
  zoom = 120; // pixels per meter
  target: Vec3 = [0, 0, 0.4];

  /** Screen position plus view depth (larger depth = nearer the eye). */
  project(p: Vec3, width: number, height: number): [number, number, number] {
    const dx = p[0] - this.target[0];
    const dy = p[1] - this.target[1];
    const dz = p[2] - this.target[2];
    const cy = Math.cos(this.yaw);
    const sy = Math.sin(this.yaw);
    const right = dx * cy + dy * sy;
    const forward = -dx * sy + dy * cy;
    const cp = Math.cos(this.pitch);
    const sp = Math.sin(this.pitch);
    const up = dz * cp - forward * sp;
    const depth = -(forward * cp + dz * sp);
    return [width / 2 + right * this.zoom, height / 2 - up * this.zoom, depth];
  }

  orbit(dYaw: number, dPitch: number): void {
    this.yaw += dYaw;
    this.pitch = Math.min(Math.PI / 2 - 0.05, Math.max(0.05, this.pitch + dPitch));
  }

  zoomBy(factor: number): void {
    this.zoom = Math.min(600, Math.max(20, this.zoom * factor));
  }

  /** Invert a screen point onto the z = zPlane world plane (for teleports). */
  unprojectToPlane(
    sx: number,
    sy: number,
    width: number,
    height: number,
    zPlane: number,
  ): [number, number] {
    const right = (sx - width / 2) / this.zoom;
    const up = (height / 2 - sy) / this.zoom;
    const dz = zPlane - this.target[2];
    const cp = Math.cos(this.pitch);
    const sp = Math.sin(this.pitch);
    // up = dz*cp - forward*sp  =>  forward = (dz*cp - up) / sp
    const forward = sp !== 0 ? (dz * cp - up) / sp : 0;
    const cy = Math.cos(this.yaw);
    const sy2 = Math.sin(this.yaw);
    const dx = right * cy - forward * sy2;
    const dy = right * sy2 + forward * cy;
    return [this.target[0] + dx, this.target[1] + dy];
  }
}

// --- styling ---------------------------------------------------------------------

/** Stable pastel from the category name, so repeated categories match. */
export function categoryColor(category: string): string {
  let h = 2166136261;
  for (let i = 0; i < category.length; i++) {
    h ^= category.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  const hue = ((h >>> 0) % 360 + 360) % 360;
  return `hsl(${hue}, 45%, 62%)`;
}

export interface TagStyle {
  fill: string | null;
  outline: string | null;
  split: boolean;
}

/** Map kernel appearance tags to the drawing overrides. */
export function tagStyle(tags: readonly string[]): TagStyle {
  let fill: string | null = null;
  let outline: string | null = null;
  if (tags.includes("Frozen")) fill = "hsl(197, 71%, 73%)";
  if (tags.includes("Soaked")) fill = "hsl(217, 71%, 56%)";
  if (tags.includes("Cooked")) fill = "hsl(25, 56%, 41%)";
  if (tags.includes("Burnt")) fill = "hsl(0, 0%, 16%)";
  if (tags.includes("Dusty")) outline = "hsl(0, 0%, 55%)";
  if (tags.includes("Stained")) outline = "hsl(281, 55%, 50%)";
  if (tags.includes("On")) outline = "hsl(32, 95%, 55%)";
  return { fill, outline, split: tags.includes("Sliced") };
}

// --- painter ---------------------------------------------------------------------

/** The Canvas-2D subset the painter uses; tests can pass a recorder. */
export interface Paintbrush {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
}

interface DrawBox {
  aabb: Aabb;
  fill: string;
  outline: string | null;
  split: boolean;
  depth: number;
  alpha: number;
}

const BOX_EDGES: [number, number][] = [
  [0, 1], [0, 2], [1, 3], [2, 3],
  [4, 5], [4, 6], [5, 7], [6, 7],
  [0, 4], [1, 5], [2, 6], [3, 7],
];

function aabbCorners(box: Aabb): Vec3[] {
  const out: Vec3[] = [];
  for (const z of [box.min[2], box.max[2]]) {
    for (const y of [box.min[1], box.max[1]]) {
      for (const x of [box.min[0], box.max[0]]) {
        out.push([x, y, z]);
      }
    }
  }
  return out;
}

function drawBox(
  ctx: Paintbrush,
  camera: OrbitCamera,
  width: number,
  height: number,
  box: DrawBox,
): void {
  const pts = aabbCorners(box.aabb).map((c) => camera.project(c, width, height));
  // Top face fill (corners 4..7 are the max-z plane; order them as a loop).
  const top = [pts[4]!, pts[5]!, pts[7]!, pts[6]!];
  ctx.globalAlpha = box.alpha;
  ctx.fillStyle = box.fill;
  ctx.beginPath();
  ctx.moveTo(top[0]![0], top[0]![1]);
  for (const p of top.slice(1)) ctx.lineTo(p[0], p[1]);
  ctx.closePath();
  ctx.fill();
  ctx.strokeStyle = box.outline ?? "rgba(18, 20, 26, 0.8)";
  ctx.lineWidth = box.outline === null ? 1 : 2.5;
  for (const [a, b] of BOX_EDGES) {
    ctx.beginPath();
    ctx.moveTo(pts[a]![0], pts[a]![1]);
    ctx.lineTo(pts[b]![0], pts[b]![1]);
    ctx.stroke();
  }
  if (box.split) {
    // A diagonal cut across the top face marks a sliced half.
    ctx.strokeStyle = "rgba(255, 255, 255, 0.9)";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(top[0]![0], top[0]![1]);
    ctx.lineTo(top[2]![0], top[2]![1]);
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
}

export interface SceneInput {
  state: WireState;
  staticScene: StaticPayload;
  rooms: RoomShape[];
  /** Latest kernel-sent appearance tags per instance. */
  tags: ReadonlyMap<string, readonly string[]>;
  selected?: string | null;
}

export function drawScene(
  ctx: Paintbrush,
  camera: OrbitCamera,
  width: number,
  height: number,
  scene: SceneInput,
): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, width, height);

  for (const room of scene.rooms) {
    const pts = room.polygon.map((p) =>
      camera.project([p[0], p[1], room.floorZ], width, height),
    );
    ctx.fillStyle = "#1d212b";
    ctx.strokeStyle = "#303749";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(pts[0]![0], pts[0]![1]);
    for (const p of pts.slice(1)) ctx.lineTo(p[0], p[1]);
    ctx.closePath();
    ctx.fill();
    ctx.stroke();
  }

  const boxes: DrawBox[] = [];
  const particleDots: { p: Vec3; color: string }[] = [];
  for (const [id, obj] of Object.entries(scene.state.objects)) {
    if (obj.consumed) continue;
    const tags = scene.tags.get(id) ?? [];
    const style = tagStyle(tags);
    const base = style.fill ?? categoryColor(obj.category);
    const outline =
      scene.selected === id ? "hsl(150, 80%, 60%)" : style.outline;
    const geoms = objectLinkGeoms(
      scene.staticScene,
      obj,
      scene.state.dynamic_models,
    );
    for (const geom of geoms) {
      const depth = camera.project(
        [
          (geom.aabb.min[0] + geom.aabb.max[0]) / 2,
          (geom.aabb.min[1] + geom.aabb.max[1]) / 2,
          (geom.aabb.min[2] + geom.aabb.max[2]) / 2,
        ],
        width,
        height,
      )[2];
      boxes.push({
        aabb: geom.aabb,
        fill: base,
        outline,
        split: style.split,
        depth,
        alpha: geom.colliding ? 0.92 : 0.45,
      });
    }
    const bodyPose = decodePose(obj.pose);
    for (const particle of obj.particles) {
      if (!particle.active) continue;
      const local = decodeVec(particle.point) as Vec3;
      particleDots.push({
        p: transformPoint(bodyPose, local),
        color: particle.kind === "stain" ? "hsl(281, 60%, 62%)" : "hsl(0, 0%, 72%)",
      });
    }
  }

  for (const [name, hand] of Object.entries(scene.state.agent.hands)) {
    const pose = decodePose(hand.pose);
    const half: Vec3 = [0.05, 0.06, 0.02];
    boxes.push({
      aabb: {
        min: [pose.pos[0] - half[0], pose.pos[1] - half[1], pose.pos[2] - half[2]],
        max: [pose.pos[0] + half[0], pose.pos[1] + half[1], pose.pos[2] + half[2]],
      },
      fill: name === "right" ? "hsl(210, 30%, 80%)" : "hsl(40, 30%, 80%)",
      outline: hand.grasp !== null ? "hsl(150, 80%, 60%)" : null,
      split: false,
      depth: camera.project(pose.pos, width, height)[2],
      alpha: 0.95,
    });
  }

  boxes.sort((a, b) => a.depth - b.depth);
  for (const box of boxes) drawBox(ctx, camera, width, height, box);

  for (const dot of particleDots) {
    const [x, y] = camera.project(dot.p, width, height);
    ctx.globalAlpha = 0.9;
    ctx.fillStyle = dot.color;
    ctx.beginPath();
    ctx.arc(x, y, 1.6, 0, Math.PI * 2);
    ctx.fill();
  }

  for (const droplet of Object.values(scene.state.droplets)) {
    const pos = decodeVec(droplet.position) as Vec3;
    const [x, y] = camera.project(pos, width, height);
    ctx.globalAlpha = 0.9;
    ctx.fillStyle = "hsl(200, 90%, 65%)";
    ctx.beginPath();
    ctx.arc(x, y, 2.2, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.globalAlpha = 1;
}
