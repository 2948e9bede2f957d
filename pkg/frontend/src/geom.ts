/**
 * Minimal rigid-body math for the console: vectors, quaternions (w, x, y, z),
 * poses and axis-aligned bounding boxes, following the same conventions and
 * operation order as the kernel so client-side geometry lands on the same
 * numbers.
 *
 * Everything here is advisory — it positions pixels and pre-checks inputs.
 * Logical truth always comes from kernel messages.
 */

import type { StaticPayload, WireModel, WireObject, WirePose } from "./protocol.js";
import { decodeF64, decodeVec } from "./protocol.js";

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // (w, x, y, z)

export const IDENTITY_QUAT: Quat = [1, 0, 0, 0];

export function vAdd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vSub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vScale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vCross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function vNorm(a: Vec3): number {
  return Math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

export function vDist(a: Vec3, b: Vec3): number {
  return vNorm(vSub(a, b));
}

export function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  // v' = v + 2*w*(u x v) + 2*(u x (u x v)) with u the vector part.
  const u: Vec3 = [q[1], q[2], q[3]];
  const t = vScale(vCross(u, v), 2);
  return vAdd(vAdd(v, vScale(t, q[0])), vCross(u, t));
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = vNorm(axis);
  const half = angle * 0.5;
  const s = Math.sin(half);
  return [Math.cos(half), (axis[0] / n) * s, (axis[1] / n) * s, (axis[2] / n) * s];
}

export interface PoseT {
  pos: Vec3;
  orn: Quat;
}

export function transformPoint(pose: PoseT, p: Vec3): Vec3 {
  return vAdd(quatRotate(pose.orn, p), pose.pos);
}

/** `a` applied after `b` (a * b), matching the kernel's composition. */
export function composePose(a: PoseT, b: PoseT): PoseT {
  return {
    pos: transformPoint(a, b.pos),
    orn: quatNormalize(quatMul(a.orn, b.orn)),
  };
}

export function decodePose(wire: WirePose): PoseT {
  const pos = decodeVec(wire.pos);
  const orn = decodeVec(wire.orn);
  return { pos: [pos[0]!, pos[1]!, pos[2]!], orn: [orn[0]!, orn[1]!, orn[2]!, orn[3]!] };
}

// --- AABBs -----------------------------------------------------------------------

export interface Aabb {
  min: Vec3;
  max: Vec3;
}

export function aabbCenter(a: Aabb): Vec3 {
  return [
    (a.min[0] + a.max[0]) / 2,
    (a.min[1] + a.max[1]) / 2,
    (a.min[2] + a.max[2]) / 2,
  ];
}

export function aabbUnion(a: Aabb, b: Aabb): Aabb {
  return {
    min: [
      Math.min(a.min[0], b.min[0]),
      Math.min(a.min[1], b.min[1]),
      Math.min(a.min[2], b.min[2]),
    ],
    max: [
      Math.max(a.max[0], b.max[0]),
      Math.max(a.max[1], b.max[1]),
      Math.max(a.max[2], b.max[2]),
    ],
  };
}

export function aabbOverlaps(a: Aabb, b: Aabb, pad = 0): boolean {
  return (
    a.min[0] <= b.max[0] + pad &&
    b.min[0] <= a.max[0] + pad &&
    a.min[1] <= b.max[1] + pad &&
    b.min[1] <= a.max[1] + pad &&
    a.min[2] <= b.max[2] + pad &&
    b.min[2] <= a.max[2] + pad
  );
}

function aabbOfPoints(points: Vec3[]): Aabb {
  const first = points[0]!;
  const box: Aabb = { min: [...first], max: [...first] };
  for (const p of points) {
    for (let i = 0; i < 3; i++) {
      if (p[i]! < box.min[i]!) box.min[i] = p[i]!;
      if (p[i]! > box.max[i]!) box.max[i] = p[i]!;
    }
  }
  return box;
}

function boxCorners(half: Vec3): Vec3[] {
  const out: Vec3[] = [];
  for (const sx of [-1, 1]) {
    for (const sy of [-1, 1]) {
      for (const sz of [-1, 1]) {
        out.push([sx * half[0], sy * half[1], sz * half[2]]);
      }
    }
  }
  return out;
}

// --- posed model links --------------------------------------------------------------

export interface LinkGeom {
  linkId: string;
  colliding: boolean;
  worldPose: PoseT;
  aabb: Aabb;
  /** Local-frame corner cloud, for renderers that draw oriented shapes. */
  localPoints: Vec3[];
}

function jointMotion(kind: "Prismatic" | "Revolute", axis: Vec3, q: number): PoseT {
  if (kind === "Prismatic") {
    return { pos: vScale(axis, q), orn: IDENTITY_QUAT };
  }
  return { pos: [0, 0, 0], orn: quatFromAxisAngle(axis, q) };
}

/**
 * World geometry of every link of a posed model, resolving the parent chain
 * and joint values exactly as the kernel does.
 */
export function linkGeoms(
  model: WireModel,
  basePose: PoseT,
  joints: Record<string, string>,
): LinkGeom[] {
  const poses = new Map<string, PoseT>();
  const out: LinkGeom[] = [];
  const remaining = [...model.links];
  while (remaining.length > 0) {
    let progressed = false;
    for (let i = 0; i < remaining.length; i++) {
      const link = remaining[i]!;
      let parentPose: PoseT;
      if (link.parent === null) {
        parentPose = basePose;
      } else if (poses.has(link.parent)) {
        parentPose = poses.get(link.parent)!;
      } else {
        continue;
      }
      let local = decodePose(link.local_pose);
      if (link.joint !== null) {
        const raw = joints[link.id];
        const q = raw !== undefined ? decodeF64(raw) : decodeF64(link.joint.range[0]);
        const axis = decodeVec(link.joint.axis) as Vec3;
        local = composePose(local, jointMotion(link.joint.kind, axis, q));
      }
      const pose = composePose(parentPose, local);
      poses.set(link.id, pose);
      const points =
        link.shape.kind === "box"
          ? boxCorners(decodeVec(link.shape.half_extents) as Vec3)
          : link.shape.vertices.map((v) => decodeVec(v) as Vec3);
      out.push({
        linkId: link.id,
        colliding: link.colliding,
        worldPose: pose,
        aabb: aabbOfPoints(points.map((p) => transformPoint(pose, p))),
        localPoints: points,
      });
      remaining.splice(i, 1);
      i--;
      progressed = true;
    }
    if (!progressed) {
      throw new Error(`link hierarchy of model ${JSON.stringify(model.category)} is not a tree`);
    }
  }
  return out;
}

/** Resolve an instance's model from the static payload plus dynamic models. */
export function modelOf(
  staticScene: StaticPayload,
  obj: WireObject,
  dynamicModels: Record<string, { category: string; half_extents: string[]; mass: string }>,
): WireModel {
  const fromStatic = staticScene.models[obj.model];
  if (fromStatic !== undefined) return fromStatic;
  const dyn = dynamicModels[obj.model];
  if (dyn === undefined) {
    throw new Error(`unknown model ${JSON.stringify(obj.model)}`);
  }
  return {
    category: dyn.category,
    mass: dyn.mass,
    virtual_links: {},
    links: [
      {
        colliding: true,
        id: "body",
        joint: null,
        local_pose: {
          pos: ["0000000000000000", "0000000000000000", "0000000000000000"],
          orn: [
            "3ff0000000000000",
            "0000000000000000",
            "0000000000000000",
            "0000000000000000",
          ],
        },
        parent: null,
        shape: { kind: "box", half_extents: dyn.half_extents },
      },
    ],
  };
}

export function objectLinkGeoms(
  staticScene: StaticPayload,
  obj: WireObject,
  dynamicModels: Record<string, { category: string; half_extents: string[]; mass: string }>,
): LinkGeom[] {
  return linkGeoms(modelOf(staticScene, obj, dynamicModels), decodePose(obj.pose), obj.joints);
}

export function objectAabb(geoms: LinkGeom[], collidingOnly = true): Aabb {
  let picked = collidingOnly ? geoms.filter((g) => g.colliding) : geoms;
  if (picked.length === 0) picked = geoms;
  return picked.map((g) => g.aabb).reduce(aabbUnion);
}

// --- rooms -----------------------------------------------------------------------

export interface RoomShape {
  id: string;
  kind: string;
  floorZ: number;
  polygon: [number, number][];
}

export function decodeRooms(staticScene: StaticPayload): RoomShape[] {
  return Object.entries(staticScene.rooms)
    .map(([id, room]) => ({
      id,
      kind: room.kind,
      floorZ: decodeF64(room.floor_z),
      polygon: room.polygon.map((p) => {
        const v = decodeVec(p);
        return [v[0]!, v[1]!] as [number, number];
      }),
    }))
    .sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
}

/** Even-odd point-in-polygon test for teleport pre-checks (advisory only). */
export function pointInPolygon(point: [number, number], polygon: [number, number][]): boolean {
  const [x, y] = point;
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const [xi, yi] = polygon[i]!;
    const [xj, yj] = polygon[j]!;
    const crosses = yi > y !== yj > y;
    if (crosses && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

export function pointInAnyRoom(point: [number, number], rooms: RoomShape[]): string | null {
  for (const room of rooms) {
    if (pointInPolygon(point, room.polygon)) return room.id;
  }
  return null;
}
