/**
 * Input-to-action mapping: keys and pointer gestures become exactly one
 * action message each.
 *
 * The mapping is total (every recognized gesture maps to one action) and
 * injective per frame (at most one action message per gesture per frame).
 * The only client-side veto is the advisory teleport pre-check against the
 * room polygons — the kernel rejects out-of-room teleports without stepping,
 * so filtering them here keeps the session responsive.
 */

import type { RoomShape, Vec3 } from "./geom.js";
import { pointInAnyRoom } from "./geom.js";
import type { EncodedAction } from "./protocol.js";
import { moveHand, setTrigger, teleportBase } from "./protocol.js";

export type HandName = "left" | "right";

export interface SteerState {
  hand: HandName;
  /** Linear hand speed for key moves, m/s. */
  speed: number;
  /** Angular hand speed for key turns, rad/s. */
  turnSpeed: number;
  /** Press force (N) riding on every hand move; drives slicing. */
  press: number;
}

export const DEFAULT_STEER: SteerState = {
  hand: "right",
  speed: 0.6,
  turnSpeed: 1.2,
  press: 0,
};

/** Camera-independent key twist: world axes, +x east, +y north, +z up. */
const KEY_LINEAR: Record<string, Vec3> = {
  KeyD: [1, 0, 0],
  KeyA: [-1, 0, 0],
  KeyW: [0, 1, 0],
  KeyS: [0, -1, 0],
  KeyR: [0, 0, 1],
  KeyF: [0, 0, -1],
};

const KEY_ANGULAR: Record<string, Vec3> = {
  KeyQ: [0, 0, 1],
  KeyE: [0, 0, -1],
};

/**
 * Combine the currently held movement keys into one hand twist action, or
 * null when no movement key is held (no gesture, no message).
 */
export function keysToAction(
  keysDown: ReadonlySet<string>,
  steer: SteerState,
): EncodedAction | null {
  const linear: Vec3 = [0, 0, 0];
  const angular: Vec3 = [0, 0, 0];
  let any = false;
  for (const [code, dir] of Object.entries(KEY_LINEAR)) {
    if (keysDown.has(code)) {
      linear[0] += dir[0] * steer.speed;
      linear[1] += dir[1] * steer.speed;
      linear[2] += dir[2] * steer.speed;
      any = true;
    }
  }
  for (const [code, dir] of Object.entries(KEY_ANGULAR)) {
    if (keysDown.has(code)) {
      angular[0] += dir[0] * steer.turnSpeed;
      angular[1] += dir[1] * steer.turnSpeed;
      angular[2] += dir[2] * steer.turnSpeed;
      any = true;
    }
  }
  if (!any) return null;
  return moveHand(steer.hand, linear, angular, steer.press);
}

/** A pointer drag on the scene moves the hand in the ground plane (shift: up/down). */
export function dragToAction(
  dxWorld: number,
  dyWorld: number,
  vertical: boolean,
  steer: SteerState,
): EncodedAction {
  const linear: Vec3 = vertical ? [0, 0, dyWorld] : [dxWorld, dyWorld, 0];
  return moveHand(steer.hand, linear, [0, 0, 0], steer.press);
}

/** Grip slider position becomes one SetTrigger; crossing 0.5 latches grasp. */
export function gripToAction(hand: HandName, fraction: number): EncodedAction {
  const clamped = Math.min(1, Math.max(0, fraction));
  return setTrigger(hand, clamped);
}

export type TeleportResult =
  | { ok: true; action: EncodedAction; room: string }
  | { ok: false; reason: string };

/** Click-to-teleport with the advisory room-polygon pre-check. */
export function teleportTo(
  point: [number, number],
  rooms: readonly RoomShape[],
): TeleportResult {
  const room = pointInAnyRoom(point, rooms as RoomShape[]);
  if (room === null) {
    return {
      ok: false,
      reason: `(${point[0].toFixed(2)}, ${point[1].toFixed(2)}) is outside every room`,
    };
  }
  return { ok: true, action: teleportBase(point[0], point[1]), room };
}
